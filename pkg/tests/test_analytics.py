import csv

import pytest

from geofeedkit import GeofeedkitError
from geofeedkit.analytics import (
    AsInfoProvider,
    Category,
    FixtureAsInfoProvider,
    HttpAsInfoProvider,
    MissingTotals,
    ProviderError,
    RecordTotals,
    argmax,
    as_category_breakdown,
    ases_by_rir,
    country_prefix_counts,
    load_totals,
    prefix_length_histogram,
    rfc8805_summary,
    rfc9092_summary,
    rir_adoption_stats,
    write_csv,
)
from geofeedkit.geofeed import decode_file, validate_file, validate_line
from geofeedkit.prefix import Family
from geofeedkit.rpsl import (
    GeofeedLocator,
    LocatorVerdict,
    ObjectClass,
    RecordRef,
    Rir,
    SourceAttribute,
)

# records with a geofeed locator and distinct origin ASes per RIR
COUNTS = {
    Rir.AFRINIC: (421, 24, 19),
    Rir.APNIC: (871, 141, 156),
    Rir.ARIN: (1375, 206, 440),
    Rir.LACNIC: (58, 16, 21),
    Rir.RIPE: (12447, 2905, 1417),
}

TOTALS = {
    Rir.AFRINIC: (150357, 34286),
    Rir.APNIC: (1244286, 100714),
    Rir.ARIN: (74728, 71034),
    Rir.LACNIC: (450000, 26667),
    Rir.RIPE: (4149000, 854412),
}

# ASes publishing in both RIPE and ARIN
SHARED_ASES = 146


def _locator(rir, index, object_class, origin_as=None, verdict=None, url=None):
    ref = RecordRef(rir, index, object_class, f"start-{index}", f"end-{index}", origin_as)
    return GeofeedLocator(
        url or f"https://{rir.value.lower()}.example/{index}.csv",
        SourceAttribute.GEOFEED_ATTR,
        ref,
        verdict or frozenset({LocatorVerdict.VALID}),
    )


def _as_pools():
    pools = {}
    next_asn = 1
    for rir in (Rir.RIPE, Rir.AFRINIC, Rir.APNIC, Rir.LACNIC):
        n = COUNTS[rir][2]
        pools[rir] = list(range(next_asn, next_asn + n))
        next_asn += n
    own = COUNTS[Rir.ARIN][2] - SHARED_ASES
    pools[Rir.ARIN] = pools[Rir.RIPE][:SHARED_ASES] + list(range(next_asn, next_asn + own))
    return pools


@pytest.fixture(scope="module")
def adoption_locators():
    pools = _as_pools()
    locators = []
    for rir, (v4, v6, _) in COUNTS.items():
        pool = pools[rir]
        for i in range(v4 + v6):
            cls = ObjectClass.INETNUM if i < v4 else ObjectClass.INET6NUM
            locators.append(_locator(rir, i, cls, pool[i % len(pool)]))
    return locators


@pytest.fixture(scope="module")
def totals():
    return RecordTotals(
        {rir: {"inetnum": a, "inet6num": b} for rir, (a, b) in TOTALS.items()},
        "all inetnum and inet6num objects",
    )


def test_adoption_table(adoption_locators, totals):
    table = rir_adoption_stats(adoption_locators, totals)

    for rir, (v4, v6, ases) in COUNTS.items():
        row = table.row(rir)
        assert (row.inetnum_count, row.inet6num_count, row.as_count) == (v4, v6, ases)

    assert table.total.inetnum_count == 15172
    assert table.total.inet6num_count == 3292
    assert table.total.as_count == 1907

    assert table.inetnum_share(Rir.RIPE) * 100 == pytest.approx(82.04, abs=0.01)
    assert table.inet6num_share(Rir.RIPE) * 100 == pytest.approx(88.24, abs=0.01)
    assert table.total.inetnum_fraction * 100 == pytest.approx(0.25, abs=0.01)
    assert table.total.inet6num_fraction * 100 == pytest.approx(0.30, abs=0.01)

    obj = table.to_dict()
    assert obj["denominator"] == "all inetnum and inet6num objects"
    assert obj["total"]["as_count"] == 1907
    ripe = next(r for r in obj["rows"] if r["rir"] == "RIPE")
    assert ripe["inetnum_share"] == 82.04


def test_adoption_counts_records_not_locators(totals):
    locators = [
        _locator(Rir.RIPE, 0, ObjectClass.INETNUM, 1, url="https://a.example/1.csv"),
        _locator(Rir.RIPE, 0, ObjectClass.INETNUM, 1, url="https://a.example/2.csv"),
        _locator(Rir.RIPE, 1, ObjectClass.INET6NUM, 2),
    ]
    row = rir_adoption_stats(locators, totals).row(Rir.RIPE)
    assert (row.inetnum_count, row.inet6num_count, row.as_count) == (1, 1, 2)


def test_adoption_missing_totals():
    totals = RecordTotals({Rir.RIPE: {"inetnum": 10, "inet6num": 10}})
    table = rir_adoption_stats([_locator(Rir.RIPE, 0, ObjectClass.INETNUM)], totals)
    assert table.row(Rir.ARIN).inetnum_fraction == 0.0

    with pytest.raises(MissingTotals):
        rir_adoption_stats([_locator(Rir.ARIN, 0, ObjectClass.INETNUM)], totals)


def test_adoption_csv(adoption_locators, totals, tmp_path):
    path = tmp_path / "adoption.csv"
    write_csv(str(path), *rir_adoption_stats(adoption_locators, totals).csv_rows())

    raw = path.read_bytes()
    assert b"\r\n" not in raw
    rows = list(csv.reader(raw.decode("utf-8").splitlines()))
    assert rows[0][0] == "rir"
    assert [r[0] for r in rows[1:]] == ["AFRINIC", "APNIC", "ARIN", "LACNIC", "RIPE", "Total"]


def test_load_totals(tmp_path):
    path = tmp_path / "totals.yml"
    path.write_text(
        "denominator: bulk dumps\nRIPE: {inetnum: 4149000, inet6num: 854412}\narin: {inetnum: 5}\n",
        encoding="utf-8",
    )
    totals = load_totals(str(path))
    assert totals.denominator == "bulk dumps"
    assert totals.get(Rir.RIPE, "inet6num") == 854412
    assert totals.get(Rir.ARIN, "inet6num") == 0
    assert Rir.APNIC not in totals


@pytest.mark.parametrize("content", ["- a\n- b\n", "IANA: {inetnum: 1}\n", "RIPE: 3\n"])
def test_load_totals_rejects(tmp_path, content):
    path = tmp_path / "totals.yml"
    path.write_text(content, encoding="utf-8")
    with pytest.raises(GeofeedkitError):
        load_totals(str(path))


def test_ases_by_rir(adoption_locators):
    ases = ases_by_rir(adoption_locators)
    assert len(ases[Rir.ARIN]) == 440
    assert ases[Rir.ARIN] == sorted(ases[Rir.ARIN])


def test_rfc9092_not_https_share():
    not_https = frozenset({LocatorVerdict.NOT_HTTPS})
    locators = [
        _locator(Rir.RIPE, i, ObjectClass.INETNUM, verdict=not_https if i < 100 else None)
        for i in range(18464)
    ]
    summary = rfc9092_summary(locators)

    assert summary.total_records == 18464
    assert summary.records[LocatorVerdict.NOT_HTTPS] == 100
    assert summary.not_https_fraction * 100 == pytest.approx(0.54, abs=0.01)
    assert summary.to_dict()["record_fractions"]["not_https"] == 0.54


def test_rfc9092_record_verdict_is_union():
    both = frozenset({LocatorVerdict.NOT_HTTPS, LocatorVerdict.INVALID_FORMATTING})
    locators = [
        _locator(Rir.RIPE, 0, ObjectClass.INETNUM, url="https://a.example/1.csv"),
        _locator(Rir.RIPE, 0, ObjectClass.INETNUM, verdict=both, url="http://a.example/2.csv"),
        _locator(Rir.RIPE, 1, ObjectClass.INETNUM),
    ]
    summary = rfc9092_summary(locators)

    assert summary.total_records == 2
    assert summary.total_locators == 3
    assert summary.records[LocatorVerdict.VALID] == 1
    assert summary.records[LocatorVerdict.NOT_HTTPS] == 1
    assert summary.records[LocatorVerdict.INVALID_FORMATTING] == 1
    assert summary.locators[LocatorVerdict.VALID] == 2


def test_rfc8805_crlf_share():
    reports = [validate_file(decode_file(b"10.0.0.0/8,US,,,\r\n")) for _ in range(393)]
    reports += [validate_file(decode_file(b"10.0.0.0/8,US,,,\n")) for _ in range(1427 - 393)]
    summary = rfc8805_summary(reports)

    assert summary.files == 1427
    assert summary.crlf_files == 393
    assert summary.crlf_fraction * 100 == pytest.approx(27.54, abs=0.01)
    assert summary.utf8_files == 1427


@pytest.mark.slow
def test_rfc8805_valid_share():
    valid, total = 511035, 570909
    raw = b"192.0.2.0/24,US,US-CA,,\r\n" * valid + b"192.0.2.0/24,US\r\n" * (total - valid)
    summary = rfc8805_summary([validate_file(decode_file(raw))])

    assert summary.lines.total == total
    assert summary.lines.valid == valid
    assert summary.valid_fraction * 100 == pytest.approx(89.51, abs=0.01)
    assert summary.malformed_fraction * 100 == pytest.approx(10.49, abs=0.01)


def test_rfc8805_aggregates_reasons():
    a = validate_file(decode_file(b"1.2.3.0/24,XQ,ZZ-99,,\r\n1.2.3.0/24,US,,,\r\n"))
    b = validate_file(decode_file(b"1.2.3.0/24,US\n"))
    summary = rfc8805_summary([a, b])

    obj = summary.to_dict()
    assert obj["total"] == 3
    assert obj["malformed"] == 2
    assert obj["reasons"]["malformed_country_code"] == 1
    assert obj["reasons"]["not_enough_fields"] == 1
    assert obj["crlf_files"] == 1
    header, rows = summary.csv_rows()
    assert header == ["reason", "lines", "primary_lines"]
    assert len(rows) == 4


class _Provider(AsInfoProvider):
    def __init__(self, mapping):
        self.mapping = mapping

    def category(self, asn):
        if asn not in self.mapping:
            raise ProviderError(asn)
        return self.mapping[asn]


def test_category_breakdown():
    ases = {Rir.RIPE: [1, 2, 3, 4], Rir.ARIN: [5, 6]}
    provider = _Provider(
        {1: Category.BUSINESS, 2: Category.BUSINESS, 3: Category.ISP, 5: Category.HOSTING, 6: Category.BUSINESS}
    )
    breakdown = as_category_breakdown(ases, provider)

    assert breakdown.per_rir[Rir.RIPE][Category.BUSINESS] == 2
    assert breakdown.per_rir[Rir.RIPE][Category.UNKNOWN] == 1
    assert breakdown.ranking()[0] is Category.BUSINESS
    assert breakdown.overall()[Category.BUSINESS] == 3
    assert breakdown.to_dict()["ARIN"] == {
        "ISP": 0,
        "Business": 1,
        "Hosting": 1,
        "Education": 0,
        "Unknown": 0,
    }


@pytest.mark.parametrize(
    "label, category",
    [
        ("isp", Category.ISP),
        ("Business", Category.BUSINESS),
        ("HOSTING", Category.HOSTING),
        ("edu", Category.EDUCATION),
        ("government", Category.UNKNOWN),
        (None, Category.UNKNOWN),
    ],
)
def test_category_from_label(label, category):
    assert Category.from_label(label) is category


def test_fixture_provider(tmp_path):
    path = tmp_path / "as-info.yml"
    path.write_text("AS64500: isp\n64501: hosting\n", encoding="utf-8")
    provider = FixtureAsInfoProvider.from_file(str(path))

    assert provider.category(64500) is Category.ISP
    assert provider.category("64501") is Category.HOSTING
    with pytest.raises(ProviderError):
        provider.category(1)


class _Response:
    def __init__(self, payload):
        self.payload = payload

    def raise_for_status(self):
        pass

    def json(self):
        return self.payload


class _Session:
    def __init__(self):
        self.calls = []

    def get(self, url, params=None, timeout=None):
        self.calls.append((url, params))
        return _Response({"asn": url.rsplit("/", 1)[-1], "type": "business"})


def test_http_provider_caches():
    session = _Session()
    provider = HttpAsInfoProvider(
        "https://asinfo.example/AS{asn}", token="secret", min_interval=0, session=session
    )

    assert provider.category(64500) is Category.BUSINESS
    assert provider.category(64500) is Category.BUSINESS
    assert session.calls == [("https://asinfo.example/AS64500", {"token": "secret"})]


def _lines(spec):
    out = []
    for text, n in spec:
        out.extend(validate_line(text) for _ in range(n))
    return out


def test_prefix_histogram_filters():
    lines = _lines(
        [
            ("2001:db8::/48,DE,,,", 10),
            ("2001:db8::/47,DE,,,", 5),
            ("2001:db8::/32,US,,,", 4),
            ("2001:db8::/32,FR,,,", 1),
            ("10.0.0.0/24,DE,,,", 7),
            ("bad,DE,,,", 3),
        ]
    )
    hist = prefix_length_histogram(lines, Family.V6, country_min_share=0.1)

    assert hist.total == 20
    assert hist.cells == {("DE", 48): 10, ("US", 32): 4}
    assert hist.argmax_length() == 48
    assert hist.argmax_country() == "DE"
    assert hist.argmax_cell() == ("DE", 48)

    unfiltered = prefix_length_histogram(lines, Family.V6, v6_multiple_of_4=False, country_min_share=0)
    assert unfiltered.cells[("DE", 47)] == 5
    assert unfiltered.cells[("FR", 32)] == 1

    v4 = prefix_length_histogram(lines, Family.V4)
    assert v4.cells == {("DE", 24): 7}
    assert v4.to_dict()["cells"] == [{"country": "DE", "length": 24, "count": 7}]


@pytest.mark.parametrize(
    "rir, top",
    [("AFRINIC", "DE"), ("APNIC", "TH"), ("ARIN", "US"), ("LACNIC", "AR"), ("RIPE", "RU")],
)
def test_country_argmax_per_rir(rir, top):
    lines = _lines([(f"10.0.0.0/24,{top},,,", 5), ("10.0.0.0/24,ZA,,,", 4), ("10.0.0.0/24,,,,", 2)])
    counts = country_prefix_counts(lines)
    assert counts[""] == 2
    assert argmax(counts) == top


def test_argmax_ties_and_empty():
    assert argmax({}) is None
    assert argmax({"US": 3, "DE": 3, "FR": 1}) == "DE"
