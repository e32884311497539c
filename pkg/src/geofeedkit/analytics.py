"""
Adoption and adherence statistics.

Everything here is a pure aggregation over locator indexes, file reports
and validated lines. Results convert to JSON with ``to_dict`` and to plot
ready CSV rows with ``csv_rows``; :py:func:`write_csv` writes those.
"""

import csv
import enum
import threading
import time

from collections import Counter
from dataclasses import dataclass, field

import requests
import yaml

from . import GeofeedkitError
from .geofeed import FileReport, MalformedReason
from .logger import component_logger
from .prefix import Family
from .rpsl import LocatorVerdict, ObjectClass, Rir

log = component_logger(__name__, "REPORT")

INETNUM = "inetnum"
INET6NUM = "inet6num"

DEFAULT_COUNTRY_MIN_SHARE = 0.05


class MissingTotals(GeofeedkitError):
    """
    Raised when an RIR with geofeed records has no total record counts.
    """

    def __init__(self, rir):
        self.rir = rir
        super().__init__(f"no total record counts for {rir.value}")


def _fraction(part, whole):
    return part / whole if whole else 0.0


def _pct(value):
    return round(value * 100, 2)


def _column(object_class):
    # IPv6 NetRanges are classified as inet6num while parsing
    return INET6NUM if object_class is ObjectClass.INET6NUM else INETNUM


@dataclass(frozen=True)
class RecordTotals:
    """
    Per-RIR record counts, the denominators of the adoption fractions.
    ``denominator`` documents what was counted.
    """

    counts: dict
    denominator: str = ""

    def get(self, rir, column):
        return self.counts[rir][column]

    def __contains__(self, rir):
        return rir in self.counts


def load_totals(path):
    """
    Reads per-RIR totals from YAML::

        denominator: all inetnum and inet6num objects of the bulk dumps
        RIPE: {inetnum: 4149000, inet6num: 854412}
        ARIN: {inetnum: 74728, inet6num: 71034}

    :param str path: the file
    :rtype: RecordTotals
    :raise GeofeedkitError: when the file is malformed
    """
    with open(path, encoding="utf-8") as fp:
        try:
            data = yaml.safe_load(fp) or {}
        except yaml.YAMLError as e:
            raise GeofeedkitError(f"{path}: {e}") from None

    if not isinstance(data, dict):
        raise GeofeedkitError(f"{path}: expected a mapping")

    denominator = str(data.pop("denominator", ""))
    counts = {}
    for name, value in data.items():
        try:
            counts[Rir.from_name(name)] = {
                INETNUM: int(value.get(INETNUM, 0)),
                INET6NUM: int(value.get(INET6NUM, 0)),
            }
        except (ValueError, AttributeError, TypeError) as e:
            raise GeofeedkitError(f"{path}: invalid totals for {name!r}: {e}") from None
    return RecordTotals(counts, denominator)


@dataclass(frozen=True)
class AdoptionRow:
    rir: str
    inetnum_count: int = 0
    inetnum_total: int = 0
    inet6num_count: int = 0
    inet6num_total: int = 0
    as_count: int = 0

    @property
    def inetnum_fraction(self):
        return _fraction(self.inetnum_count, self.inetnum_total)

    @property
    def inet6num_fraction(self):
        return _fraction(self.inet6num_count, self.inet6num_total)

    def to_dict(self):
        return {
            "rir": self.rir,
            "inetnum_count": self.inetnum_count,
            "inetnum_fraction": _pct(self.inetnum_fraction),
            "inet6num_count": self.inet6num_count,
            "inet6num_fraction": _pct(self.inet6num_fraction),
            "as_count": self.as_count,
        }


@dataclass(frozen=True)
class AdoptionTable:
    """
    One row per RIR and a totals row.

    The totals row sums the record counts and denominators. Its ``as_count``
    counts distinct ASes over all RIRs, so an AS with records in two RIRs
    appears in both RIR rows but once in the total.
    """

    rows: tuple
    total: AdoptionRow
    denominator: str = ""

    def row(self, rir):
        return next(r for r in self.rows if r.rir == rir.value)

    def inetnum_share(self, rir):
        """Share of all geofeed-bearing inetnums held by ``rir``."""
        return _fraction(self.row(rir).inetnum_count, self.total.inetnum_count)

    def inet6num_share(self, rir):
        return _fraction(self.row(rir).inet6num_count, self.total.inet6num_count)

    def to_dict(self):
        return {
            "denominator": self.denominator,
            "rows": [
                {
                    **r.to_dict(),
                    "inetnum_share": _pct(self.inetnum_share(Rir(r.rir))),
                    "inet6num_share": _pct(self.inet6num_share(Rir(r.rir))),
                }
                for r in self.rows
            ],
            "total": self.total.to_dict(),
        }

    def csv_rows(self):
        header = list(self.total.to_dict())
        return header, [list(r.to_dict().values()) for r in self.rows + (self.total,)]


def rir_adoption_stats(locators, totals):
    """
    Counts the records carrying at least one locator per RIR and class.

    :param locators: iterable of :py:class:`rpsl.GeofeedLocator`
    :param RecordTotals totals: per-RIR record counts
    :rtype: AdoptionTable
    :raise MissingTotals: when an RIR with records has no totals
    """
    records = {rir: {INETNUM: set(), INET6NUM: set()} for rir in Rir}
    ases = {rir: set() for rir in Rir}

    for loc in locators:
        ref = loc.record_ref
        records[ref.rir][_column(ref.object_class)].add((ref.index, ref.range_start, ref.range_end))
        if ref.origin_as is not None:
            ases[ref.rir].add(ref.origin_as)

    rows = []
    for rir in Rir:
        v4 = len(records[rir][INETNUM])
        v6 = len(records[rir][INET6NUM])
        if rir in totals:
            v4_total, v6_total = totals.get(rir, INETNUM), totals.get(rir, INET6NUM)
        elif v4 or v6:
            raise MissingTotals(rir)
        else:
            v4_total = v6_total = 0
        rows.append(AdoptionRow(rir.value, v4, v4_total, v6, v6_total, len(ases[rir])))

    total = AdoptionRow(
        "Total",
        inetnum_count=sum(r.inetnum_count for r in rows),
        inetnum_total=sum(r.inetnum_total for r in rows),
        inet6num_count=sum(r.inet6num_count for r in rows),
        inet6num_total=sum(r.inet6num_total for r in rows),
        as_count=len(set().union(*ases.values())),
    )
    return AdoptionTable(tuple(rows), total, totals.denominator)


def ases_by_rir(locators):
    """
    :return: the distinct origin ASes of geofeed-bearing records per RIR
    :rtype: dict
    """
    out = {rir: set() for rir in Rir}
    for loc in locators:
        if loc.record_ref.origin_as is not None:
            out[loc.record_ref.rir].add(loc.record_ref.origin_as)
    return {rir: sorted(asns) for rir, asns in out.items()}


class Category(enum.Enum):
    ISP = "ISP"
    BUSINESS = "Business"
    HOSTING = "Hosting"
    EDUCATION = "Education"
    UNKNOWN = "Unknown"

    @classmethod
    def from_label(cls, label):
        """
        :param str label: a provider label like ``isp`` or ``Hosting``
        :return: the category, :py:attr:`UNKNOWN` for anything else
        """
        text = str(label or "").strip().lower()
        for c in cls:
            if c.value.lower() == text:
                return c
        if text == "edu":
            return cls.EDUCATION
        return cls.UNKNOWN


class ProviderError(GeofeedkitError):
    pass


class AsInfoProvider:
    """
    Resolves an AS number to a :py:class:`Category`.
    """

    def category(self, asn):
        """
        :raise ProviderError: when the AS can't be resolved
        """
        raise NotImplementedError


class FixtureAsInfoProvider(AsInfoProvider):
    """
    Categories from a mapping, typically a YAML file ``{asn: category}``.
    ASes missing from the mapping raise :py:class:`ProviderError`.
    """

    def __init__(self, mapping):
        self.mapping = {int(str(k).upper().lstrip("AS")): v for k, v in mapping.items()}

    @classmethod
    def from_file(cls, path):
        with open(path, encoding="utf-8") as fp:
            try:
                return cls(yaml.safe_load(fp) or {})
            except (yaml.YAMLError, ValueError, AttributeError) as e:
                raise GeofeedkitError(f"{path}: {e}") from None

    def category(self, asn):
        try:
            return Category.from_label(self.mapping[int(asn)])
        except KeyError:
            raise ProviderError(f"AS{asn} not in the fixture") from None


class HttpAsInfoProvider(AsInfoProvider):
    """
    Categories from a per-AS info endpoint.

    ``endpoint`` is a URL template with an ``{asn}`` placeholder, the
    response a JSON object whose ``type`` is one of ``isp``, ``business``,
    ``hosting`` or ``education`` (the ipinfo.io ASN API layout). Answers are
    cached and requests are spaced by at least ``min_interval`` seconds.
    """

    def __init__(self, endpoint, token=None, timeout=10.0, min_interval=0.2, session=None):
        self.endpoint = endpoint
        self.token = token
        self.timeout = timeout
        self.min_interval = min_interval
        self.session = session or requests.Session()
        self._cache = {}
        self._lock = threading.Lock()
        self._last = 0.0

    def _wait(self):
        with self._lock:
            delay = self._last + self.min_interval - time.monotonic()
            if delay > 0:
                time.sleep(delay)
            self._last = time.monotonic()

    def category(self, asn):
        asn = int(asn)
        if asn in self._cache:
            return self._cache[asn]

        self._wait()
        url = self.endpoint.format(asn=asn)
        params = {"token": self.token} if self.token else None
        try:
            resp = self.session.get(url, params=params, timeout=self.timeout)
            resp.raise_for_status()
            label = resp.json().get("type")
        except (requests.RequestException, ValueError, AttributeError) as e:
            raise ProviderError(f"AS{asn}: {e}") from None

        self._cache[asn] = Category.from_label(label)
        return self._cache[asn]


@dataclass(frozen=True)
class CategoryBreakdown:
    per_rir: dict

    def overall(self):
        total = Counter({c: 0 for c in Category})
        for counts in self.per_rir.values():
            total.update(counts)
        return total

    def ranking(self):
        """
        :return: the categories ordered by overall AS count, largest first
        :rtype: list(Category)
        """
        overall = self.overall()
        return sorted(Category, key=lambda c: (-overall[c], list(Category).index(c)))

    def to_dict(self):
        return {
            rir.value: {c.value: counts[c] for c in Category} for rir, counts in self.per_rir.items()
        }

    def csv_rows(self):
        rows = [
            [rir.value, c.value, counts[c]] for rir, counts in self.per_rir.items() for c in Category
        ]
        return ["rir", "category", "as_count"], rows


def as_category_breakdown(ases, provider):
    """
    Categorizes the ASes of every RIR.

    Provider failures count as :py:attr:`Category.UNKNOWN`.

    :param dict ases: RIR to iterable of AS numbers
    :param AsInfoProvider provider: the category source
    :rtype: CategoryBreakdown
    """
    per_rir = {}
    for rir, asns in ases.items():
        counts = Counter({c: 0 for c in Category})
        for asn in asns:
            try:
                category = provider.category(asn)
            except Exception as e:
                log.warning("Can't categorize AS%s: %s", asn, e)
                category = Category.UNKNOWN
            counts[category] += 1
        per_rir[rir] = counts
    return CategoryBreakdown(per_rir)


@dataclass(frozen=True)
class Rfc9092Summary:
    """
    Locator formatting adherence.

    ``records`` counts inet[6]nums by the union of their locators' verdicts,
    ``locators`` counts every locator. Failure tags may co-occur, so a
    record can be both invalidly formatted and not https.
    """

    records: dict
    locators: dict
    total_records: int = 0
    total_locators: int = 0
    conflicts: int = 0

    def fraction(self, verdict):
        return _fraction(self.records[verdict], self.total_records)

    @property
    def not_https_fraction(self):
        return self.fraction(LocatorVerdict.NOT_HTTPS)

    def to_dict(self):
        return {
            "total_records": self.total_records,
            "total_locators": self.total_locators,
            "conflicts": self.conflicts,
            "records": {v.value: self.records[v] for v in LocatorVerdict},
            "record_fractions": {v.value: _pct(self.fraction(v)) for v in LocatorVerdict},
            "locators": {v.value: self.locators[v] for v in LocatorVerdict},
        }

    def csv_rows(self):
        return ["verdict", "records", "fraction", "locators"], [
            [v.value, self.records[v], _pct(self.fraction(v)), self.locators[v]]
            for v in LocatorVerdict
        ]


@dataclass(frozen=True)
class Rfc8805Summary:
    files: int
    lines: FileReport
    utf8_files: int = 0
    crlf_files: int = 0

    @property
    def valid_fraction(self):
        return _fraction(self.lines.valid, self.lines.total)

    @property
    def malformed_fraction(self):
        return _fraction(self.lines.malformed, self.lines.total)

    @property
    def crlf_fraction(self):
        return _fraction(self.crlf_files, self.files)

    @property
    def utf8_fraction(self):
        return _fraction(self.utf8_files, self.files)

    def to_dict(self):
        lines = self.lines.to_dict()
        del lines["url"], lines["digest"], lines["encoding_ok"], lines["crlf_ok"]
        return {
            "files": self.files,
            "utf8_files": self.utf8_files,
            "utf8_fraction": _pct(self.utf8_fraction),
            "crlf_files": self.crlf_files,
            "crlf_fraction": _pct(self.crlf_fraction),
            "valid_fraction": _pct(self.valid_fraction),
            "malformed_fraction": _pct(self.malformed_fraction),
            **lines,
        }

    def csv_rows(self):
        return ["reason", "lines", "primary_lines"], [
            [r.value, self.lines.reasons[r], self.lines.primary_reasons[r]] for r in MalformedReason
        ]


def _record_key(ref):
    return (ref.rir, ref.object_class, ref.index, ref.range_start, ref.range_end)


def rfc9092_summary(locators):
    """
    :param locators: iterable of :py:class:`rpsl.GeofeedLocator`
    :rtype: Rfc9092Summary
    """
    per_locator = Counter({v: 0 for v in LocatorVerdict})
    verdicts = {}
    conflicts = set()
    total_locators = 0

    for loc in locators:
        total_locators += 1
        per_locator.update(loc.verdict)
        key = _record_key(loc.record_ref)
        verdicts.setdefault(key, set()).update(loc.verdict - {LocatorVerdict.VALID})
        if loc.conflict:
            conflicts.add(key)

    per_record = Counter({v: 0 for v in LocatorVerdict})
    for failures in verdicts.values():
        per_record.update(failures or {LocatorVerdict.VALID})

    return Rfc9092Summary(
        records=per_record,
        locators=per_locator,
        total_records=len(verdicts),
        total_locators=total_locators,
        conflicts=len(conflicts),
    )


def rfc8805_summary(file_reports):
    """
    :param file_reports: iterable of :py:class:`geofeed.FileReport`
    :rtype: Rfc8805Summary
    """
    agg = FileReport(url="")
    files = utf8 = crlf = 0
    for report in file_reports:
        files += 1
        utf8 += report.encoding_ok
        crlf += report.crlf_ok
        agg.total += report.total
        agg.valid += report.valid
        agg.malformed += report.malformed
        agg.reasons.update(report.reasons)
        agg.primary_reasons.update(report.primary_reasons)
        agg.extra_field_lines += report.extra_field_lines
    return Rfc8805Summary(files=files, lines=agg, utf8_files=utf8, crlf_files=crlf)


def rfc_adherence_summaries(locators, file_reports):
    """
    :return: the locator and file adherence summaries
    :rtype: tuple(Rfc9092Summary, Rfc8805Summary)
    """
    return rfc9092_summary(locators), rfc8805_summary(file_reports)


@dataclass(frozen=True)
class PrefixHistogram:
    family: Family
    cells: dict
    filters: dict = field(default_factory=dict)
    total: int = 0

    def lengths(self):
        out = Counter()
        for (_, length), count in self.cells.items():
            out[length] += count
        return out

    def countries(self):
        out = Counter()
        for (country, _), count in self.cells.items():
            out[country] += count
        return out

    def argmax_length(self):
        return argmax(self.lengths())

    def argmax_country(self):
        return argmax(self.countries())

    def argmax_cell(self):
        """:return: the ``(country, length)`` cell with the most prefixes"""
        return argmax(Counter(self.cells))

    def to_dict(self):
        return {
            "family": int(self.family),
            "filters": self.filters,
            "total": self.total,
            "cells": [
                {"country": c, "length": length, "count": n}
                for (c, length), n in sorted(self.cells.items())
            ],
        }

    def csv_rows(self):
        return ["country", "length", "count"], [
            [c, length, n] for (c, length), n in sorted(self.cells.items())
        ]


def argmax(counter):
    if not counter:
        return None
    # ties resolve to the smallest key
    return min(counter, key=lambda k: (-counter[k], k))


def prefix_length_histogram(
    lines,
    family,
    v6_multiple_of_4=True,
    country_min_share=DEFAULT_COUNTRY_MIN_SHARE,
    share_total=None,
):
    """
    Counts prefixes per country and prefix length.

    :param lines: iterable of :py:class:`geofeed.GeofeedLine`, invalid lines are skipped
    :param prefix.Family family: the address family to count
    :param bool v6_multiple_of_4: for IPv6, keep only lengths divisible by 4
    :param float country_min_share: keep only countries with at least this
        share of ``share_total``, 0 disables the filter
    :param int share_total: the count shares are taken of, by default the
        number of valid lines of ``family``; pass the RIR's total when
        ``lines`` are one RIR's
    :rtype: PrefixHistogram
    """
    family = Family(family)
    raw = Counter()
    for line in lines:
        if line.is_valid and line.ip_prefix.family is family:
            raw[(line.alpha2code, line.ip_prefix.length)] += 1

    total = sum(raw.values())
    share_total = total if share_total is None else share_total
    apply_v6 = v6_multiple_of_4 and family is Family.V6

    countries = Counter()
    for (country, _), n in raw.items():
        countries[country] += n
    kept = {
        c for c, n in countries.items() if not country_min_share or _fraction(n, share_total) >= country_min_share
    }

    cells = {
        (country, length): n
        for (country, length), n in raw.items()
        if country in kept and not (apply_v6 and length % 4)
    }
    return PrefixHistogram(
        family=family,
        cells=cells,
        filters={"v6_lengths_multiple_of_4": apply_v6, "country_min_share": country_min_share},
        total=total,
    )


def country_prefix_counts(lines):
    """
    Counts valid lines per country. Lines without a country are counted
    under ``""``.

    :rtype: collections.Counter
    """
    return Counter(line.alpha2code for line in lines if line.is_valid)


def write_csv(path, header, rows):
    """
    Writes UTF-8 CSV with LF line ends.
    """
    with open(path, "w", encoding="utf-8", newline="") as fp:
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
