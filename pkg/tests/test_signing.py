import datetime
import random

import pytest

from geofeedkit.authchain import simulation
from geofeedkit.authchain.pki import (
    CertificateStore,
    EnvelopeError,
    ExpiredCertificate,
    IssuerKind,
    UnknownCertificate,
    create_trust_anchor,
    generate_identity,
    issue_certificate,
)
from geofeedkit.authchain.signing import (
    FILE_SCOPE,
    ElementStatus,
    EmptyScope,
    ScopeContainsMalformedLine,
    ScopeExceedsAuthorization,
    SignatureScope,
    SignedGeofeedBundle,
    Target,
    TargetOutOfRange,
    canonical_file_bytes,
    canonicalize_scope,
    countersign,
    sign_scope,
    verify_bundle,
)
from geofeedkit.prefix import PrefixSet

AT = datetime.datetime(2024, 3, 1, 12, 0, tzinfo=datetime.timezone.utc)

FILE = simulation.DEMO_FILE
LS = simulation.LS_NETWORKS_SCOPE
HOSTING = simulation.EXAMPLE_HOSTING_SCOPE


def _line_spans(data):
    """(start, end) byte offsets of every line, terminator excluded."""
    spans = []
    start = 0
    for line in data.split(b"\n")[:-1]:
        spans.append((start, start + len(line)))
        start += len(line) + 1
    return spans


SPANS = _line_spans(FILE)
# lines 2-3 belong to LS Networks, 4-5 to Example Hosting
LS_BYTES = range(SPANS[1][0], SPANS[2][1])
HOSTING_BYTES = range(SPANS[3][0], SPANS[4][1])


def _flip(data, offset):
    out = bytearray(data)
    out[offset] ^= 0x01
    return bytes(out)


@pytest.fixture(scope="module")
def fixed_demo():
    return simulation.build_demo(at=AT)


def test_canonicalize_scope():
    out = canonicalize_scope(FILE, LS)
    assert out == (
        b"# scope: 120.1.1.0/24\n"
        b"120.1.1.0/25,US,US-OR,Portland,97209\n"
        b"120.1.1.128/25,US,US-WA,Seattle,98101\n"
    )
    assert canonicalize_scope(out, LS) == out


def test_canonicalize_scope_ignores_line_breaks():
    crlf = FILE.replace(b"\n", b"\r\n")
    assert canonicalize_scope(crlf, HOSTING) == canonicalize_scope(FILE, HOSTING)
    assert canonical_file_bytes(crlf) == canonical_file_bytes(FILE) == FILE


def test_canonicalize_scope_errors():
    with pytest.raises(EmptyScope):
        canonicalize_scope(FILE, PrefixSet(["192.0.2.0/24"]))
    with pytest.raises(ScopeContainsMalformedLine) as e:
        canonicalize_scope(FILE + b"120.1.1.0/26,XQ,,,\n", LS)
    assert e.value.line_numbers == (6,)


@pytest.mark.parametrize("files", [200, pytest.param(1000, marks=pytest.mark.slow)])
def test_canonicalize_scope_is_idempotent_on_random_files(files):
    rng = random.Random(files)
    countries = ["US", "DE", "FR", "", "JP"]
    for _ in range(files):
        lines = []
        for _ in range(rng.randint(1, 12)):
            if rng.random() < 0.2:
                lines.append("# comment")
                continue
            prefix = f"10.{rng.randint(0, 3)}.{rng.randint(0, 255)}.0/24"
            lines.append(f"{prefix},{rng.choice(countries)},,City {rng.randint(0, 9)},")
        lines.append("10.0.0.0/24,US,,,")
        data = ("\r\n" if rng.random() < 0.5 else "\n").join(lines).encode("utf-8")
        scope = PrefixSet(["10.0.0.0/16"])

        once = canonicalize_scope(data, scope)
        assert canonicalize_scope(once, scope) == once


def test_target_json():
    assert Target.from_json("file") == FILE_SCOPE
    assert Target.from_json({"prior": 2}) == Target.prior(2)
    assert Target.prior(2).to_json() == {"prior": 2}
    with pytest.raises(EnvelopeError):
        Target.from_json({"previous": 2})


def test_demo_verifies(fixed_demo):
    report = fixed_demo.verify()

    assert report.all_passed, [e.errors for e in report.elements]
    assert [e.signer_subject for e in report.elements] == [
        "LS Networks",
        "AT&T",
        "Demo CA",
        "Example Hosting",
        "ARIN",
    ]
    assert report.trusted_by(0) == ["AT&T", "Demo CA"]
    assert report.trusted_by(3) == ["ARIN"]
    assert report.trust_level(0) == "Demo CA"
    assert report.trust_level(2) == "Demo CA"
    assert report.countersigners(0) == [1]
    assert all(e.file_unchanged for e in report.elements)


def test_demo_with_random_keys():
    assert simulation.build_demo(seed=None).verify().all_passed


def test_demo_bundle_document(fixed_demo, tmp_path):
    path = tmp_path / "bundle.json"
    fixed_demo.bundle.save(str(path))
    loaded = SignedGeofeedBundle.load(str(path))

    assert loaded.file_bytes == FILE
    assert loaded.chain == fixed_demo.bundle.chain
    assert verify_bundle(loaded, fixed_demo.trust_anchors, fixed_demo.store, at_time=AT).all_passed


def test_detached_bundle_needs_the_file(fixed_demo, tmp_path):
    path = tmp_path / "bundle.json"
    fixed_demo.bundle.save(str(path), embed=False)
    loaded = SignedGeofeedBundle.load(str(path))
    assert loaded.file_bytes is None

    report = verify_bundle(loaded, fixed_demo.trust_anchors, fixed_demo.store, at_time=AT)
    assert not report.all_passed
    assert all("not available" in " ".join(e.errors) for e in report.elements)

    report = verify_bundle(
        loaded, fixed_demo.trust_anchors, fixed_demo.store, at_time=AT, file_bytes=FILE
    )
    assert report.all_passed


def test_other_publishers_lines_may_change(fixed_demo):
    changed = FILE.replace(b"San Jose", b"Oakland!")
    report = fixed_demo.verify(file_bytes=changed)

    statuses = [e.passed for e in report.elements]
    assert statuses == [True, True, True, False, False]
    assert not report.elements[0].file_unchanged


def test_comment_changes_keep_every_element(fixed_demo):
    changed = FILE.replace(b"shared geofeed", b"common geofeed")
    report = fixed_demo.verify(file_bytes=changed)
    assert report.all_passed


def test_every_single_byte_flip(fixed_demo):
    """
    Flipping one byte of a signed line fails exactly the elements covering
    that line; anything else leaves every element passing.
    """
    for offset, byte in enumerate(FILE):
        if byte == 0x0A:
            continue
        report = fixed_demo.verify(file_bytes=_flip(FILE, offset))
        passed = [e.passed for e in report.elements]

        ls_ok = offset not in LS_BYTES
        hosting_ok = offset not in HOSTING_BYTES
        assert passed == [ls_ok, ls_ok, ls_ok, hosting_ok, hosting_ok], offset


@pytest.mark.slow
def test_random_mutations(fixed_demo):
    rng = random.Random(20240301)
    trials = 0
    while trials < 200:
        offset = rng.randrange(len(FILE))
        # printable ASCII keeps the file valid UTF-8 and the line breaks in place
        value = rng.randrange(0x20, 0x7F)
        if FILE[offset] == 0x0A or value == FILE[offset]:
            continue
        data = bytearray(FILE)
        data[offset] = value
        report = fixed_demo.verify(file_bytes=bytes(data))

        passed = [e.passed for e in report.elements]
        assert passed[:3] == [offset not in LS_BYTES] * 3, offset
        assert passed[3:] == [offset not in HOSTING_BYTES] * 2, offset
        trials += 1


def test_disjoint_publishers_are_independent():
    """Tampering one publisher's lines never affects the other's element."""
    rng = random.Random(11)
    demo = simulation.build_demo(at=AT)
    publishers = [(LS_BYTES, 0), (HOSTING_BYTES, 3)]

    for _ in range(60):
        tampered, tampered_index = rng.choice(publishers)
        offset = rng.choice([o for o in tampered if FILE[o] != 0x0A])
        report = demo.verify(file_bytes=_flip(FILE, offset))

        other_index = 3 if tampered_index == 0 else 0
        assert not report.elements[tampered_index].passed
        assert report.elements[other_index].passed


def test_missing_intermediate_fails_path(fixed_demo):
    for name in ("ARIN", "AT&T"):
        store = CertificateStore(fixed_demo.store)
        store.remove(fixed_demo.certificates[name].serial)
        report = fixed_demo.verify(store=store)

        assert not report.elements[0].chain_ok
        assert not report.elements[0].passed
        assert not report.all_passed


def test_expired_certificates_fail(fixed_demo):
    report = fixed_demo.verify(at_time=AT + datetime.timedelta(days=400))
    assert not any(e.passed for e in report.elements)
    assert not any(e.chain_ok for e in report.elements)
    assert all(e.signature_ok for e in report.elements)


def test_unknown_signer(fixed_demo):
    store = CertificateStore(fixed_demo.store)
    store.remove(fixed_demo.certificates["LS Networks"].serial)

    report = fixed_demo.verify(store=store)
    assert report.elements[0].status is ElementStatus.UNKNOWN_SIGNER
    # element 1 still verifies its own signature over element 0
    assert report.elements[1].signature_ok
    assert report.trusted_by(0) == []

    with pytest.raises(UnknownCertificate):
        verify_bundle(
            fixed_demo.bundle, fixed_demo.trust_anchors, store, at_time=AT, strict=True
        )


def test_appending_never_changes_earlier_results(fixed_demo):
    full = fixed_demo.verify()
    for n in range(1, len(fixed_demo.bundle.chain)):
        partial = SignedGeofeedBundle(
            file_url=fixed_demo.bundle.file_url,
            file_bytes=FILE,
            file_digest=fixed_demo.bundle.file_digest,
            chain=fixed_demo.bundle.chain[:n],
        )
        report = verify_bundle(partial, fixed_demo.trust_anchors, fixed_demo.store, at_time=AT)
        assert report.elements == full.elements[:n]


def test_swapped_signature_fails(fixed_demo):
    chain = list(fixed_demo.bundle.chain)
    chain[1], chain[2] = chain[2], chain[1]
    bundle = SignedGeofeedBundle(file_bytes=FILE, chain=tuple(chain))

    report = verify_bundle(bundle, fixed_demo.trust_anchors, fixed_demo.store, at_time=AT)
    assert report.elements[0].passed
    assert not report.elements[1].passed


@pytest.fixture
def signers():
    ids = {n: generate_identity(n, "signing-tests") for n in ("CA", "ISP", "Customer", "RA")}
    ca = create_trust_anchor(ids["CA"], at=AT)
    isp = issue_certificate(ids["CA"], ca, ids["ISP"].verification_key, "ISP", ["120.0.0.0/8"], at=AT)
    customer = issue_certificate(
        ids["ISP"], isp, ids["Customer"].verification_key, "Customer", ["120.1.1.0/24"], at=AT
    )
    ra = issue_certificate(
        ids["CA"], ca, ids["RA"].verification_key, "RA", [], kind=IssuerKind.ATTESTATION, at=AT
    )
    certs = {"CA": ca, "ISP": isp, "Customer": customer, "RA": ra}
    return ids, certs, CertificateStore(certs.values())


def test_sign_scope_must_be_authorized(signers):
    ids, certs, _ = signers
    with pytest.raises(ScopeExceedsAuthorization):
        sign_scope(ids["Customer"], certs["Customer"], FILE, PrefixSet(["120.1.0.0/16"]), AT)


@pytest.mark.parametrize(
    "exc, code",
    [
        (ScopeExceedsAuthorization, 2),
        (TargetOutOfRange, 2),
        (EmptyScope, 2),
        (ScopeContainsMalformedLine, 1),
        (ExpiredCertificate, 1),
    ],
)
def test_exit_codes(exc, code):
    assert exc.exit_code == code


def test_sign_scope_with_expired_certificate(signers):
    ids, certs, _ = signers
    with pytest.raises(ExpiredCertificate):
        sign_scope(ids["Customer"], certs["Customer"], FILE, LS, AT + datetime.timedelta(days=400))


def test_scope_digests(signers):
    ids, certs, _ = signers
    element = sign_scope(ids["Customer"], certs["Customer"], FILE, LS, AT)
    assert element.scope == SignatureScope.compute(FILE, LS)
    assert element.target == FILE_SCOPE
    assert element.signer_serial == certs["Customer"].serial


def test_countersign_rules(signers):
    ids, certs, store = signers
    bundle = SignedGeofeedBundle(file_bytes=FILE).append(
        sign_scope(ids["Customer"], certs["Customer"], FILE, LS, AT)
    )

    with pytest.raises(TargetOutOfRange):
        countersign(ids["ISP"], certs["ISP"], bundle, 1, signing_time=AT)

    other = issue_certificate(
        ids["CA"], certs["CA"], ids["RA"].verification_key, "Other ISP", ["121.0.0.0/8"], at=AT
    )
    with pytest.raises(ScopeExceedsAuthorization):
        countersign(ids["RA"], other, bundle, 0, signing_time=AT)

    bundle = countersign(ids["ISP"], certs["ISP"], bundle, 0, signing_time=AT)
    # attestation issuers vouch without holding the prefixes
    bundle = countersign(ids["RA"], certs["RA"], bundle, Target.prior(1), signing_time=AT)

    report = verify_bundle(bundle, [certs["CA"]], store, at_time=AT)
    assert report.all_passed, [e.errors for e in report.elements]
    assert report.trusted_by(0) == ["ISP", "RA"]


def test_countersign_file_scope(signers):
    ids, certs, store = signers
    bundle = SignedGeofeedBundle(file_bytes=FILE).append(
        sign_scope(ids["Customer"], certs["Customer"], FILE, LS, AT)
    )
    bundle = countersign(
        ids["ISP"], certs["ISP"], bundle, FILE_SCOPE, scope_prefixes=["120.0.0.0/8"], signing_time=AT
    )

    report = verify_bundle(bundle, [certs["CA"]], store, at_time=AT)
    assert report.all_passed
    assert report.elements[1].target == FILE_SCOPE
    assert report.countersigners(0) == []


def test_first_element_must_sign_the_file(signers):
    ids, certs, _ = signers
    element = sign_scope(ids["Customer"], certs["Customer"], FILE, LS, AT)
    bogus = type(element)(
        signer_serial=element.signer_serial,
        scope=element.scope,
        target=Target.prior(0),
        signature=element.signature,
        signing_time=element.signing_time,
    )
    with pytest.raises(TargetOutOfRange):
        SignedGeofeedBundle(file_bytes=FILE).append(bogus)


def test_bundle_from_dict_rejects():
    with pytest.raises(EnvelopeError):
        SignedGeofeedBundle.from_dict({"file_url": "x"})
    with pytest.raises(EnvelopeError):
        SignedGeofeedBundle.from_dict({"file_digest_alg": "md5", "chain": []})
