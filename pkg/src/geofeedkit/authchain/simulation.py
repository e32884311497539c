"""
Ready-made certificate hierarchies for demonstrations and benchmarks.

:py:func:`build_demo` sets up a CA vouching for a registry (ARIN holding
``120.0.0.0/8``) which delegates to an ISP (AT&T), which leases
``120.1.1.0/24`` to LS Networks. LS Networks signs its lines of a geofeed
file it shares with a second publisher, AT&T and the CA countersign on top.

:py:func:`run_benchmark` issues, signs and verifies many leaf publishers
under a hierarchy of configurable depth.
"""

import datetime
import time

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .. import GeofeedkitError
from ..logger import component_logger
from ..prefix import PrefixSet
from .pki import (
    CertificateStore,
    IssuerKind,
    create_trust_anchor,
    generate_identity,
    issue_certificate,
    utcnow,
)
from .signing import FILE_SCOPE, SignedGeofeedBundle, countersign, sign_scope, verify_bundle

log = component_logger(__name__, "AUTH")

DEMO_SEED = "geofeedkit-demo"

DEMO_FILE = (
    b"# shared geofeed of LS Networks and Example Hosting\n"
    b"120.1.1.0/25,US,US-OR,Portland,97209\n"
    b"120.1.1.128/25,US,US-WA,Seattle,98101\n"
    b"2001:db8:200::/48,US,US-CA,Los Angeles,90012\n"
    b"2001:db8:201::/48,US,US-CA,San Jose,95113\n"
)

LS_NETWORKS_SCOPE = PrefixSet(["120.1.1.0/24"])
EXAMPLE_HOSTING_SCOPE = PrefixSet(["2001:db8:200::/40"])

# leaves get consecutive /24s of this network
BENCH_NETWORK = "10.0.0.0/8"
BENCH_MAX_CERTS = 1 << 16


class BenchmarkError(GeofeedkitError):
    pass


@dataclass
class DemoScenario:
    identities: dict
    certificates: dict
    store: CertificateStore
    trust_anchors: tuple
    file_bytes: bytes
    bundle: SignedGeofeedBundle
    at: datetime.datetime

    def verify(self, at_time=None, file_bytes=None, store=None):
        """
        :return: the verification report of the demo bundle
        :rtype: signing.VerificationReport
        """
        return verify_bundle(
            self.bundle,
            self.trust_anchors,
            self.store if store is None else store,
            at_time=at_time or self.at,
            file_bytes=self.file_bytes if file_bytes is None else file_bytes,
        )


def build_demo(seed=DEMO_SEED, at=None, file_bytes=DEMO_FILE):
    """
    Builds the demo hierarchy and signature chain.

    The chain holds five elements:

    0. LS Networks signs ``120.1.1.0/24``
    1. AT&T countersigns element 0
    2. the CA countersigns element 1
    3. Example Hosting signs ``2001:db8:200::/40``
    4. ARIN countersigns element 3

    :param seed: key seed, ``None`` for random keys
    :param datetime.datetime at: issuance and signing time, now by default
    :param bytes file_bytes: the shared geofeed file
    :rtype: DemoScenario
    """
    at = at or utcnow()
    validity = (at - datetime.timedelta(days=1), at + datetime.timedelta(days=365))

    names = ["Demo CA", "ARIN", "AT&T", "LS Networks", "Example Hosting"]
    ids = {name: generate_identity(name, seed) for name in names}
    certs = {}

    certs["Demo CA"] = create_trust_anchor(
        ids["Demo CA"], validity=validity, kind=IssuerKind.ATTESTATION, at=at
    )

    def issue(issuer, subject, prefixes):
        certs[subject] = issue_certificate(
            ids[issuer],
            certs[issuer],
            ids[subject].verification_key,
            subject,
            prefixes,
            validity=validity,
            at=at,
        )

    issue("Demo CA", "ARIN", ["120.0.0.0/8", "2001:db8::/32"])
    issue("ARIN", "AT&T", ["120.0.0.0/8"])
    issue("AT&T", "LS Networks", LS_NETWORKS_SCOPE)
    issue("ARIN", "Example Hosting", EXAMPLE_HOSTING_SCOPE)

    bundle = SignedGeofeedBundle(file_url="https://geofeed.example/shared.csv", file_bytes=file_bytes)
    bundle = bundle.append(
        sign_scope(ids["LS Networks"], certs["LS Networks"], file_bytes, LS_NETWORKS_SCOPE, at)
    )
    bundle = countersign(ids["AT&T"], certs["AT&T"], bundle, 0, signing_time=at)
    bundle = countersign(ids["Demo CA"], certs["Demo CA"], bundle, 1, signing_time=at)
    bundle = countersign(
        ids["Example Hosting"],
        certs["Example Hosting"],
        bundle,
        FILE_SCOPE,
        scope_prefixes=EXAMPLE_HOSTING_SCOPE,
        signing_time=at,
    )
    bundle = countersign(ids["ARIN"], certs["ARIN"], bundle, 3, signing_time=at)

    return DemoScenario(
        identities=ids,
        certificates=certs,
        store=CertificateStore(certs.values()),
        trust_anchors=(certs["Demo CA"],),
        file_bytes=file_bytes,
        bundle=bundle,
        at=at,
    )


@dataclass
class BenchmarkReport:
    certs: int
    depth: int
    issue_seconds: float = 0.0
    sign_seconds: float = 0.0
    verify_seconds: float = 0.0
    passed: int = 0
    failures: list = field(default_factory=list)

    @property
    def total_seconds(self):
        return self.issue_seconds + self.sign_seconds + self.verify_seconds

    @property
    def all_passed(self):
        return self.passed == self.certs

    def to_dict(self):
        return {
            "certs": self.certs,
            "depth": self.depth,
            "issue_seconds": round(self.issue_seconds, 3),
            "sign_seconds": round(self.sign_seconds, 3),
            "verify_seconds": round(self.verify_seconds, 3),
            "total_seconds": round(self.total_seconds, 3),
            "passed": self.passed,
            "failures": self.failures,
        }


def _leaf_prefix(index):
    return f"10.{index >> 8}.{index & 0xFF}.0/24"


def _leaf_file(index):
    a, b = index >> 8, index & 0xFF
    return (
        f"10.{a}.{b}.0/25,US,,,\n"
        f"10.{a}.{b}.128/25,US,,,\n"
    ).encode("ascii")


def run_benchmark(certs, depth, seed=None, workers=1, at=None):
    """
    Issues ``certs`` leaf certificates under a hierarchy of ``depth``
    levels, lets every leaf sign its own file and verifies every bundle.

    With ``depth`` 1 the root issues the leaves directly, every further
    level adds an intermediate registry holding ``10.0.0.0/8``.

    :param int certs: number of leaf publishers, 1 to 65536
    :param int depth: issuing levels above the leaves, at least 1
    :param seed: key seed, ``None`` for random keys
    :param int workers: verification threads
    :param datetime.datetime at: issuance, signing and verification time
    :rtype: BenchmarkReport
    :raise BenchmarkError: for out of range parameters
    """
    if not 1 <= certs <= BENCH_MAX_CERTS:
        raise BenchmarkError(f"certs must be between 1 and {BENCH_MAX_CERTS}, got {certs}")
    if depth < 1:
        raise BenchmarkError(f"depth must be at least 1, got {depth}")

    at = at or utcnow()
    validity = (at - datetime.timedelta(days=1), at + datetime.timedelta(days=30))
    report = BenchmarkReport(certs=certs, depth=depth)

    started = time.perf_counter()
    root_id = generate_identity("Bench Root", seed)
    root = create_trust_anchor(root_id, validity=validity, at=at)
    store = CertificateStore([root])

    issuer_id, issuer = root_id, root
    for level in range(1, depth):
        name = f"Registry {level}"
        ident = generate_identity(name, seed)
        cert = issue_certificate(
            issuer_id, issuer, ident.verification_key, name, [BENCH_NETWORK], validity=validity, at=at
        )
        store.add(cert)
        issuer_id, issuer = ident, cert

    leaves = []
    for i in range(certs):
        name = f"Publisher {i}"
        ident = generate_identity(name, seed)
        cert = issue_certificate(
            issuer_id, issuer, ident.verification_key, name, [_leaf_prefix(i)], validity=validity, at=at
        )
        store.add(cert)
        leaves.append((ident, cert))
    report.issue_seconds = time.perf_counter() - started

    started = time.perf_counter()
    bundles = []
    for i, (ident, cert) in enumerate(leaves):
        file_bytes = _leaf_file(i)
        element = sign_scope(ident, cert, file_bytes, cert.authorized_prefixes, at)
        bundles.append(SignedGeofeedBundle(file_bytes=file_bytes).append(element))
    report.sign_seconds = time.perf_counter() - started

    started = time.perf_counter()

    def verify(bundle):
        return verify_bundle(bundle, [root], store, at_time=at)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(verify, bundles))
    report.verify_seconds = time.perf_counter() - started

    for i, result in enumerate(results):
        if result.all_passed:
            report.passed += 1
        else:
            report.failures.append({"publisher": i, "errors": list(result.elements[0].errors)})

    log.info(
        "Benchmark of %d certificates at depth %d: %.2fs, %d passed",
        certs,
        depth,
        report.total_seconds,
        report.passed,
    )
    return report
