import datetime

import pytest

from geofeedkit.authchain.simulation import BenchmarkError, build_demo, run_benchmark

AT = datetime.datetime(2024, 3, 1, 12, 0, tzinfo=datetime.timezone.utc)


def test_demo_is_reproducible():
    a = build_demo(at=AT)
    b = build_demo(at=AT)
    assert a.bundle.to_dict() == b.bundle.to_dict()
    assert [c.serial for c in a.store] == [c.serial for c in b.store]


def test_demo_hierarchy():
    demo = build_demo(at=AT)
    certs = demo.certificates

    assert demo.trust_anchors == (certs["Demo CA"],)
    assert certs["LS Networks"].issuer_serial == certs["AT&T"].serial
    assert certs["AT&T"].issuer_serial == certs["ARIN"].serial
    assert certs["Example Hosting"].issuer_serial == certs["ARIN"].serial
    assert len(demo.bundle.chain) == 5


@pytest.mark.parametrize("certs, depth", [(1, 1), (5, 2), (3, 4)])
def test_benchmark(certs, depth):
    report = run_benchmark(certs, depth, seed="bench", at=AT)

    assert report.all_passed, report.failures
    assert report.passed == certs
    assert report.to_dict()["depth"] == depth
    assert report.total_seconds >= 0


def test_benchmark_with_workers():
    report = run_benchmark(20, 2, workers=4, at=AT)
    assert report.all_passed


@pytest.mark.parametrize("certs, depth", [(0, 1), (65537, 1), (1, 0)])
def test_benchmark_rejects(certs, depth):
    with pytest.raises(BenchmarkError):
        run_benchmark(certs, depth)


@pytest.mark.slow
def test_benchmark_large():
    report = run_benchmark(1800, 3, seed="bench", workers=4)
    assert report.all_passed
    assert report.passed == 1800
