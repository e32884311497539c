import pytest

from geofeedkit.iso3166 import CountryCodes, default_codes


@pytest.fixture
def codes():
    return default_codes()


@pytest.mark.parametrize("code", ["US", "DE", "TH", "AR", "RU", "ZA", "AQ"])
def test_assigned_countries(codes, code):
    assert codes.is_country(code)


@pytest.mark.parametrize("code", ["UK", "EU", "ZZ", "XA", "us", "USA", ""])
def test_unassigned_countries(codes, code):
    assert not codes.is_country(code)


def test_bundled_table_size():
    assert len(CountryCodes.bundled().alpha2) == 249


def test_default_codes_is_cached():
    assert default_codes() is default_codes()


@pytest.mark.parametrize(
    "region, country, ok",
    [
        ("US-CA", "US", True),
        ("US-CA", "", True),
        ("GB-LND", "GB", True),
        ("FR-75", "FR", True),
        ("US-CA", "CA", False),
        ("ZZ-AB", "", False),
        ("US-ABCD", "US", False),
        ("US_CA", "US", False),
        ("us-ca", "US", False),
        ("California", "US", False),
    ],
)
def test_is_region(codes, region, country, ok):
    assert codes.is_region(region, country) is ok


def test_with_subdivisions(codes, tmp_path):
    path = tmp_path / "subdivisions.txt"
    path.write_text("# ISO 3166-2\nUS-CA\nUS-OR\n\nUS-WA\n", encoding="utf-8")

    strict = codes.with_subdivisions(str(path))
    assert strict.subdivisions == {"US-CA", "US-OR", "US-WA"}
    assert strict.is_region("US-OR", "US")
    assert not strict.is_region("US-TX", "US")
    assert codes.is_region("US-TX", "US")
