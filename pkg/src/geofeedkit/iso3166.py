"""
Country and region code checks for geofeed lines.

The ISO 3166-1 alpha-2 list ships with the package (``data/iso3166-1.txt``).
ISO 3166-2 is checked by shape (``CC-XXX``) and by consistency with the
line's country code; a full subdivision list can be plugged in with
:py:meth:`CountryCodes.with_subdivisions` when one is available.
"""

import re

from importlib import resources

REGION_RE = re.compile(r"(?P<country>[A-Z]{2})-[A-Z0-9]{1,3}$")


def _read_code_lines(text):
    return frozenset(
        line.strip()
        for line in text.splitlines()
        if line.strip() and not line.lstrip().startswith("#")
    )


class CountryCodes:
    """
    The code tables used by :py:func:`geofeedkit.geofeed.validate_line`.
    """

    def __init__(self, alpha2, subdivisions=None):
        """
        :param frozenset alpha2: the ISO 3166-1 alpha-2 codes
        :param frozenset subdivisions: optional ISO 3166-2 codes; when ``None``
            only shape and country consistency are checked
        """
        self.alpha2 = frozenset(alpha2)
        self.subdivisions = frozenset(subdivisions) if subdivisions else None

    @classmethod
    def bundled(cls):
        """
        :return: the tables backed by the pinned data file of this package
        :rtype: CountryCodes
        """
        text = (
            resources.files("geofeedkit")
            .joinpath("data")
            .joinpath("iso3166-1.txt")
            .read_text(encoding="utf-8")
        )
        return cls(_read_code_lines(text))

    def with_subdivisions(self, path):
        """
        Returns a copy that also checks region codes against a subdivision list.

        :param str path: a UTF-8 file with one ISO 3166-2 code per line
        :rtype: CountryCodes
        """
        with open(path, encoding="utf-8") as fp:
            return CountryCodes(self.alpha2, _read_code_lines(fp.read()))

    def is_country(self, code):
        return code in self.alpha2

    def is_region(self, code, country=""):
        """
        :param str code: the ``region`` field
        :param str country: the ``alpha2code`` field of the same line, may be empty
        :return: ``True`` if the region is well formed, names a known country
            and agrees with ``country`` when that is present
        :rtype: bool
        """
        m = REGION_RE.match(code)
        if m is None:
            return False

        region_country = m.group("country")
        if country and region_country != country:
            return False
        if region_country not in self.alpha2:
            return False
        if self.subdivisions is not None and code not in self.subdivisions:
            return False

        return True


_default = None


def default_codes():
    """
    :return: a process wide :py:class:`CountryCodes` built from the bundled data
    :rtype: CountryCodes
    """
    global _default
    if _default is None:
        _default = CountryCodes.bundled()
    return _default
