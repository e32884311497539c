"""
IP prefixes and prefix sets.

:py:func:`parse_prefix` implements the strict ``ip_prefix`` grammar used when
grading geofeed lines: a bare address is a host prefix, CIDR notation must not
have host bits set below the mask and nothing is repaired silently.

:py:class:`PrefixSet` is the coverage object used by certificates and
signature scopes. It is built on :py:class:`netaddr.IPSet`, which merges
overlapping and adjacent members, so two sets covering the same addresses
always render identically.
"""

import enum
import ipaddress
import re

from dataclasses import dataclass

import netaddr

from . import GeofeedkitError


class MalformedIpPrefix(GeofeedkitError, ValueError):
    """
    Raised when a string is not a single IP address nor a strict CIDR prefix.
    """


class Family(enum.IntEnum):
    V4 = 4
    V6 = 6

    @property
    def bits(self):
        return 32 if self is Family.V4 else 128


_LENGTH_RE = re.compile(r"0|[1-9][0-9]{0,2}")


@dataclass(frozen=True, order=True)
class Prefix:
    """
    A canonical IP prefix. Ordering is ``(family, base, length)``.
    """

    family: Family
    base: int
    length: int

    def __post_init__(self):
        if not 0 <= self.length <= self.family.bits:
            raise MalformedIpPrefix(
                f"prefix length {self.length} out of range for IPv{int(self.family)}"
            )
        host_bits = self.family.bits - self.length
        if self.base & ((1 << host_bits) - 1):
            raise MalformedIpPrefix(f"host bits set in {self.base:#x}/{self.length}")

    @property
    def network(self):
        """
        :rtype: ipaddress.IPv4Network or ipaddress.IPv6Network
        """
        cls = ipaddress.IPv4Network if self.family is Family.V4 else ipaddress.IPv6Network
        return cls((self.base, self.length))

    @property
    def base_address(self):
        return self.network.network_address

    @property
    def last(self):
        """The highest address of the prefix, as an integer."""
        return self.base | ((1 << (self.family.bits - self.length)) - 1)

    def contains(self, other):
        """
        :param Prefix other: another prefix
        :return: ``True`` if ``other`` is equal to or more specific than ``self``
        :rtype: bool
        """
        return (
            self.family == other.family
            and self.length <= other.length
            and self.base <= other.base
            and other.last <= self.last
        )

    def to_netaddr(self):
        return netaddr.IPNetwork(str(self))

    @classmethod
    def from_network(cls, network):
        family = Family.V4 if network.version == 4 else Family.V6
        return cls(family, int(network.network_address), network.prefixlen)

    def __str__(self):
        return render_prefix(self)


def parse_prefix(text):
    """
    Parses a single IP address or a prefix in CIDR notation.

    :param str text: the text, no surrounding whitespace allowed
    :return: the canonical prefix; bare addresses get length 32 or 128
    :rtype: Prefix
    :raise MalformedIpPrefix: for empty strings, bad octets or groups,
        lengths out of range, netmask notation or host bits set below the mask
    """
    if not text:
        raise MalformedIpPrefix("empty ip_prefix")

    if text != text.strip() or "%" in text:
        raise MalformedIpPrefix(f"{text!r} is not an IP prefix")

    address, sep, length = text.partition("/")
    if sep and not _LENGTH_RE.fullmatch(length):
        raise MalformedIpPrefix(f"{text!r} has an invalid prefix length")

    try:
        addr = ipaddress.ip_address(address)
    except ValueError as e:
        raise MalformedIpPrefix(f"{text!r}: {e}") from None

    family = Family.V4 if addr.version == 4 else Family.V6
    length = int(length) if sep else family.bits

    return Prefix(family, int(addr), length)


def render_prefix(prefix):
    """
    :param Prefix prefix: a prefix
    :return: ``address/length``, compressed form for IPv6
    :rtype: str
    """
    cls = ipaddress.IPv4Address if prefix.family is Family.V4 else ipaddress.IPv6Address
    return f"{cls(prefix.base)}/{prefix.length}"


def range_to_prefixes(start, end):
    """
    Splits an inclusive address range into the minimal list of prefixes.

    :param start: first address (``ipaddress`` object)
    :param end: last address (``ipaddress`` object)
    :rtype: list(Prefix)
    """
    return [
        Prefix.from_network(ipaddress.ip_network(str(cidr)))
        for cidr in netaddr.iprange_to_cidrs(str(start), str(end))
    ]


class PrefixSet:
    """
    A canonical, sorted, non-overlapping collection of prefixes.

    Overlapping and adjacent members are merged at construction, so no member
    contains another and equality is equality of covered address space.
    """

    __slots__ = ("_ipset", "_prefixes")

    def __init__(self, prefixes=()):
        """
        :param prefixes: an iterable of :py:class:`Prefix` objects or
            strings accepted by :py:func:`parse_prefix`
        """
        members = [p if isinstance(p, Prefix) else parse_prefix(p) for p in prefixes]
        self._ipset = netaddr.IPSet(m.to_netaddr() for m in members)
        self._prefixes = tuple(
            sorted(
                Prefix.from_network(ipaddress.ip_network(str(cidr)))
                for cidr in self._ipset.iter_cidrs()
            )
        )

    @property
    def prefixes(self):
        return self._prefixes

    def __iter__(self):
        return iter(self._prefixes)

    def __len__(self):
        return len(self._prefixes)

    def __bool__(self):
        return bool(self._prefixes)

    def __eq__(self, other):
        if not isinstance(other, PrefixSet):
            return NotImplemented
        return self._prefixes == other._prefixes

    def __hash__(self):
        return hash(self._prefixes)

    def __repr__(self):
        return f"PrefixSet([{', '.join(repr(str(p)) for p in self._prefixes)}])"

    def contains_address(self, address):
        """
        :param address: an address as string, ``ipaddress`` object
            or ``netaddr.IPAddress``
        :rtype: bool
        """
        return netaddr.IPAddress(str(address)) in self._ipset

    def contains(self, prefix):
        """
        :param Prefix prefix: a prefix
        :return: ``True`` if every address of ``prefix`` is in the set
        :rtype: bool
        """
        return prefix.to_netaddr() in self._ipset

    def issubset(self, other):
        """
        :param PrefixSet other: the candidate superset
        :rtype: bool
        """
        return self._ipset.issubset(other._ipset)

    def union(self, other):
        return PrefixSet(list(self) + list(other))

    def render(self):
        """
        :return: the canonical space separated rendering, e.g. ``"10.0.0.0/8 2001:db8::/32"``
        :rtype: str
        """
        return " ".join(render_prefix(p) for p in self._prefixes)

    def to_list(self):
        return [render_prefix(p) for p in self._prefixes]
