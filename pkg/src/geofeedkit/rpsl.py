"""
Parsing of RPSL-style registry dumps and discovery of geofeed locators.

A dump is a sequence of objects separated by blank lines. Every object is a
list of ``key: value`` attributes; lines starting with whitespace or ``+``
continue the previous attribute. Only address objects are kept, that is
objects carrying an ``inetnum``, ``inet6num`` or ``NetRange`` attribute.

Geofeed locators are published either in a comment attribute::

    remarks:        Geofeed https://example.com/geofeed.csv

or in a dedicated attribute::

    geofeed:        https://example.com/geofeed.csv

:py:func:`extract_locators` is tolerant and finds every URL announced next to
a ``geofeed`` token, whatever its casing. :py:func:`classify_locator` is where
strictness lives: it grades each locator against the exact publishing
template and the ``https`` requirement.
"""

import enum
import gzip
import io
import ipaddress
import json
import re

from dataclasses import dataclass, field, replace

from . import GeofeedkitError
from .logger import component_logger

log = component_logger(__name__, "RPSL")


class EmptyStream(GeofeedkitError):
    """
    Raised when a dump contains no data at all.
    """


class RangeParseError(GeofeedkitError):
    """
    Raised (or collected) when the address range of an object can't be parsed.
    """

    def __init__(self, record_index, text, reason=""):
        self.record_index = record_index
        self.text = text
        self.reason = reason
        super().__init__(
            f"record {record_index}: invalid address range {text!r}"
            + (f" ({reason})" if reason else "")
        )


class Rir(enum.Enum):
    AFRINIC = "AFRINIC"
    APNIC = "APNIC"
    ARIN = "ARIN"
    LACNIC = "LACNIC"
    RIPE = "RIPE"

    @classmethod
    def from_name(cls, name):
        """
        :param str name: a registry name, case insensitive; ``RIPE NCC`` is accepted
        :rtype: Rir
        """
        key = name.strip().upper().replace(" NCC", "")
        try:
            return cls[key]
        except KeyError:
            raise ValueError(f"unknown RIR {name!r}") from None


class ObjectClass(enum.Enum):
    INETNUM = "inetnum"
    INET6NUM = "inet6num"
    NETRANGE = "netrange"

    @property
    def version(self):
        return 6 if self is ObjectClass.INET6NUM else 4


class SourceAttribute(enum.Enum):
    REMARKS = "remarks"
    GEOFEED_ATTR = "geofeed"


class LocatorVerdict(enum.Enum):
    VALID = "valid"
    INVALID_FORMATTING = "invalid_formatting"
    NOT_HTTPS = "not_https"


CLASS_KEYS = {
    "inetnum": ObjectClass.INETNUM,
    "inet6num": ObjectClass.INET6NUM,
    "netrange": ObjectClass.NETRANGE,
}

# ARIN's bulk format uses ``Comment:`` where the RPSL registries use ``remarks:``
REMARK_KEYS = ("remarks", "comment")
GEOFEED_KEY = "geofeed"
ORIGIN_KEYS = ("origin", "originas")

ATTRIBUTE_RE = re.compile(r"(?P<name>[A-Za-z0-9][A-Za-z0-9_-]*):(?P<value>.*)$")
URL_RE = re.compile(r"[A-Za-z][A-Za-z0-9+.-]*://[^\s<>\"]+")
TOKEN_RE = re.compile(r"\bgeofeed\b", re.IGNORECASE)
ASN_RE = re.compile(r"\s*(?:AS)?([0-9]+)", re.IGNORECASE)


@dataclass(frozen=True)
class IpRange:
    """
    An inclusive address range, both ends of the same IP family.
    """

    start: object
    end: object

    @property
    def version(self):
        return self.start.version

    def __str__(self):
        return f"{self.start} - {self.end}"


@dataclass(frozen=True)
class Attribute:
    """
    One attribute of an object, as written in the dump.

    ``value`` is everything after the colon, including the alignment
    whitespace and continuation lines, so :py:func:`serialize_record` can
    reproduce the input exactly.
    """

    name: str
    value: str

    @property
    def key(self):
        return self.name.lower()

    @property
    def text(self):
        """The value with alignment whitespace removed."""
        return self.value.strip()


@dataclass(frozen=True)
class RpslRecord:
    object_class: ObjectClass
    range: IpRange
    attributes: tuple
    source_rir: Rir
    origin_as: int = None
    index: int = 0

    def values(self, *keys):
        """
        :param keys: lowercase attribute keys
        :return: the stripped values of every attribute with one of ``keys``, in order
        :rtype: list(str)
        """
        return [a.text for a in self.attributes if a.key in keys]

    @property
    def ref(self):
        return RecordRef(
            rir=self.source_rir,
            index=self.index,
            object_class=self.object_class,
            range_start=str(self.range.start),
            range_end=str(self.range.end),
            origin_as=self.origin_as,
        )


@dataclass(frozen=True)
class RecordRef:
    """
    Identity of the record a locator was found in.
    """

    rir: Rir
    index: int
    object_class: ObjectClass
    range_start: str
    range_end: str
    origin_as: int = None


@dataclass(frozen=True)
class GeofeedLocator:
    url: str
    source_attribute: SourceAttribute
    record_ref: RecordRef
    verdict: frozenset = field(default_factory=lambda: frozenset({LocatorVerdict.VALID}))
    conflict: bool = False

    @property
    def is_valid(self):
        return LocatorVerdict.VALID in self.verdict

    def to_dict(self):
        ref = self.record_ref
        return {
            "rir": ref.rir.value,
            "object_class": ref.object_class.value,
            "range_start": ref.range_start,
            "range_end": ref.range_end,
            "record_index": ref.index,
            "origin_as": ref.origin_as,
            "url": self.url,
            "source_attribute": self.source_attribute.value,
            "verdict": sorted(v.value for v in self.verdict),
            "conflict": self.conflict,
        }

    @classmethod
    def from_dict(cls, obj):
        ref = RecordRef(
            rir=Rir(obj["rir"]),
            index=obj.get("record_index", 0),
            object_class=ObjectClass(obj["object_class"]),
            range_start=obj["range_start"],
            range_end=obj["range_end"],
            origin_as=obj.get("origin_as"),
        )
        return cls(
            url=obj["url"],
            source_attribute=SourceAttribute(obj["source_attribute"]),
            record_ref=ref,
            verdict=frozenset(LocatorVerdict(v) for v in obj["verdict"]),
            conflict=obj.get("conflict", False),
        )


def open_dump(path):
    """
    Opens a dump file for reading in binary mode, gunzipping it transparently.

    :param str path: the path of the dump
    :return: a binary file object
    """
    with open(path, "rb") as fp:
        magic = fp.read(2)
    if magic == b"\x1f\x8b":
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_text(stream):
    if isinstance(stream, str):
        return stream
    if isinstance(stream, (bytes, bytearray)):
        data = bytes(stream)
    else:
        data = stream.read()
        if isinstance(data, str):
            return data
    # surrogateescape keeps non UTF-8 bytes (latin-1 dumps) reversible
    return data.decode("utf-8", errors="surrogateescape")


def _iter_blocks(text):
    """
    Yields the attribute lists of each object in the dump.
    """
    attributes = []

    for line in io.StringIO(text):
        line = line.rstrip("\r\n")

        if not line.strip():
            if attributes:
                yield attributes
                attributes = []
            continue

        if line.startswith(("%", "#")):
            continue

        if line[0] in " \t+":
            if attributes:
                last = attributes[-1]
                attributes[-1] = Attribute(last.name, f"{last.value}\n{line}")
            continue

        m = ATTRIBUTE_RE.match(line)
        if m is None:
            log.debug("Ignoring line without attribute key: %r", line)
            continue

        attributes.append(Attribute(m.group("name"), m.group("value")))

    if attributes:
        yield attributes


def parse_range(text):
    """
    Parses the value of an ``inetnum``, ``inet6num`` or ``NetRange`` attribute.

    Both ``first - last`` and ``prefix/length`` notations are accepted.

    :param str text: the attribute value
    :rtype: IpRange
    :raise ValueError: when the range is not valid
    """
    text = text.strip()

    if "/" in text and "-" not in text:
        net = ipaddress.ip_network(text, strict=False)
        return IpRange(net.network_address, net.broadcast_address)

    start, sep, end = text.partition("-")
    if not sep:
        addr = ipaddress.ip_address(text)
        return IpRange(addr, addr)

    start = ipaddress.ip_address(start.strip())
    end = ipaddress.ip_address(end.strip())

    if start.version != end.version:
        raise ValueError("range mixes IPv4 and IPv6 addresses")
    if start > end:
        raise ValueError("range start is greater than range end")

    return IpRange(start, end)


def parse_asn(text):
    """
    :param str text: ``AS64500``, ``as64500`` or ``64500``
    :return: the AS number or ``None``
    :rtype: int
    """
    m = ASN_RE.match(text or "")
    return int(m.group(1)) if m else None


def _build_record(attributes, index, source_rir):
    class_attr = next((a for a in attributes if a.key in CLASS_KEYS), None)
    if class_attr is None:
        return None

    object_class = CLASS_KEYS[class_attr.key]

    try:
        ip_range = parse_range(class_attr.text)
    except ValueError as e:
        raise RangeParseError(index, class_attr.text, str(e)) from None

    if object_class is ObjectClass.NETRANGE and ip_range.version == 6:
        # ARIN publishes IPv6 networks as NetRange too
        object_class = ObjectClass.INET6NUM
    elif object_class.version != ip_range.version:
        raise RangeParseError(
            index, class_attr.text, f"IPv{ip_range.version} range in {class_attr.name}"
        )

    origin = next((a.text for a in attributes if a.key in ORIGIN_KEYS), None)

    return RpslRecord(
        object_class=object_class,
        range=ip_range,
        attributes=tuple(attributes),
        source_rir=source_rir,
        origin_as=parse_asn(origin) if origin else None,
        index=index,
    )


def parse_rpsl_stream(stream, source_rir, strict=False, errors=None):
    """
    Parses a registry dump into address records.

    Objects that are not address objects (``person``, ``organisation``, ...)
    are skipped. An object whose range can't be parsed does not abort the
    stream: the :py:class:`RangeParseError` is logged and appended to
    ``errors``, unless ``strict`` is set.

    :param stream: ``bytes``, ``str`` or a file object (binary or text)
    :param Rir source_rir: the registry the dump comes from
    :param bool strict: raise the first :py:class:`RangeParseError` instead
        of collecting it
    :param list errors: optional list receiving the collected errors
    :return: one record per address object, in file order
    :rtype: list(RpslRecord)
    :raise EmptyStream: when the dump has no content
    :raise RangeParseError: in ``strict`` mode
    """
    if isinstance(source_rir, str):
        source_rir = Rir.from_name(source_rir)

    text = _read_text(stream)
    if not text.strip():
        raise EmptyStream("the RPSL stream is empty")

    records = []
    index = 0

    for attributes in _iter_blocks(text):
        if not any(a.key in CLASS_KEYS for a in attributes):
            continue

        try:
            record = _build_record(attributes, index, source_rir)
        except RangeParseError as e:
            if strict:
                raise
            log.warning("%s", e)
            if errors is not None:
                errors.append(e)
        else:
            records.append(record)
        index += 1

    log.debug("Parsed %d %s records", len(records), source_rir.value)
    return records


def serialize_record(record):
    """
    Renders a record back to dump text.

    For well formed input, ``serialize_record(parse_rpsl_stream(text, rir)[0])``
    reproduces the object's lines exactly (with LF terminators).

    :param RpslRecord record: the record
    :rtype: str
    """
    return "".join(f"{a.name}:{a.value}\n" for a in record.attributes)


_TEMPLATE_PREFIX = {
    SourceAttribute.REMARKS: re.compile(r"^(?:remarks|comment)\s*:\s*", re.IGNORECASE),
    SourceAttribute.GEOFEED_ATTR: re.compile(r"^geofeed\s*:\s*", re.IGNORECASE),
}

_REMARKS_TEMPLATE = re.compile(r"Geofeed\s+(\S+)")


def classify_locator(url, source_attribute, surrounding_text):
    """
    Grades a locator against the publishing rules.

    :param str url: the extracted URL
    :param SourceAttribute source_attribute: where it was found
    :param str surrounding_text: the attribute value, with or without its key
    :return: ``{VALID}`` or the set of failed checks
    :rtype: frozenset(LocatorVerdict)
    """
    text = _TEMPLATE_PREFIX[source_attribute].sub("", surrounding_text.strip(), count=1)

    if source_attribute is SourceAttribute.REMARKS:
        m = _REMARKS_TEMPLATE.fullmatch(text)
        well_formed = m is not None and m.group(1) == url
    else:
        well_formed = text == url

    failures = set()
    if not well_formed:
        failures.add(LocatorVerdict.INVALID_FORMATTING)
    if url.partition("://")[0] != "https":
        failures.add(LocatorVerdict.NOT_HTTPS)

    return frozenset(failures) if failures else frozenset({LocatorVerdict.VALID})


def _mentions_geofeed(value):
    return TOKEN_RE.search(URL_RE.sub(" ", value)) is not None


def extract_locators(record):
    """
    Finds every geofeed locator of a record.

    :param RpslRecord record: the record
    :return: the locators in attribute order, empty when there are none
    :rtype: list(GeofeedLocator)
    """
    found = []

    for attr in record.attributes:
        value = attr.text
        if attr.key in REMARK_KEYS:
            if not _mentions_geofeed(value):
                continue
            kind = SourceAttribute.REMARKS
            urls = URL_RE.findall(value)
        elif attr.key == GEOFEED_KEY:
            kind = SourceAttribute.GEOFEED_ATTR
            urls = URL_RE.findall(value) or value.split()[:1]
        else:
            continue

        for url in urls:
            found.append((url, kind, value))

    if not found:
        return []

    ref = record.ref
    locators = [
        GeofeedLocator(url, kind, ref, classify_locator(url, kind, value))
        for url, kind, value in found
    ]

    if len({loc.source_attribute for loc in locators}) > 1:
        log.info(
            "Record %d (%s) announces geofeeds in remarks and geofeed attributes",
            record.index,
            record.range,
        )
        locators = [replace(loc, conflict=True) for loc in locators]

    return locators


def write_locator_index(locators, fp):
    """
    Writes locators as line delimited JSON.

    :param locators: iterable of :py:class:`GeofeedLocator`
    :param fp: a text file object
    :return: the number of lines written
    :rtype: int
    """
    count = 0
    for loc in locators:
        fp.write(json.dumps(loc.to_dict(), sort_keys=True) + "\n")
        count += 1
    return count


def read_locator_index(fp):
    """
    :param fp: a text file object with line delimited JSON
    :rtype: list(GeofeedLocator)
    """
    return [GeofeedLocator.from_dict(json.loads(line)) for line in fp if line.strip()]
