"""
Decoding and validation of geofeed CSV files.

A geofeed line has five comma separated fields::

    ip_prefix,alpha2code,region,city,postal_code

Every field but ``ip_prefix`` may be empty, the commas must be there anyway.
Fields are taken literally: no whitespace is trimmed and nothing is repaired,
since the point is to grade what publishers actually wrote.

Decoding never fails. Encoding and line break problems are recorded as flags
on :py:class:`GeofeedFile` and line problems as reasons on
:py:class:`GeofeedLine`; :py:func:`validate_file` turns those into a
:py:class:`FileReport`.
"""

import enum
import hashlib
import re

from collections import Counter
from dataclasses import dataclass, field

from .iso3166 import default_codes
from .logger import component_logger
from .prefix import MalformedIpPrefix, parse_prefix

log = component_logger(__name__, "VALIDATE")

FIELD_COUNT = 5

_BARE_TERMINATOR_RE = re.compile(rb"\r(?!\n)|(?<!\r)\n")
_LINE_SPLIT_RE = re.compile(r"\r\n|\r|\n")


class MalformedReason(enum.Enum):
    NOT_ENOUGH_FIELDS = "not_enough_fields"
    MALFORMED_IP_PREFIX = "malformed_ip_prefix"
    MALFORMED_COUNTRY_CODE = "malformed_country_code"
    MALFORMED_REGION_CODE = "malformed_region_code"


# precedence used when a malformed line is attributed to a single reason
REASON_ORDER = tuple(MalformedReason)


class LineNote(enum.Enum):
    EXTRA_FIELDS = "extra_fields"


@dataclass(frozen=True)
class GeofeedLine:
    """
    One data line. ``reasons`` is empty exactly when the line is valid.
    """

    line_number: int
    text: str
    ip_prefix: object = None
    alpha2code: str = None
    region: str = None
    city: str = None
    postal_code: str = None
    reasons: frozenset = frozenset()
    notes: frozenset = frozenset()

    @property
    def is_valid(self):
        return not self.reasons

    @property
    def primary_reason(self):
        """
        :return: the first failed check in :py:data:`REASON_ORDER`, ``None`` if valid
        """
        return next((r for r in REASON_ORDER if r in self.reasons), None)


@dataclass(frozen=True)
class GeofeedFile:
    source_url: str
    raw_bytes_digest: str
    encoding_ok: bool
    crlf_ok: bool
    lines: tuple
    comment_count: int = 0
    blank_count: int = 0

    @property
    def physical_line_count(self):
        return self.comment_count + self.blank_count + len(self.lines)

    def valid_lines(self):
        return [line for line in self.lines if line.is_valid]


def _field(fields, idx):
    return fields[idx] if len(fields) > idx else None


def validate_line(fields_text, line_number=0, codes=None):
    """
    Validates a single data line.

    :param str fields_text: the line, terminator stripped
    :param int line_number: the physical, 1-based line number
    :param iso3166.CountryCodes codes: the code tables, the bundled ones by default
    :rtype: GeofeedLine
    """
    codes = codes or default_codes()
    fields = fields_text.split(",")

    reasons = set()
    notes = set()

    if len(fields) < FIELD_COUNT:
        reasons.add(MalformedReason.NOT_ENOUGH_FIELDS)
    elif len(fields) > FIELD_COUNT:
        notes.add(LineNote.EXTRA_FIELDS)

    try:
        prefix = parse_prefix(fields[0])
    except MalformedIpPrefix:
        prefix = None
        reasons.add(MalformedReason.MALFORMED_IP_PREFIX)

    alpha2 = _field(fields, 1)
    region = _field(fields, 2)

    if alpha2 and not codes.is_country(alpha2):
        reasons.add(MalformedReason.MALFORMED_COUNTRY_CODE)
    if region and not codes.is_region(region, alpha2 or ""):
        reasons.add(MalformedReason.MALFORMED_REGION_CODE)

    return GeofeedLine(
        line_number=line_number,
        text=fields_text,
        ip_prefix=prefix,
        alpha2code=alpha2,
        region=region,
        city=_field(fields, 3),
        postal_code=_field(fields, 4),
        reasons=frozenset(reasons),
        notes=frozenset(notes),
    )


def split_lines(text):
    """
    Splits decoded text on CRLF, CR or LF. A final terminator does not start
    an extra empty line.

    :rtype: list(str)
    """
    if not text:
        return []
    lines = _LINE_SPLIT_RE.split(text)
    if lines[-1] == "":
        lines.pop()
    return lines


def decode_text(raw):
    """
    :param bytes raw: the file content
    :return: ``(text, encoding_ok)``; invalid UTF-8 sequences are replaced
    :rtype: tuple
    """
    try:
        text = raw.decode("utf-8")
        encoding_ok = True
    except UnicodeDecodeError:
        text = raw.decode("utf-8", errors="replace")
        encoding_ok = False

    if text.startswith("\ufeff"):
        text = text[1:]

    return text, encoding_ok


def decode_file(raw, source_url="", codes=None):
    """
    Decodes a geofeed file and validates each data line.

    :param bytes raw: the file content, may be empty
    :param str source_url: where the content came from
    :param iso3166.CountryCodes codes: the code tables, the bundled ones by default
    :rtype: GeofeedFile
    """
    text, encoding_ok = decode_text(raw)
    if not encoding_ok:
        log.info("%s is not valid UTF-8, decoding lossily", source_url or "<bytes>")

    lines = []
    comments = blanks = 0

    for number, line in enumerate(split_lines(text), start=1):
        if not line.strip():
            blanks += 1
        elif line.startswith("#"):
            comments += 1
        else:
            lines.append(validate_line(line, number, codes))

    return GeofeedFile(
        source_url=source_url,
        raw_bytes_digest=hashlib.sha256(raw).hexdigest(),
        encoding_ok=encoding_ok,
        crlf_ok=_BARE_TERMINATOR_RE.search(raw) is None,
        lines=tuple(lines),
        comment_count=comments,
        blank_count=blanks,
    )


def _reason_counter():
    return Counter({r: 0 for r in MalformedReason})


@dataclass
class FileReport:
    """
    The adherence report of one file.

    ``reasons`` counts every failed check (a line failing two checks adds
    two), ``primary_reasons`` counts every malformed line once under its
    :py:attr:`GeofeedLine.primary_reason`.
    """

    url: str = ""
    total: int = 0
    valid: int = 0
    malformed: int = 0
    reasons: Counter = field(default_factory=_reason_counter)
    primary_reasons: Counter = field(default_factory=_reason_counter)
    extra_field_lines: int = 0
    encoding_ok: bool = True
    crlf_ok: bool = True
    digest: str = ""

    def add_line(self, line):
        self.total += 1
        if line.is_valid:
            self.valid += 1
        else:
            self.malformed += 1
            self.reasons.update(line.reasons)
            self.primary_reasons[line.primary_reason] += 1
        if LineNote.EXTRA_FIELDS in line.notes:
            self.extra_field_lines += 1

    def to_dict(self):
        return {
            "url": self.url,
            "total": self.total,
            "valid": self.valid,
            "malformed": self.malformed,
            "reasons": {r.value: self.reasons[r] for r in MalformedReason},
            "primary_reasons": {r.value: self.primary_reasons[r] for r in MalformedReason},
            "extra_field_lines": self.extra_field_lines,
            "encoding_ok": self.encoding_ok,
            "crlf_ok": self.crlf_ok,
            "digest": self.digest,
        }

    @classmethod
    def from_dict(cls, obj):
        report = cls(
            url=obj.get("url", ""),
            total=obj["total"],
            valid=obj["valid"],
            malformed=obj["malformed"],
            extra_field_lines=obj.get("extra_field_lines", 0),
            encoding_ok=obj.get("encoding_ok", True),
            crlf_ok=obj.get("crlf_ok", True),
            digest=obj.get("digest", ""),
        )
        for r in MalformedReason:
            report.reasons[r] = obj.get("reasons", {}).get(r.value, 0)
            report.primary_reasons[r] = obj.get("primary_reasons", {}).get(r.value, 0)
        return report


def validate_file(geofeed_file):
    """
    Counts valid and malformed lines of a decoded file.

    :param GeofeedFile geofeed_file: the decoded file
    :rtype: FileReport
    """
    report = FileReport(
        url=geofeed_file.source_url,
        encoding_ok=geofeed_file.encoding_ok,
        crlf_ok=geofeed_file.crlf_ok,
        digest=geofeed_file.raw_bytes_digest,
    )
    for line in geofeed_file.lines:
        report.add_line(line)

    log.debug(
        "%s: %d lines, %d valid, %d malformed",
        report.url or "<bytes>",
        report.total,
        report.valid,
        report.malformed,
    )
    return report
