"""
Comparison of claimed prefix owners against secondary sources.

A source answers ``lookup(prefix)`` with the owners it knows for the
prefix; an empty answer means *not found*. By default a source answers
with the owners of every record covering the prefix; with ``exact=True``
only records for exactly that prefix count.

Owners are compared after normalization: AS numbers numerically with an
optional ``AS`` prefix removed, organisation names case-insensitively with
surrounding whitespace removed.
"""

import enum
import json
import re

from dataclasses import dataclass

import radix
import requests

from .. import GeofeedkitError
from ..logger import component_logger
from ..prefix import MalformedIpPrefix, parse_prefix

log = component_logger(__name__, "AUTH")

_ASN_RE = re.compile(r"(?:AS)?\s*([0-9]+)$", re.IGNORECASE)


class SourceUnavailable(GeofeedkitError):
    """
    Raised when an ownership source can't be read or reached.
    """


def normalize_owner(owner):
    """
    :param owner: an AS number (``int``, ``"AS64500"``, ``"64500"``) or an
        organisation name
    :return: ``("as", number)`` or ``("org", folded name)``
    :rtype: tuple
    """
    if isinstance(owner, int):
        return ("as", owner)
    text = str(owner).strip()
    m = _ASN_RE.match(text)
    if m:
        return ("as", int(m.group(1)))
    return ("org", text.casefold())


def same_owner(a, b):
    return normalize_owner(a) == normalize_owner(b)


class Verdict(enum.Enum):
    MATCH = "match"
    INCORRECT = "incorrect"
    MISSING = "missing"


@dataclass(frozen=True)
class OwnershipVerdict:
    prefix: object
    claimed_owner: str
    verdict: Verdict
    found_owner: str = None

    def to_dict(self):
        return {
            "prefix": str(self.prefix),
            "claimed_owner": self.claimed_owner,
            "verdict": self.verdict.value,
            "found_owner": self.found_owner,
        }


@dataclass(frozen=True)
class CountSummary:
    match: int = 0
    incorrect: int = 0
    missing: int = 0

    @property
    def total(self):
        return self.match + self.incorrect + self.missing

    @property
    def match_rate(self):
        return self.match / self.total if self.total else 0.0

    def to_dict(self):
        return {
            "match": self.match,
            "incorrect": self.incorrect,
            "missing": self.missing,
            "total": self.total,
            "match_rate": round(self.match_rate * 100, 2),
        }


class OwnershipSource:
    """
    Base class of ownership sources.
    """

    name = "source"

    def lookup(self, prefix, exact=False):
        """
        :param prefix.Prefix prefix: the prefix
        :param bool exact: only consider records for exactly ``prefix``
        :return: the owners found, empty when not found
        :rtype: tuple(str)
        :raise SourceUnavailable: when the source can't answer
        """
        raise NotImplementedError


class _RadixSource(OwnershipSource):
    def __init__(self):
        self.rtree = radix.Radix()
        self.records = 0

    def _add(self, prefix, owner, max_length=None):
        # None: the record answers for every more specific prefix
        node = self.rtree.add(str(prefix))
        node.data.setdefault("entries", []).append((owner, max_length))
        self.records += 1

    def lookup(self, prefix, exact=False):
        if exact:
            node = self.rtree.search_exact(str(prefix))
            nodes = [node] if node is not None else []
        else:
            nodes = self.rtree.search_covering(str(prefix))

        owners = []
        for node in nodes:
            for owner, max_length in node.data["entries"]:
                if max_length is not None and max_length < prefix.length:
                    continue
                if owner not in owners:
                    owners.append(owner)
        return tuple(owners)


def _read_jsonl(path):
    try:
        with open(path, encoding="utf-8") as fp:
            for number, line in enumerate(fp, start=1):
                if not line.strip():
                    continue
                try:
                    yield json.loads(line)
                except json.JSONDecodeError as e:
                    raise SourceUnavailable(f"{path}:{number}: {e}") from None
    except OSError as e:
        raise SourceUnavailable(f"can't read {path}: {e}") from None


class RpkiSnapshotSource(_RadixSource):
    """
    ROA payloads from a JSON-lines snapshot, one ``{prefix, max_length, asn}``
    object per line. A ROA answers for every prefix it covers up to its
    ``max_length``.
    """

    name = "rpki"

    def __init__(self, roas=()):
        super().__init__()
        for roa in roas:
            self.add_roa(roa)

    def add_roa(self, roa):
        try:
            prefix = parse_prefix(roa["prefix"])
            asn = normalize_owner(roa["asn"])[1]
            max_length = int(roa.get("max_length") or roa.get("maxLength") or prefix.length)
        except (KeyError, TypeError, ValueError, MalformedIpPrefix) as e:
            raise SourceUnavailable(f"invalid ROA {roa!r}: {e}") from None
        self._add(prefix, f"AS{asn}", max_length)

    @classmethod
    def from_file(cls, path):
        source = cls(_read_jsonl(path))
        log.info("Loaded %d ROAs from %s", source.records, path)
        return source


class FileOwnershipSource(_RadixSource):
    """
    Registered owners from a JSON-lines file of ``{prefix, owner}`` objects.
    """

    name = "file"

    def __init__(self, entries=()):
        super().__init__()
        for entry in entries:
            try:
                self._add(parse_prefix(entry["prefix"]), str(entry["owner"]))
            except (KeyError, TypeError, MalformedIpPrefix) as e:
                raise SourceUnavailable(f"invalid ownership entry {entry!r}: {e}") from None

    @classmethod
    def from_file(cls, path):
        source = cls(_read_jsonl(path))
        log.info("Loaded %d ownership records from %s", source.records, path)
        return source


class HttpOwnershipSource(OwnershipSource):
    """
    Live lookups against a prefix overview endpoint.

    ``endpoint`` is a URL template with a ``{prefix}`` placeholder. The
    response is JSON in the RIPEstat ``prefix-overview`` layout: the owners
    are the ``asn`` values of ``data.asns``. The endpoint resolves covering
    records itself, so ``exact`` is passed on as the ``exact`` parameter.
    """

    name = "http"

    DEFAULT_ENDPOINT = "https://stat.ripe.net/data/prefix-overview/data.json?resource={prefix}"

    def __init__(self, endpoint=DEFAULT_ENDPOINT, timeout=10.0, session=None):
        self.endpoint = endpoint
        self.timeout = timeout
        self.session = session or requests.Session()
        self._cache = {}

    def lookup(self, prefix, exact=False):
        key = (str(prefix), exact)
        if key in self._cache:
            return self._cache[key]

        url = self.endpoint.format(prefix=prefix)
        try:
            resp = self.session.get(url, params={"exact": "true"} if exact else None, timeout=self.timeout)
            resp.raise_for_status()
            payload = resp.json()
        except (requests.RequestException, ValueError) as e:
            raise SourceUnavailable(f"{url}: {e}") from None

        asns = (payload.get("data") or {}).get("asns") or []
        owners = tuple(f"AS{a['asn']}" for a in asns if isinstance(a, dict) and "asn" in a)
        self._cache[key] = owners
        return owners


class ChainedOwnershipSource(OwnershipSource):
    """
    Asks several sources in order and returns the first non-empty answer.
    """

    name = "chained"

    def __init__(self, sources):
        self.sources = list(sources)

    def lookup(self, prefix, exact=False):
        for source in self.sources:
            owners = source.lookup(prefix, exact)
            if owners:
                return owners
        return ()


def compare_ownership(claims, source, exact=False):
    """
    Classifies each claim as match, incorrect or missing.

    :param claims: iterable of ``(prefix, claimed_owner)``; prefixes may be strings
    :param OwnershipSource source: the secondary source
    :param bool exact: use exact-prefix instead of covering-prefix lookups
    :return: ``(verdicts, summary)``
    :rtype: tuple(list(OwnershipVerdict), CountSummary)
    :raise SourceUnavailable: when the source can't answer
    """
    verdicts = []
    counts = {v: 0 for v in Verdict}

    for prefix, claimed in claims:
        if isinstance(prefix, str):
            prefix = parse_prefix(prefix)
        owners = source.lookup(prefix, exact)

        if not owners:
            verdict = OwnershipVerdict(prefix, claimed, Verdict.MISSING)
        elif any(same_owner(claimed, owner) for owner in owners):
            verdict = OwnershipVerdict(prefix, claimed, Verdict.MATCH, claimed)
        else:
            verdict = OwnershipVerdict(prefix, claimed, Verdict.INCORRECT, owners[0])

        counts[verdict.verdict] += 1
        verdicts.append(verdict)

    summary = CountSummary(
        match=counts[Verdict.MATCH],
        incorrect=counts[Verdict.INCORRECT],
        missing=counts[Verdict.MISSING],
    )
    log.info(
        "Ownership against %s: %d match, %d incorrect, %d missing",
        source.name,
        summary.match,
        summary.incorrect,
        summary.missing,
    )
    return verdicts, summary


def load_claims(path):
    """
    Reads claims from a JSON-lines file of ``{prefix, owner}`` objects.

    :rtype: list(tuple)
    :raise SourceUnavailable: when the file can't be read
    """
    claims = []
    for entry in _read_jsonl(path):
        try:
            claims.append((parse_prefix(entry["prefix"]), str(entry["owner"])))
        except (KeyError, TypeError, MalformedIpPrefix) as e:
            raise SourceUnavailable(f"invalid claim {entry!r}: {e}") from None
    return claims
