"""
Fetching geofeed files.

Every failure is reported as a :py:class:`FetchStatus` in a
:py:class:`FetchOutcome`, never as an exception, so a crawl over thousands
of locators always returns one outcome per URL. The categories mirror how
unreachable geofeeds show up in practice: the host name does not resolve,
the connection fails or times out, or the server answers with an HTTP error.

Crawling is polite: at most ``host_concurrency`` requests per host run at the
same time and consecutive requests to the same host are spaced by
``host_delay`` seconds. The crawl itself runs on an asyncio loop in a helper
thread (:py:mod:`geofeedkit.async_in_thread`); the functions of this module
block until every URL has an outcome.
"""

import asyncio
import contextlib
import datetime
import enum
import hashlib
import json
import os
import socket
import time

from collections import Counter
from dataclasses import dataclass, field, fields
from urllib.parse import urljoin, urlsplit

import aiohttp

from . import GeofeedkitError, __version__
from .async_in_thread import run_coroutine
from .config import as_bool
from .logger import component_logger

log = component_logger(__name__, "FETCH")

REDIRECT_CODES = frozenset({301, 302, 303, 307, 308})
SUPPORTED_SCHEMES = frozenset({"http", "https"})
CHUNK_SIZE = 64 * 1024

# aiohttp >= 3.10 raises a dedicated subclass for resolver failures
_DNS_ERRORS = tuple(
    filter(None, (getattr(aiohttp, "ClientConnectorDNSError", None),))
)


class PolicyError(GeofeedkitError):
    """
    Raised when a :py:class:`FetchPolicy` is inconsistent.
    """


class FetchStatus(enum.Enum):
    OK = "ok"
    DNS_FAILURE = "dns_failure"
    CONNECTION_ERROR = "connection_error"
    TIMEOUT = "timeout"
    HTTP_ERROR = "http_error"
    TOO_LARGE = "too_large"
    SCHEME_REFUSED = "scheme_refused"
    INVALID_URL = "invalid_url"


RETRYABLE = frozenset({FetchStatus.CONNECTION_ERROR, FetchStatus.TIMEOUT})


@dataclass(frozen=True)
class FetchPolicy:
    """
    How a crawl behaves. Times are in seconds, sizes in bytes.
    """

    timeout: float = 10.0
    retry_limit: int = 2
    redirect_limit: int = 5
    max_body: int = 64 * 2 ** 20
    parallelism: int = 16
    allow_insecure: bool = False
    host_concurrency: int = 2
    host_delay: float = 1.0

    def __post_init__(self):
        if self.parallelism < 1:
            raise PolicyError(f"parallelism must be at least 1, got {self.parallelism}")
        if self.max_body <= 0:
            raise PolicyError(f"max_body must be positive, got {self.max_body}")
        if self.host_concurrency < 1:
            raise PolicyError("host_concurrency must be at least 1")
        if self.retry_limit < 0 or self.redirect_limit < 0:
            raise PolicyError("retry and redirect limits can't be negative")

    @classmethod
    def from_mapping(cls, mapping):
        """
        Builds a policy from a flat mapping whose keys are field names, dashes
        allowed (``retry-limit``). Unknown keys are ignored, ``None`` values
        keep the default.

        :param dict mapping: the configuration values
        :rtype: FetchPolicy
        :raise PolicyError: for values of the wrong type or out of range
        """
        kwargs = {}
        for f in fields(cls):
            value = mapping.get(f.name, mapping.get(f.name.replace("_", "-")))
            if value is None:
                continue
            try:
                if f.type in ("bool", bool):
                    kwargs[f.name] = as_bool(value)
                elif f.type in ("int", int):
                    kwargs[f.name] = int(value)
                else:
                    kwargs[f.name] = float(value)
            except ValueError:
                raise PolicyError(f"invalid value {value!r} for {f.name}") from None
        return cls(**kwargs)

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _now():
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


@dataclass(frozen=True)
class FetchOutcome:
    url: str
    status: FetchStatus
    body: bytes = field(default=None, repr=False)
    final_url: str = None
    content_digest: str = None
    http_status: int = None
    elapsed: float = 0.0
    attempts: int = 0
    fetched_at: str = None
    error: str = ""

    @property
    def accessible(self):
        return self.status is FetchStatus.OK

    def to_index_entry(self):
        return {
            "url": self.url,
            "status": self.status.value,
            "http_status": self.http_status,
            "final_url": self.final_url,
            "digest": self.content_digest,
            "timestamp": self.fetched_at,
            "elapsed_ms": round(self.elapsed * 1000),
            "attempts": self.attempts,
            "error": self.error,
        }


@dataclass(frozen=True)
class AvailabilitySummary:
    total: int = 0
    accessible: int = 0
    inaccessible: int = 0
    fraction_inaccessible: float = 0.0
    per_status: dict = field(default_factory=dict)
    http_status_counts: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "total": self.total,
            "accessible": self.accessible,
            "inaccessible": self.inaccessible,
            "fraction_inaccessible": self.fraction_inaccessible,
            "per_status": dict(self.per_status),
            "http_status_counts": {str(k): v for k, v in sorted(self.http_status_counts.items())},
        }


def summarize(outcomes):
    """
    Summarizes a collection of outcomes. The result only depends on the
    multiset of outcomes, not on their order.

    :param outcomes: iterable of :py:class:`FetchOutcome`
    :rtype: AvailabilitySummary
    """
    per_status = Counter({s.value: 0 for s in FetchStatus})
    http_codes = Counter()

    for outcome in outcomes:
        per_status[outcome.status.value] += 1
        if outcome.status is FetchStatus.HTTP_ERROR and outcome.http_status:
            http_codes[outcome.http_status] += 1

    total = sum(per_status.values())
    accessible = per_status[FetchStatus.OK.value]
    inaccessible = total - accessible

    return AvailabilitySummary(
        total=total,
        accessible=accessible,
        inaccessible=inaccessible,
        fraction_inaccessible=inaccessible / total if total else 0.0,
        per_status=dict(sorted(per_status.items())),
        http_status_counts=dict(http_codes),
    )


class _BodyTooLarge(Exception):
    pass


class Crawler:
    """
    An ``aiohttp`` session plus the per-host politeness bookkeeping.

    Use it as an asynchronous context manager::

        async with Crawler(policy) as crawler:
            outcome = await crawler.fetch("https://example.com/geofeed.csv")
    """

    def __init__(self, policy):
        self.policy = policy
        self.session = None
        self._host_slots = {}
        self._host_locks = {}
        self._next_start = {}

    async def __aenter__(self):
        connector = aiohttp.TCPConnector(
            limit=self.policy.parallelism,
            limit_per_host=self.policy.host_concurrency,
        )
        self.session = aiohttp.ClientSession(
            connector=connector,
            timeout=aiohttp.ClientTimeout(total=self.policy.timeout),
            headers={"User-Agent": f"geofeedkit/{__version__}"},
            cookie_jar=aiohttp.DummyCookieJar(),
            # honours HTTP(S)_PROXY and NO_PROXY
            trust_env=True,
        )
        return self

    async def __aexit__(self, *exc_info):
        await self.session.close()

    @contextlib.asynccontextmanager
    async def _host_slot(self, host):
        slot = self._host_slots.setdefault(
            host, asyncio.Semaphore(self.policy.host_concurrency)
        )
        async with slot:
            lock = self._host_locks.setdefault(host, asyncio.Lock())
            async with lock:
                loop = asyncio.get_running_loop()
                wait = self._next_start.get(host, 0.0) - loop.time()
                if wait > 0:
                    await asyncio.sleep(wait)
                self._next_start[host] = loop.time() + self.policy.host_delay
            yield

    async def _read_body(self, resp):
        if resp.content_length is not None and resp.content_length > self.policy.max_body:
            raise _BodyTooLarge()

        chunks = []
        size = 0
        async for chunk in resp.content.iter_chunked(CHUNK_SIZE):
            size += len(chunk)
            if size > self.policy.max_body:
                raise _BodyTooLarge()
            chunks.append(chunk)
        return b"".join(chunks)

    async def _attempt(self, url):
        """
        One attempt, following redirects by hand.

        :return: ``(status, extras)`` where extras are :py:class:`FetchOutcome` fields
        """
        current = url

        for _ in range(self.policy.redirect_limit + 1):
            try:
                async with self.session.get(current, allow_redirects=False) as resp:
                    if resp.status in REDIRECT_CODES:
                        location = resp.headers.get("Location")
                        if not location:
                            return FetchStatus.HTTP_ERROR, {"http_status": resp.status}

                        target = urljoin(current, location)
                        if urlsplit(target).scheme not in SUPPORTED_SCHEMES or (
                            urlsplit(current).scheme == "https"
                            and urlsplit(target).scheme != "https"
                            and not self.policy.allow_insecure
                        ):
                            return FetchStatus.SCHEME_REFUSED, {
                                "error": f"redirect to {target}",
                                "http_status": resp.status,
                            }
                        log.debug("%s redirects to %s", current, target)
                        current = target
                        continue

                    if resp.status >= 400:
                        return FetchStatus.HTTP_ERROR, {"http_status": resp.status}

                    body = await self._read_body(resp)
            except _BodyTooLarge:
                return FetchStatus.TOO_LARGE, {"error": f"body exceeds {self.policy.max_body} bytes"}
            except aiohttp.ClientConnectorError as e:
                if isinstance(e, _DNS_ERRORS) or isinstance(e.os_error, socket.gaierror):
                    return FetchStatus.DNS_FAILURE, {"error": str(e)}
                return FetchStatus.CONNECTION_ERROR, {"error": str(e)}
            except asyncio.TimeoutError as e:
                return FetchStatus.TIMEOUT, {"error": str(e) or "timed out"}
            except (aiohttp.InvalidURL, ValueError) as e:
                return FetchStatus.INVALID_URL, {"error": str(e) or type(e).__name__}
            except aiohttp.ClientError as e:
                return FetchStatus.CONNECTION_ERROR, {"error": str(e) or type(e).__name__}

            return FetchStatus.OK, {
                "body": body,
                "final_url": current,
                "content_digest": hashlib.sha256(body).hexdigest(),
                "http_status": resp.status,
            }

        return FetchStatus.HTTP_ERROR, {
            "http_status": resp.status,
            "error": f"more than {self.policy.redirect_limit} redirects",
        }

    async def fetch(self, url):
        """
        Fetches one URL, retrying connection errors and timeouts only. URLs
        without a host or with a scheme other than HTTP(S) get an outcome
        without any request.

        :param str url: an absolute URL
        :rtype: FetchOutcome
        """
        started = time.monotonic()
        try:
            parts = urlsplit(url)
            host = parts.hostname
        except ValueError as e:
            parts, host = None, None
            error = str(e)
        else:
            error = f"no host in {url}"

        if not host:
            return FetchOutcome(url, FetchStatus.INVALID_URL, error=error, fetched_at=_now())

        if parts.scheme not in SUPPORTED_SCHEMES or (
            parts.scheme != "https" and not self.policy.allow_insecure
        ):
            return FetchOutcome(
                url,
                FetchStatus.SCHEME_REFUSED,
                error=f"{parts.scheme or 'no'} scheme refused",
                fetched_at=_now(),
            )

        attempts = 0
        while True:
            attempts += 1
            async with self._host_slot(host):
                status, extras = await self._attempt(url)

            if status in RETRYABLE and attempts <= self.policy.retry_limit:
                log.debug("%s: %s, retrying (attempt %d)", url, status.value, attempts)
                continue
            break

        outcome = FetchOutcome(
            url,
            status,
            elapsed=time.monotonic() - started,
            attempts=attempts,
            fetched_at=_now(),
            **extras,
        )
        log.info("%s: %s", url, status.value)
        return outcome


async def _crawl(urls, policy):
    results = {}

    async with Crawler(policy) as crawler:
        gate = asyncio.Semaphore(policy.parallelism)

        async def worker(url):
            async with gate:
                try:
                    results[url] = await crawler.fetch(url)
                except asyncio.CancelledError:
                    raise
                except Exception as e:
                    log.error("Unexpected failure fetching %s", url, exc_info=True)
                    results[url] = FetchOutcome(
                        url, FetchStatus.CONNECTION_ERROR, error=repr(e), fetched_at=_now()
                    )

        await asyncio.gather(*(worker(url) for url in urls))

    return {url: results[url] for url in urls}


def _locator_urls(locators):
    seen = {}
    for loc in locators:
        url = loc if isinstance(loc, str) else loc.url
        seen.setdefault(url, None)
    return list(seen)


def fetch_locator(url, policy=None):
    """
    Fetches a single geofeed URL.

    :param str url: an absolute URL
    :param FetchPolicy policy: the policy, defaults apply when ``None``
    :rtype: FetchOutcome
    """
    policy = policy or FetchPolicy()

    async def one():
        async with Crawler(policy) as crawler:
            return await crawler.fetch(url)

    return run_coroutine(one(), name="fetch")


def crawl_corpus(locators, policy=None):
    """
    Fetches every distinct URL of ``locators`` with bounded parallelism.

    :param locators: iterable of :py:class:`geofeedkit.rpsl.GeofeedLocator`
        or URL strings; duplicated URLs are fetched once
    :param FetchPolicy policy: the policy, defaults apply when ``None``
    :return: ``(outcomes, summary)`` where ``outcomes`` maps URL to
        :py:class:`FetchOutcome` in first-seen order
    :rtype: tuple(dict, AvailabilitySummary)
    """
    policy = policy or FetchPolicy()
    urls = _locator_urls(locators)

    if not urls:
        return {}, summarize([])

    log.info(
        "Crawling %d URLs, parallelism %d, %d per host",
        len(urls),
        policy.parallelism,
        policy.host_concurrency,
    )
    outcomes = run_coroutine(_crawl(urls, policy), name="crawl")
    summary = summarize(outcomes.values())
    log.info(
        "%d of %d URLs accessible (%.2f%% inaccessible)",
        summary.accessible,
        summary.total,
        summary.fraction_inaccessible * 100,
    )
    return outcomes, summary


INDEX_NAME = "index.jsonl"


def body_path(directory, digest):
    return os.path.join(directory, digest[:2], f"{digest}.csv")


def write_snapshot(directory, outcomes):
    """
    Persists a crawl: bodies under ``<digest[:2]>/<digest>.csv`` and one
    ``index.jsonl`` line per URL, sorted by URL.

    :param str directory: the snapshot directory, created if needed
    :param dict outcomes: URL to :py:class:`FetchOutcome`
    :return: the path of the index
    :rtype: str
    """
    os.makedirs(directory, exist_ok=True)

    for outcome in outcomes.values():
        if outcome.accessible:
            path = body_path(directory, outcome.content_digest)
            os.makedirs(os.path.dirname(path), exist_ok=True)
            with open(path, "wb") as fp:
                fp.write(outcome.body)

    index = os.path.join(directory, INDEX_NAME)
    with open(index, "w", encoding="utf-8", newline="\n") as fp:
        for url in sorted(outcomes):
            fp.write(json.dumps(outcomes[url].to_index_entry(), sort_keys=True) + "\n")

    return index


def read_snapshot(directory):
    """
    Loads a snapshot written by :py:func:`write_snapshot`.

    :param str directory: the snapshot directory
    :return: URL to :py:class:`FetchOutcome`, bodies loaded from disk
    :rtype: dict
    :raise FileNotFoundError: when the index or a body is missing
    """
    outcomes = {}
    with open(os.path.join(directory, INDEX_NAME), encoding="utf-8") as fp:
        for line in fp:
            if not line.strip():
                continue
            entry = json.loads(line)
            status = FetchStatus(entry["status"])
            body = None
            if status is FetchStatus.OK:
                with open(body_path(directory, entry["digest"]), "rb") as bfp:
                    body = bfp.read()
            outcomes[entry["url"]] = FetchOutcome(
                url=entry["url"],
                status=status,
                body=body,
                final_url=entry.get("final_url"),
                content_digest=entry.get("digest"),
                http_status=entry.get("http_status"),
                elapsed=entry.get("elapsed_ms", 0) / 1000,
                attempts=entry.get("attempts", 0),
                fetched_at=entry.get("timestamp"),
                error=entry.get("error", ""),
            )
    return outcomes
