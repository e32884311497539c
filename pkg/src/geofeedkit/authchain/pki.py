"""
Publisher identities and prefix certificates.

A certificate binds a subject name and an Ed25519 verification key to the
prefixes the subject is authorized to publish geolocation for. Certificates
form a tree rooted in self-signed trust anchors.

There are two kinds of issuers:

- **resource** issuers (registries, ISPs) hold address space and may only
  delegate prefixes they hold;
- **attestation** issuers (a CA/RA) vouch for identities. They may
  countersign elements they hold no prefixes for, but they can't delegate
  prefix authority they lack.

Trust anchors are accepted axiomatically, so a root may certify any
prefixes. Every certificate below the first level is contained in its
issuer's prefixes, which :py:func:`validate_path` checks transitively.
"""

import base64
import datetime
import enum
import hashlib
import json
import os

from dataclasses import dataclass, field, replace

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .. import GeofeedkitError
from ..logger import component_logger
from ..prefix import PrefixSet

log = component_logger(__name__, "AUTH")

ENVELOPE_VERSION = 1
DEFAULT_ALGORITHM = "ed25519"


class AuthchainError(GeofeedkitError):
    """
    Base class of authentication errors. These are domain failures.
    """

    exit_code = 1


class CertificateError(AuthchainError):
    pass


class DelegationExceedsIssuer(CertificateError):
    """
    Raised when a prefix-constrained issuer delegates prefixes it does not hold.
    """


class ExpiredIssuer(CertificateError):
    """
    Raised when the issuer's certificate is not valid at issuance time.
    """


class ExpiredCertificate(AuthchainError):
    """
    Raised when a signer's certificate is not valid at signing time.
    """


class UnknownCertificate(AuthchainError):
    """
    Raised when a serial is not present in a :py:class:`CertificateStore`.
    """

    def __init__(self, serial):
        self.serial = serial
        super().__init__(f"unknown certificate {serial!r}")


class EnvelopeError(GeofeedkitError):
    """
    Raised when a key, certificate or bundle file can't be decoded.
    """


class IssuerKind(enum.Enum):
    RESOURCE = "resource"
    ATTESTATION = "attestation"


def b64encode(data):
    return base64.b64encode(data).decode("ascii")


def b64decode(text):
    try:
        return base64.b64decode(text.encode("ascii"), validate=True)
    except (ValueError, AttributeError) as e:
        raise EnvelopeError(f"invalid base64 field: {e}") from None


def utcnow():
    return datetime.datetime.now(datetime.timezone.utc).replace(microsecond=0)


def format_time(value):
    return value.astimezone(datetime.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_time(text):
    """
    :param str text: an ISO 8601 timestamp; naive values are taken as UTC
    :rtype: datetime.datetime
    """
    try:
        value = datetime.datetime.fromisoformat(text.replace("Z", "+00:00"))
    except (ValueError, AttributeError):
        raise EnvelopeError(f"invalid timestamp {text!r}") from None
    if value.tzinfo is None:
        value = value.replace(tzinfo=datetime.timezone.utc)
    return value


def _verify_ed25519(public_key, signature, message):
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
    except (InvalidSignature, ValueError):
        return False
    return True


VERIFIERS = {
    "ed25519": _verify_ed25519,
}


def verify_signature(algorithm, public_key, signature, message):
    """
    :param str algorithm: the algorithm identifier recorded in the envelope
    :param bytes public_key: the raw verification key
    :param bytes signature: the signature
    :param bytes message: the signed bytes
    :return: ``False`` for bad signatures and unknown algorithms
    :rtype: bool
    """
    verifier = VERIFIERS.get(algorithm)
    if verifier is None:
        log.warning("Unsupported signature algorithm %r", algorithm)
        return False
    return verifier(public_key, signature, message)


@dataclass(frozen=True)
class Identity:
    """
    A signing key and the name of its owner.
    """

    subject_name: str
    private_key: Ed25519PrivateKey = field(repr=False, compare=False)
    algorithm: str = DEFAULT_ALGORITHM

    @property
    def verification_key(self):
        """The raw 32 byte public key."""
        return self.private_key.public_key().public_bytes(
            encoding=serialization.Encoding.Raw,
            format=serialization.PublicFormat.Raw,
        )

    def sign(self, message):
        return self.private_key.sign(message)

    def to_dict(self):
        raw = self.private_key.private_bytes(
            encoding=serialization.Encoding.Raw,
            format=serialization.PrivateFormat.Raw,
            encryption_algorithm=serialization.NoEncryption(),
        )
        return {
            "version": ENVELOPE_VERSION,
            "subject": self.subject_name,
            "alg": self.algorithm,
            "private_key": b64encode(raw),
            "public_key": b64encode(self.verification_key),
        }

    @classmethod
    def from_dict(cls, obj):
        try:
            if obj.get("alg", DEFAULT_ALGORITHM) != DEFAULT_ALGORITHM:
                raise EnvelopeError(f"unsupported key algorithm {obj['alg']!r}")
            key = Ed25519PrivateKey.from_private_bytes(b64decode(obj["private_key"]))
            return cls(obj["subject"], key)
        except (KeyError, TypeError, ValueError) as e:
            raise EnvelopeError(f"invalid key file: {e}") from None


def generate_identity(subject_name, seed=None):
    """
    Creates a fresh Ed25519 key pair for ``subject_name``.

    :param str subject_name: e.g. an AS number or an organisation name
    :param seed: ``bytes`` or ``str``; when given the key is derived from
        the seed and the subject name, so tests get reproducible keys
    :rtype: Identity
    """
    if seed is None:
        return Identity(subject_name, Ed25519PrivateKey.generate())

    if isinstance(seed, str):
        seed = seed.encode("utf-8")
    material = hashlib.sha256(
        b"geofeedkit-identity\0" + seed + b"\0" + subject_name.encode("utf-8")
    ).digest()
    return Identity(subject_name, Ed25519PrivateKey.from_private_bytes(material))


def _canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


@dataclass(frozen=True)
class Certificate:
    serial: str
    subject_name: str
    subject_public_key: bytes = field(repr=False)
    authorized_prefixes: PrefixSet
    not_before: datetime.datetime
    not_after: datetime.datetime
    issuer_serial: str = None
    issuer_signature: bytes = field(default=b"", repr=False)
    kind: IssuerKind = IssuerKind.RESOURCE
    pubkey_alg: str = DEFAULT_ALGORITHM
    version: int = ENVELOPE_VERSION

    @property
    def is_root(self):
        return self.issuer_serial is None

    def valid_at(self, moment):
        return self.not_before <= moment <= self.not_after

    def _body(self, with_serial=True):
        body = {
            "version": self.version,
            "subject": self.subject_name,
            "kind": self.kind.value,
            "pubkey_alg": self.pubkey_alg,
            "pubkey": b64encode(self.subject_public_key),
            "prefixes": self.authorized_prefixes.to_list(),
            "not_before": format_time(self.not_before),
            "not_after": format_time(self.not_after),
            "issuer_serial": self.issuer_serial,
        }
        if with_serial:
            body["serial"] = self.serial
        return body

    def body_bytes(self):
        """
        :return: the canonical bytes covered by ``issuer_signature``
        :rtype: bytes
        """
        return _canonical_json(self._body())

    def compute_serial(self):
        return hashlib.sha256(_canonical_json(self._body(with_serial=False))).hexdigest()[:32]

    def to_dict(self):
        obj = self._body()
        obj["issuer_sig"] = b64encode(self.issuer_signature)
        return obj

    @classmethod
    def from_dict(cls, obj):
        try:
            return cls(
                serial=obj["serial"],
                subject_name=obj["subject"],
                subject_public_key=b64decode(obj["pubkey"]),
                authorized_prefixes=PrefixSet(obj.get("prefixes") or []),
                not_before=parse_time(obj["not_before"]),
                not_after=parse_time(obj["not_after"]),
                issuer_serial=obj.get("issuer_serial"),
                issuer_signature=b64decode(obj.get("issuer_sig", "")),
                kind=IssuerKind(obj.get("kind", IssuerKind.RESOURCE.value)),
                pubkey_alg=obj.get("pubkey_alg", DEFAULT_ALGORITHM),
                version=obj.get("version", ENVELOPE_VERSION),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise EnvelopeError(f"invalid certificate: {e}") from None


def _validity(validity, at):
    if isinstance(validity, datetime.timedelta):
        return at, at + validity
    not_before, not_after = validity
    return not_before, not_after


def _finish(identity, unsigned):
    serial = unsigned.compute_serial()
    cert = replace(unsigned, serial=serial)
    return replace(cert, issuer_signature=identity.sign(cert.body_bytes()))


def create_trust_anchor(
    identity, prefixes=(), validity=datetime.timedelta(days=3650), kind=IssuerKind.ATTESTATION, at=None
):
    """
    Creates a self-signed root certificate.

    :param Identity identity: the root's key
    :param prefixes: the prefixes the root holds, may be empty for an attestation CA
    :param validity: a ``timedelta`` from ``at`` or a ``(not_before, not_after)`` tuple
    :param IssuerKind kind: the issuer kind
    :param datetime.datetime at: issuance time, now by default
    :rtype: Certificate
    """
    at = at or utcnow()
    not_before, not_after = _validity(validity, at)
    if not not_before < not_after:
        raise CertificateError("not_before must be earlier than not_after")

    unsigned = Certificate(
        serial="",
        subject_name=identity.subject_name,
        subject_public_key=identity.verification_key,
        authorized_prefixes=prefixes if isinstance(prefixes, PrefixSet) else PrefixSet(prefixes),
        not_before=not_before,
        not_after=not_after,
        kind=kind,
        pubkey_alg=identity.algorithm,
    )
    return _finish(identity, unsigned)


def issue_certificate(
    issuer,
    issuer_certificate,
    subject_key,
    subject_name,
    prefixes,
    validity=datetime.timedelta(days=365),
    kind=IssuerKind.RESOURCE,
    at=None,
):
    """
    Issues a certificate for ``subject_name``.

    :param Identity issuer: the issuer's key
    :param Certificate issuer_certificate: the issuer's certificate
    :param bytes subject_key: the subject's raw verification key
    :param str subject_name: the subject
    :param prefixes: a :py:class:`PrefixSet` or an iterable of prefixes
    :param validity: a ``timedelta`` from ``at`` or a ``(not_before, not_after)`` tuple
    :param IssuerKind kind: the kind of the new certificate
    :param datetime.datetime at: issuance time, now by default
    :rtype: Certificate
    :raise ExpiredIssuer: when the issuer certificate is not valid at ``at``
    :raise DelegationExceedsIssuer: when a non-root issuer delegates
        prefixes outside its own
    :raise CertificateError: for inconsistent requests
    """
    at = at or utcnow()
    prefixes = prefixes if isinstance(prefixes, PrefixSet) else PrefixSet(prefixes)
    not_before, not_after = _validity(validity, at)

    if issuer.verification_key != issuer_certificate.subject_public_key:
        raise CertificateError("the issuer key does not match the issuer certificate")
    if not issuer_certificate.valid_at(at):
        raise ExpiredIssuer(
            f"{issuer_certificate.subject_name} is not valid at {format_time(at)}"
        )
    if not not_before < not_after:
        raise CertificateError("not_before must be earlier than not_after")
    if kind is IssuerKind.RESOURCE and not prefixes:
        raise CertificateError("a resource certificate needs at least one prefix")
    if not issuer_certificate.is_root and not prefixes.issubset(
        issuer_certificate.authorized_prefixes
    ):
        raise DelegationExceedsIssuer(
            f"{issuer_certificate.subject_name} can't delegate {prefixes.render()}"
        )

    unsigned = Certificate(
        serial="",
        subject_name=subject_name,
        subject_public_key=subject_key,
        authorized_prefixes=prefixes,
        not_before=not_before,
        not_after=not_after,
        issuer_serial=issuer_certificate.serial,
        kind=kind,
    )
    cert = _finish(issuer, unsigned)
    log.debug(
        "%s issued %s to %s for %s",
        issuer_certificate.subject_name,
        cert.serial,
        subject_name,
        prefixes.render() or "no prefixes",
    )
    return cert


class CertificateStore:
    """
    Certificates indexed by serial. Reads are safe from many threads; callers
    serialize additions.
    """

    def __init__(self, certificates=()):
        self._certs = {}
        for cert in certificates:
            self.add(cert)

    def add(self, cert):
        self._certs[cert.serial] = cert
        return cert

    def remove(self, serial):
        self._certs.pop(serial, None)

    def get(self, serial):
        """
        :rtype: Certificate
        :raise UnknownCertificate: when the serial is not in the store
        """
        try:
            return self._certs[serial]
        except KeyError:
            raise UnknownCertificate(serial) from None

    def find(self, subject_name):
        return [c for c in self._certs.values() if c.subject_name == subject_name]

    def __contains__(self, serial):
        return serial in self._certs

    def __iter__(self):
        return iter(self._certs.values())

    def __len__(self):
        return len(self._certs)

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fp:
            json.dump([c.to_dict() for c in self], fp, indent=2, sort_keys=True)
            fp.write("\n")

    @classmethod
    def load(cls, *paths):
        """
        Loads certificates from JSON files. A file holds either one
        certificate or a list of them; directories are scanned for ``*.json``.

        :rtype: CertificateStore
        :raise EnvelopeError: when a file can't be decoded
        """
        store = cls()
        for path in paths:
            if os.path.isdir(path):
                files = sorted(
                    os.path.join(path, name) for name in os.listdir(path) if name.endswith(".json")
                )
            else:
                files = [path]
            for name in files:
                for cert in load_certificates(name):
                    store.add(cert)
        return store


def load_certificates(path):
    """
    :param str path: a JSON file with one certificate or a list of certificates
    :rtype: list(Certificate)
    """
    with open(path, encoding="utf-8") as fp:
        try:
            obj = json.load(fp)
        except json.JSONDecodeError as e:
            raise EnvelopeError(f"{path}: {e}") from None
    if isinstance(obj, dict):
        obj = [obj]
    return [Certificate.from_dict(o) for o in obj]


@dataclass(frozen=True)
class PathResult:
    ok: bool
    path: tuple = ()
    errors: tuple = ()


def validate_path(cert, store, trust_anchors, at_time):
    """
    Builds and checks the path from ``cert`` up to a trust anchor.

    Every certificate on the path must be valid at ``at_time``, carry an
    issuer signature that verifies under its issuer's key and, below the
    first level, hold only prefixes its issuer holds. The path must end in a
    self-signed certificate that is one of ``trust_anchors``.

    :param Certificate cert: the certificate to check
    :param CertificateStore store: where issuers are looked up
    :param trust_anchors: iterable of root :py:class:`Certificate`
    :param datetime.datetime at_time: the verification time
    :rtype: PathResult
    """
    anchors = {a.serial: a for a in trust_anchors}
    errors = []
    path = [cert.serial]
    current = cert

    while True:
        if not current.valid_at(at_time):
            errors.append(f"{current.subject_name} ({current.serial}) is not valid at {format_time(at_time)}")

        if current.is_root:
            if not verify_signature(
                current.pubkey_alg,
                current.subject_public_key,
                current.issuer_signature,
                current.body_bytes(),
            ):
                errors.append(f"bad self signature on {current.subject_name}")
            anchor = anchors.get(current.serial)
            if anchor is None or anchor.subject_public_key != current.subject_public_key:
                errors.append(f"{current.subject_name} is not a trust anchor")
            break

        try:
            issuer = store.get(current.issuer_serial)
        except UnknownCertificate:
            issuer = anchors.get(current.issuer_serial)
            if issuer is None:
                errors.append(f"issuer {current.issuer_serial} of {current.subject_name} not found")
                break

        if issuer.serial in path:
            errors.append(f"certificate loop at {issuer.serial}")
            break

        if not verify_signature(
            issuer.pubkey_alg,
            issuer.subject_public_key,
            current.issuer_signature,
            current.body_bytes(),
        ):
            errors.append(f"bad issuer signature on {current.subject_name}")

        if not issuer.is_root and not current.authorized_prefixes.issubset(
            issuer.authorized_prefixes
        ):
            errors.append(
                f"{current.subject_name} holds prefixes outside {issuer.subject_name}'s"
            )

        path.append(issuer.serial)
        current = issuer

    return PathResult(ok=not errors, path=tuple(path), errors=tuple(errors))
