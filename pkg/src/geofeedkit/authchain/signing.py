"""
Scoped detached signatures over geofeed files and countersignature chains.

A publisher signs only the lines of a (possibly shared) geofeed file whose
prefixes fall inside its *scope*. Other parties stack countersignatures on
top, either over their own scope of the file or over an earlier element's
signature. The resulting :py:class:`SignedGeofeedBundle` is append-only.

:py:func:`verify_bundle` reports facts per element and leaves the trust
decision to the consumer, see :py:meth:`VerificationReport.trusted_by`.
"""

import enum
import hashlib
import json

from dataclasses import dataclass, field

from ..geofeed import decode_file, split_lines, decode_text
from ..logger import component_logger
from ..prefix import PrefixSet
from .pki import (
    AuthchainError,
    EnvelopeError,
    ExpiredCertificate,
    UnknownCertificate,
    b64decode,
    b64encode,
    format_time,
    IssuerKind,
    parse_time,
    utcnow,
    validate_path,
    verify_signature,
    ENVELOPE_VERSION,
)

log = component_logger(__name__, "AUTH")

DIGEST_ALGORITHM = "sha256"
SCOPE_HEADER = "# scope: "


class ScopeExceedsAuthorization(AuthchainError):
    """
    Raised when a signer's scope is not covered by its certificate.
    """

    exit_code = 2


class TargetOutOfRange(AuthchainError):
    """
    Raised when a countersignature targets an element that does not exist.
    """

    exit_code = 2


class ScopeContainsMalformedLine(AuthchainError):
    """
    Raised when a line selected by a scope is malformed.
    """

    def __init__(self, line_numbers):
        self.line_numbers = tuple(line_numbers)
        super().__init__(
            "scope selects malformed lines " + ", ".join(str(n) for n in self.line_numbers)
        )


class EmptyScope(AuthchainError):
    """
    Raised when a scope selects no line of the file.
    """

    exit_code = 2


def _digest(data):
    return hashlib.new(DIGEST_ALGORITHM, data).hexdigest()


def _as_prefix_set(prefixes):
    return prefixes if isinstance(prefixes, PrefixSet) else PrefixSet(prefixes)


def canonical_file_bytes(file_bytes):
    """
    The whole file with line terminators normalized to LF.

    :param bytes file_bytes: the file content
    :rtype: bytes
    """
    text, _ = decode_text(file_bytes)
    return "".join(line + "\n" for line in split_lines(text)).encode("utf-8")


def canonicalize_scope(file_bytes, scope_prefixes, geofeed_file=None):
    """
    Selects the data lines covered by a scope.

    The output starts with a comment line rendering the scope, followed by
    every data line whose prefix lies within the scope, in file order and
    LF terminated. Field content is never altered. The output is itself a
    geofeed file, and canonicalizing it again yields the same bytes.

    :param bytes file_bytes: the file content
    :param scope_prefixes: a :py:class:`PrefixSet` or an iterable of prefixes
    :param geofeed.GeofeedFile geofeed_file: the decoded file, if at hand
    :rtype: bytes
    :raise ScopeContainsMalformedLine: when a selected line is malformed
    :raise EmptyScope: when no line is selected
    """
    scope = _as_prefix_set(scope_prefixes)
    geofeed_file = geofeed_file or decode_file(file_bytes)

    selected = [
        line
        for line in geofeed_file.lines
        if line.ip_prefix is not None and scope.contains(line.ip_prefix)
    ]
    malformed = [line.line_number for line in selected if not line.is_valid]
    if malformed:
        raise ScopeContainsMalformedLine(malformed)
    if not selected:
        raise EmptyScope(f"no line of the file lies within {scope.render() or 'an empty scope'}")

    out = SCOPE_HEADER + scope.render() + "\n"
    out += "".join(line.text + "\n" for line in selected)
    return out.encode("utf-8")


@dataclass(frozen=True)
class SignatureScope:
    scope_prefixes: PrefixSet
    file_digest: str
    scope_digest: str

    @classmethod
    def compute(cls, file_bytes, scope_prefixes, geofeed_file=None):
        scope = _as_prefix_set(scope_prefixes)
        return cls(
            scope_prefixes=scope,
            file_digest=_digest(canonical_file_bytes(file_bytes)),
            scope_digest=_digest(canonicalize_scope(file_bytes, scope, geofeed_file)),
        )


class TargetKind(enum.Enum):
    FILE_SCOPE = "file"
    PRIOR_SIGNATURE = "prior"


@dataclass(frozen=True)
class Target:
    kind: TargetKind = TargetKind.FILE_SCOPE
    index: int = None

    @classmethod
    def prior(cls, index):
        return cls(TargetKind.PRIOR_SIGNATURE, index)

    def to_json(self):
        if self.kind is TargetKind.FILE_SCOPE:
            return "file"
        return {"prior": self.index}

    @classmethod
    def from_json(cls, obj):
        if obj == "file":
            return FILE_SCOPE
        try:
            return cls.prior(int(obj["prior"]))
        except (KeyError, TypeError, ValueError):
            raise EnvelopeError(f"invalid target {obj!r}") from None

    def __str__(self):
        if self.kind is TargetKind.FILE_SCOPE:
            return "file"
        return f"element {self.index}"


FILE_SCOPE = Target()


@dataclass(frozen=True)
class ChainElement:
    signer_serial: str
    scope: SignatureScope
    target: Target
    signature: bytes = field(repr=False)
    signing_time: object
    algorithm: str = "ed25519"

    def to_dict(self):
        return {
            "signer_serial": self.signer_serial,
            "scope_prefixes": self.scope.scope_prefixes.to_list(),
            "scope_digest": self.scope.scope_digest,
            "file_digest": self.scope.file_digest,
            "target": self.target.to_json(),
            "alg": self.algorithm,
            "sig": b64encode(self.signature),
            "signing_time": format_time(self.signing_time),
        }

    @classmethod
    def from_dict(cls, obj, file_digest=""):
        try:
            return cls(
                signer_serial=obj["signer_serial"],
                scope=SignatureScope(
                    scope_prefixes=PrefixSet(obj["scope_prefixes"]),
                    file_digest=obj.get("file_digest", file_digest),
                    scope_digest=obj["scope_digest"],
                ),
                target=Target.from_json(obj["target"]),
                signature=b64decode(obj["sig"]),
                signing_time=parse_time(obj["signing_time"]),
                algorithm=obj.get("alg", "ed25519"),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise EnvelopeError(f"invalid chain element: {e}") from None


@dataclass(frozen=True)
class SignedGeofeedBundle:
    """
    A geofeed file reference and its signature chain.

    The file is referenced by ``file_url``, embedded as ``file_bytes`` or
    both. Verification needs the bytes, either embedded or supplied.
    """

    file_url: str = ""
    file_bytes: bytes = field(default=None, repr=False)
    file_digest: str = ""
    chain: tuple = ()
    digest_alg: str = DIGEST_ALGORITHM

    def append(self, element):
        """
        :return: a new bundle with ``element`` at the end of the chain
        :rtype: SignedGeofeedBundle
        """
        if not self.chain and element.target.kind is not TargetKind.FILE_SCOPE:
            raise TargetOutOfRange("the first element must sign the file")
        return SignedGeofeedBundle(
            file_url=self.file_url,
            file_bytes=self.file_bytes,
            file_digest=self.file_digest or element.scope.file_digest,
            chain=self.chain + (element,),
            digest_alg=self.digest_alg,
        )

    def to_dict(self, embed=True):
        obj = {
            "version": ENVELOPE_VERSION,
            "file_url": self.file_url,
            "file_digest_alg": self.digest_alg,
            "file_digest": self.file_digest,
            "chain": [e.to_dict() for e in self.chain],
        }
        if embed and self.file_bytes is not None:
            obj["file"] = b64encode(self.file_bytes)
        return obj

    @classmethod
    def from_dict(cls, obj):
        try:
            if obj.get("file_digest_alg", DIGEST_ALGORITHM) != DIGEST_ALGORITHM:
                raise EnvelopeError(f"unsupported digest {obj['file_digest_alg']!r}")
            file_digest = obj.get("file_digest", "")
            return cls(
                file_url=obj.get("file_url", ""),
                file_bytes=b64decode(obj["file"]) if "file" in obj else None,
                file_digest=file_digest,
                chain=tuple(ChainElement.from_dict(e, file_digest) for e in obj["chain"]),
            )
        except (KeyError, TypeError, AttributeError) as e:
            raise EnvelopeError(f"invalid bundle: {e}") from None

    def save(self, path, embed=True):
        with open(path, "w", encoding="utf-8", newline="\n") as fp:
            json.dump(self.to_dict(embed), fp, indent=2, sort_keys=True)
            fp.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fp:
            try:
                return cls.from_dict(json.load(fp))
            except json.JSONDecodeError as e:
                raise EnvelopeError(f"{path}: {e}") from None


def _scope_message(algorithm, scope, signer_serial, signing_time):
    return b"\n".join(
        [
            b"geofeedkit-scope-signature-v1",
            algorithm.encode("ascii"),
            scope.scope_digest.encode("ascii"),
            scope.file_digest.encode("ascii"),
            signer_serial.encode("ascii"),
            format_time(signing_time).encode("ascii"),
        ]
    )


def _countersign_message(algorithm, index, target_element, signer_serial, signing_time):
    return b"\n".join(
        [
            b"geofeedkit-countersignature-v1",
            algorithm.encode("ascii"),
            str(index).encode("ascii"),
            b64encode(target_element.signature).encode("ascii"),
            target_element.scope.scope_digest.encode("ascii"),
            signer_serial.encode("ascii"),
            format_time(signing_time).encode("ascii"),
        ]
    )


def _check_signer(identity, certificate, signing_time):
    if identity.verification_key != certificate.subject_public_key:
        raise AuthchainError(
            f"the key of {identity.subject_name} does not match certificate {certificate.serial}"
        )
    if not certificate.valid_at(signing_time):
        raise ExpiredCertificate(
            f"{certificate.subject_name} is not valid at {format_time(signing_time)}"
        )


def sign_scope(identity, certificate, file_bytes, scope_prefixes, signing_time=None):
    """
    Signs the lines of ``file_bytes`` within ``scope_prefixes``.

    :param pki.Identity identity: the signer's key
    :param pki.Certificate certificate: the signer's certificate
    :param bytes file_bytes: the geofeed file
    :param scope_prefixes: a :py:class:`PrefixSet` or an iterable of prefixes
    :param datetime.datetime signing_time: now by default
    :return: an element targeting the file
    :rtype: ChainElement
    :raise ScopeExceedsAuthorization: when the scope is not covered by the certificate
    :raise ExpiredCertificate: when the certificate is not valid at ``signing_time``
    """
    signing_time = signing_time or utcnow()
    scope_prefixes = _as_prefix_set(scope_prefixes)
    _check_signer(identity, certificate, signing_time)

    if not scope_prefixes.issubset(certificate.authorized_prefixes):
        raise ScopeExceedsAuthorization(
            f"{certificate.subject_name} is not authorized for {scope_prefixes.render()}"
        )

    scope = SignatureScope.compute(file_bytes, scope_prefixes)
    message = _scope_message(identity.algorithm, scope, certificate.serial, signing_time)
    log.debug("%s signs %s", certificate.subject_name, scope_prefixes.render())

    return ChainElement(
        signer_serial=certificate.serial,
        scope=scope,
        target=FILE_SCOPE,
        signature=identity.sign(message),
        signing_time=signing_time,
        algorithm=identity.algorithm,
    )


def countersign(
    identity, certificate, bundle, target, scope_prefixes=None, file_bytes=None, signing_time=None
):
    """
    Appends a countersignature to ``bundle``.

    With a prior element as target the new element signs that element's
    signature and carries its scope. A resource certificate must then cover
    the scope; an attestation certificate may vouch for any element. With
    the file as target the countersigner signs its own ``scope_prefixes``.

    :param pki.Identity identity: the countersigner's key
    :param pki.Certificate certificate: the countersigner's certificate
    :param SignedGeofeedBundle bundle: the bundle to extend
    :param target: an element index, a :py:class:`Target` or :py:data:`FILE_SCOPE`
    :param scope_prefixes: the countersigner's scope, for file targets only
    :param bytes file_bytes: the file, when not embedded in the bundle
    :param datetime.datetime signing_time: now by default
    :rtype: SignedGeofeedBundle
    :raise TargetOutOfRange: when the target element does not exist
    :raise ScopeExceedsAuthorization: when the certificate does not cover the scope
    """
    if isinstance(target, int):
        target = Target.prior(target)

    if target.kind is TargetKind.FILE_SCOPE:
        file_bytes = file_bytes if file_bytes is not None else bundle.file_bytes
        if file_bytes is None:
            raise AuthchainError("the file is needed to sign a file scope")
        if scope_prefixes is None:
            raise AuthchainError("a file scope countersignature needs scope prefixes")
        element = sign_scope(identity, certificate, file_bytes, scope_prefixes, signing_time)
        return bundle.append(element)

    if not 0 <= target.index < len(bundle.chain):
        raise TargetOutOfRange(
            f"element {target.index} does not exist in a chain of {len(bundle.chain)}"
        )

    signing_time = signing_time or utcnow()
    _check_signer(identity, certificate, signing_time)

    target_element = bundle.chain[target.index]
    if certificate.kind is IssuerKind.RESOURCE and not target_element.scope.scope_prefixes.issubset(
        certificate.authorized_prefixes
    ):
        raise ScopeExceedsAuthorization(
            f"{certificate.subject_name} does not hold "
            f"{target_element.scope.scope_prefixes.render()}"
        )

    message = _countersign_message(
        identity.algorithm, target.index, target_element, certificate.serial, signing_time
    )
    log.debug("%s countersigns element %d", certificate.subject_name, target.index)

    return bundle.append(
        ChainElement(
            signer_serial=certificate.serial,
            scope=target_element.scope,
            target=target,
            signature=identity.sign(message),
            signing_time=signing_time,
            algorithm=identity.algorithm,
        )
    )


class ElementStatus(enum.Enum):
    PASSED = "passed"
    FAILED = "failed"
    UNKNOWN_SIGNER = "unknown_signer"


@dataclass(frozen=True)
class ElementResult:
    """
    The verification facts of one chain element.

    ``chain_ok``: the signer certificate chains to a trust anchor and every
    certificate on the path is valid at the verification time.
    ``signature_ok``: the signature bytes verify.
    ``scope_ok``: the scope digest recomputed from the file matches.
    ``authorized_ok``: the scope lies within the signer's prefixes.
    ``file_unchanged`` tells whether the whole file is the one the signer saw;
    it does not affect the verdict, since other publishers' lines may change.
    """

    index: int
    signer_serial: str
    signer_subject: str = ""
    target: Target = FILE_SCOPE
    chain_ok: bool = False
    signature_ok: bool = False
    scope_ok: bool = False
    authorized_ok: bool = False
    file_unchanged: bool = False
    status: ElementStatus = ElementStatus.FAILED
    errors: tuple = ()

    @property
    def passed(self):
        return self.status is ElementStatus.PASSED

    def to_dict(self):
        return {
            "index": self.index,
            "signer_serial": self.signer_serial,
            "signer_subject": self.signer_subject,
            "target": self.target.to_json(),
            "chain_ok": self.chain_ok,
            "signature_ok": self.signature_ok,
            "scope_ok": self.scope_ok,
            "authorized_ok": self.authorized_ok,
            "file_unchanged": self.file_unchanged,
            "status": self.status.value,
            "errors": list(self.errors),
        }


@dataclass(frozen=True)
class VerificationReport:
    at_time: object
    elements: tuple = ()

    @property
    def all_passed(self):
        return bool(self.elements) and all(e.passed for e in self.elements)

    def countersigners(self, index):
        """
        :return: indexes of the elements directly targeting element ``index``
        :rtype: list(int)
        """
        return [
            e.index
            for e in self.elements
            if e.target.kind is TargetKind.PRIOR_SIGNATURE and e.target.index == index
        ]

    def trusted_by(self, index):
        """
        The subjects vouching for element ``index`` through passing
        countersignatures, nearest first. A failing countersignature cuts
        the ladder above it.

        :param int index: the element
        :rtype: list(str)
        """
        if not self.elements[index].passed:
            return []
        subjects = []
        pending = [index]
        while pending:
            current = pending.pop(0)
            for above in self.countersigners(current):
                result = self.elements[above]
                if result.passed:
                    subjects.append(result.signer_subject)
                    pending.append(above)
        return subjects

    def trust_level(self, index):
        """
        :return: the subject of the deepest passing countersigner of element
            ``index``, the element's own signer when none vouches for it and
            ``None`` when the element fails
        """
        if not self.elements[index].passed:
            return None
        ladder = self.trusted_by(index)
        return ladder[-1] if ladder else self.elements[index].signer_subject

    def to_dict(self):
        return {
            "at_time": format_time(self.at_time),
            "all_passed": self.all_passed,
            "elements": [
                {**e.to_dict(), "trusted_by": self.trusted_by(e.index), "trust_level": self.trust_level(e.index)}
                for e in self.elements
            ],
        }


class _ScopeCache:
    def __init__(self, file_bytes):
        self.file_bytes = file_bytes
        self.geofeed_file = decode_file(file_bytes) if file_bytes is not None else None
        self.file_digest = (
            _digest(canonical_file_bytes(file_bytes)) if file_bytes is not None else None
        )
        self._digests = {}

    def scope_digest(self, scope_prefixes):
        key = scope_prefixes.render()
        if key not in self._digests:
            self._digests[key] = _digest(
                canonicalize_scope(self.file_bytes, scope_prefixes, self.geofeed_file)
            )
        return self._digests[key]


def _verify_element(index, element, bundle, store, anchors, at_time, cache, strict):
    errors = []
    try:
        cert = store.get(element.signer_serial)
    except UnknownCertificate:
        if strict:
            raise
        return ElementResult(
            index=index,
            signer_serial=element.signer_serial,
            target=element.target,
            status=ElementStatus.UNKNOWN_SIGNER,
            errors=(f"unknown signer certificate {element.signer_serial}",),
        )

    path = validate_path(cert, store, anchors, at_time)
    errors.extend(path.errors)

    if element.target.kind is TargetKind.FILE_SCOPE:
        message = _scope_message(element.algorithm, element.scope, cert.serial, element.signing_time)
        authorized_ok = element.scope.scope_prefixes.issubset(cert.authorized_prefixes)
    elif 0 <= element.target.index < index:
        target_element = bundle.chain[element.target.index]
        message = _countersign_message(
            element.algorithm, element.target.index, target_element, cert.serial, element.signing_time
        )
        authorized_ok = cert.kind is IssuerKind.ATTESTATION or element.scope.scope_prefixes.issubset(
            cert.authorized_prefixes
        )
        if element.scope != target_element.scope:
            errors.append(f"scope differs from the scope of element {element.target.index}")
    else:
        message = None
        authorized_ok = False
        errors.append(f"element targets {element.target}, which does not precede it")

    signature_ok = message is not None and verify_signature(
        element.algorithm, cert.subject_public_key, element.signature, message
    )
    if not signature_ok:
        errors.append("signature does not verify")
    if not authorized_ok:
        errors.append(f"{cert.subject_name} is not authorized for the scope")

    scope_ok = False
    file_unchanged = False
    if cache.geofeed_file is None:
        errors.append("the geofeed file is not available")
    else:
        file_unchanged = cache.file_digest == element.scope.file_digest
        try:
            scope_ok = cache.scope_digest(element.scope.scope_prefixes) == element.scope.scope_digest
        except (EmptyScope, ScopeContainsMalformedLine) as e:
            errors.append(str(e))
        else:
            if not scope_ok:
                errors.append("the scoped lines changed")

    passed = path.ok and signature_ok and scope_ok and authorized_ok and not errors
    return ElementResult(
        index=index,
        signer_serial=cert.serial,
        signer_subject=cert.subject_name,
        target=element.target,
        chain_ok=path.ok,
        signature_ok=signature_ok,
        scope_ok=scope_ok,
        authorized_ok=authorized_ok,
        file_unchanged=file_unchanged,
        status=ElementStatus.PASSED if passed else ElementStatus.FAILED,
        errors=tuple(errors),
    )


def verify_bundle(bundle, trust_anchors, store, at_time=None, file_bytes=None, strict=False):
    """
    Verifies every element of a bundle.

    The result of element ``i`` depends only on elements ``0..i``, so
    appending countersignatures never changes earlier results.

    :param SignedGeofeedBundle bundle: the bundle
    :param trust_anchors: iterable of root certificates
    :param pki.CertificateStore store: signer and intermediate certificates
    :param datetime.datetime at_time: now by default
    :param bytes file_bytes: the file, when not embedded in the bundle
    :param bool strict: raise :py:class:`UnknownCertificate` for unknown
        signers instead of reporting them
    :rtype: VerificationReport
    """
    at_time = at_time or utcnow()
    anchors = list(trust_anchors)
    cache = _ScopeCache(file_bytes if file_bytes is not None else bundle.file_bytes)

    results = tuple(
        _verify_element(i, element, bundle, store, anchors, at_time, cache, strict)
        for i, element in enumerate(bundle.chain)
    )
    report = VerificationReport(at_time=at_time, elements=results)
    log.info(
        "Verified %s: %d of %d elements passed",
        bundle.file_url or "bundle",
        sum(1 for r in results if r.passed),
        len(results),
    )
    return report
