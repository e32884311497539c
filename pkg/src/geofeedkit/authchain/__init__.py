"""
Two-step authentication of geofeed publishers and data: prefix
certificates, scoped signatures with countersignature chains and
ownership comparison against secondary sources.
"""

from .pki import (  # noqa: F401
    AuthchainError,
    Certificate,
    CertificateError,
    CertificateStore,
    DelegationExceedsIssuer,
    EnvelopeError,
    ExpiredCertificate,
    ExpiredIssuer,
    Identity,
    IssuerKind,
    UnknownCertificate,
    create_trust_anchor,
    generate_identity,
    issue_certificate,
    validate_path,
)
from .signing import (  # noqa: F401
    FILE_SCOPE,
    ChainElement,
    EmptyScope,
    ScopeContainsMalformedLine,
    ScopeExceedsAuthorization,
    SignatureScope,
    SignedGeofeedBundle,
    Target,
    TargetOutOfRange,
    VerificationReport,
    canonicalize_scope,
    countersign,
    sign_scope,
    verify_bundle,
)
from .ownership import (  # noqa: F401
    ChainedOwnershipSource,
    CountSummary,
    FileOwnershipSource,
    HttpOwnershipSource,
    OwnershipVerdict,
    RpkiSnapshotSource,
    SourceUnavailable,
    Verdict,
    compare_ownership,
)
