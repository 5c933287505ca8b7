"""Eligibility and SBOM verifiable credentials.

Credentials are a fixed-schema JSON envelope signed with Ed25519 over
:func:`canonical_bytes` (the envelope without its ``proof``). Embedded
credentials are referenced by ``(vcId, vcDigest)`` where the digest is
SHA-256 over the canonical JSON of the complete referenced credential,
proof included.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Iterator, Protocol, Sequence

from .encoding import canonical_json, expect_keys, from_hex, parse_rfc3339, rfc3339, sha256
from .identity import Did, KeyPair, verify_signature
from .ledger import ACTIVE, LedgerState, Transaction, TxKind
from .merkle import SbomCommitment
from .sbom import CanonicalSbom, sbom_digest

VC_ID_PREFIX = "urn:sbomx:vc:"


class VcKind(str, Enum):
    ELIGIBILITY = "eligibility"
    COMPONENT_SBOM = "component_sbom"
    SYSTEM_SBOM = "system_sbom"

    @property
    def is_sbom(self) -> bool:
        return self is not VcKind.ELIGIBILITY


class CredentialError(Exception):
    pass


class NotAuthority(CredentialError):
    pass


class UnknownVendor(CredentialError):
    pass


class NotEligible(CredentialError):
    pass


class MissingComponents(CredentialError):
    pass


class BadEmbeddedDigest(CredentialError):
    pass


class InvalidEmbedding(CredentialError):
    pass


class NotAuthorized(CredentialError):
    pass


class AlreadyRevoked(CredentialError):
    pass


class UnknownVc(CredentialError):
    pass


class NotIssuer(CredentialError):
    pass


class DepthExceeded(CredentialError):
    pass


class DanglingRef(CredentialError):
    pass


class VcSource(Protocol):
    """Anything that can hand back a credential body by id (dicts qualify)."""

    def get(self, vc_id: str) -> "VerifiableCredential | None": ...


@dataclass(frozen=True)
class EmbeddedRef:
    vc_id: str
    vc_digest: bytes

    @classmethod
    def of(cls, vc: "VerifiableCredential") -> "EmbeddedRef":
        return cls(vc.id, vc.digest())

    def to_json(self) -> dict[str, str]:
        return {"vcId": self.vc_id, "vcDigest": self.vc_digest.hex()}

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "EmbeddedRef":
        expect_keys(data, {"vcId", "vcDigest"}, "embedded reference")
        return cls(data["vcId"], from_hex(data["vcDigest"], 32))


@dataclass(frozen=True)
class SbomMetadata:
    supplier: str
    product_name: str
    product_version: str
    author_did: str
    created: str

    def to_json(self) -> dict[str, str]:
        return {
            "supplier": self.supplier,
            "productName": self.product_name,
            "productVersion": self.product_version,
            "authorDid": self.author_did,
            "created": self.created,
        }

    @classmethod
    def from_sbom(cls, sbom: CanonicalSbom, author_did: Did | str) -> "SbomMetadata":
        """Describe the first package, or the document when it lists none."""
        return cls(
            supplier=sbom.value_of("packages/0/supplier") or "",
            product_name=sbom.value_of("packages/0/name") or sbom.value_of("name") or "",
            product_version=sbom.value_of("packages/0/versionInfo") or "",
            author_did=str(author_did),
            created=sbom.value_of("creationInfo/created") or "",
        )

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "SbomMetadata":
        return cls(data["supplier"], data["productName"], data["productVersion"], data["authorDid"], data["created"])


@dataclass(frozen=True)
class SbomClaims:
    """Digests and metadata only; composition details never appear here."""

    sbom_digest: bytes
    attribute_root: bytes
    index_root: bytes
    metadata: SbomMetadata
    storage_uri: str = ""
    supersedes: str | None = None

    def to_json(self) -> dict[str, Any]:
        return {
            "sbomDigest": self.sbom_digest.hex(),
            "attributeRoot": self.attribute_root.hex(),
            "indexRoot": self.index_root.hex(),
            "metadata": self.metadata.to_json(),
            "storageUri": self.storage_uri,
            "supersedes": self.supersedes,
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "SbomClaims":
        return cls(
            sbom_digest=from_hex(data["sbomDigest"], 32),
            attribute_root=from_hex(data["attributeRoot"], 32),
            index_root=from_hex(data["indexRoot"], 32),
            metadata=SbomMetadata.from_json(data["metadata"]),
            storage_uri=data["storageUri"],
            supersedes=data["supersedes"],
        )


@dataclass(frozen=True)
class EligibilityClaims:
    vendor_did: str
    criteria: tuple[str, ...]
    valid_until: str

    def to_json(self) -> dict[str, Any]:
        return {"vendorDid": self.vendor_did, "criteria": list(self.criteria), "validUntil": self.valid_until}

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "EligibilityClaims":
        return cls(data["vendorDid"], tuple(data["criteria"]), data["validUntil"])


@dataclass(frozen=True, eq=False)
class VerifiableCredential:
    id: str
    vc_kind: VcKind
    issuer: str
    subject: str
    issuance_date: str
    claims: dict[str, Any]
    embedded_refs: tuple[EmbeddedRef, ...] = ()
    verification_method: str = ""
    signature: bytes = b""

    def unsigned_json(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "vcKind": self.vc_kind.value,
            "issuer": self.issuer,
            "subject": self.subject,
            "issuanceDate": self.issuance_date,
            "claims": self.claims,
            "embeddedRefs": [r.to_json() for r in self.embedded_refs],
        }

    def to_json(self) -> dict[str, Any]:
        return {
            **self.unsigned_json(),
            "proof": {"verificationMethod": self.verification_method, "signatureHex": self.signature.hex()},
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "VerifiableCredential":
        expect_keys(data, {"id", "vcKind", "issuer", "subject", "issuanceDate", "claims", "embeddedRefs", "proof"}, "credential")
        expect_keys(data["proof"], {"verificationMethod", "signatureHex"}, "credential proof")
        return cls(
            id=data["id"],
            vc_kind=VcKind(data["vcKind"]),
            issuer=data["issuer"],
            subject=data["subject"],
            issuance_date=data["issuanceDate"],
            claims=data["claims"],
            embedded_refs=tuple(EmbeddedRef.from_json(r) for r in data["embeddedRefs"]),
            verification_method=data["proof"]["verificationMethod"],
            signature=from_hex(data["proof"]["signatureHex"], 64),
        )

    def digest(self) -> bytes:
        return sha256(canonical_json(self.to_json()))

    @property
    def issued_at(self) -> int:
        return parse_rfc3339(self.issuance_date)

    @property
    def sbom_claims(self) -> SbomClaims:
        if not self.vc_kind.is_sbom:
            raise TypeError("not an SBOM credential")
        return SbomClaims.from_json(self.claims)

    @property
    def eligibility_claims(self) -> EligibilityClaims:
        if self.vc_kind is not VcKind.ELIGIBILITY:
            raise TypeError("not an eligibility credential")
        return EligibilityClaims.from_json(self.claims)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, VerifiableCredential) and self.to_json() == other.to_json()

    def __hash__(self) -> int:
        return hash(self.digest())


def canonical_bytes(vc: VerifiableCredential) -> bytes:
    """The signed byte string: the credential without its proof."""
    return canonical_json(vc.unsigned_json())


def _sign(
    keys: KeyPair,
    issuer: str,
    kind: VcKind,
    subject: str,
    issued_at: int,
    claims: dict[str, Any],
    refs: Sequence[EmbeddedRef],
    state: LedgerState,
) -> VerifiableCredential:
    doc = state.document(issuer)
    version = doc.version if doc else 1
    draft = VerifiableCredential("", kind, issuer, subject, rfc3339(issued_at), claims, tuple(refs))
    vc_id = VC_ID_PREFIX + sha256(canonical_bytes(draft))[:16].hex()
    draft = replace(draft, id=vc_id, verification_method=f"{issuer}#key-{version}")
    return replace(draft, signature=keys.sign(canonical_bytes(draft)))


# -- issuance ----------------------------------------------------------------


def issue_eligibility_vc(
    authority_keys: KeyPair,
    authority_did: Did | str,
    vendor: Did | str,
    criteria: Sequence[str],
    valid_until: int,
    state: LedgerState,
    now: int,
) -> tuple[VerifiableCredential, Transaction]:
    issuer, subject = str(authority_did), str(vendor)
    if issuer != state.oversight:
        raise NotAuthority(f"{issuer} is not the oversight authority")
    if not state.is_active(subject):
        raise UnknownVendor(f"{subject} is not an active DID")
    if valid_until <= now:
        raise ValueError("validUntil must be after the issuance date")
    claims = EligibilityClaims(subject, tuple(criteria), rfc3339(valid_until)).to_json()
    vc = _sign(authority_keys, issuer, VcKind.ELIGIBILITY, subject, now, claims, (), state)
    tx = Transaction.create(
        authority_keys,
        issuer,
        TxKind.ELIG_REGISTER,
        {"vcId": vc.id, "vcDigest": vc.digest().hex(), "issuer": issuer, "subject": subject, "validUntil": valid_until},
    )
    return vc, tx


def _classify_refs(refs: Sequence[EmbeddedRef], state: LedgerState) -> tuple[list[EmbeddedRef], list[EmbeddedRef]]:
    """Split references into (eligibility, sbom) after digest checks."""
    elig, sboms = [], []
    for ref in refs:
        record = state.elig_registry.get(ref.vc_id) or state.sbom_registry.get(ref.vc_id)
        if record is None:
            raise DanglingRef(f"{ref.vc_id} is not registered")
        if record.digest != ref.vc_digest.hex():
            raise BadEmbeddedDigest(f"digest for {ref.vc_id} does not match the registered credential")
        (elig if ref.vc_id in state.elig_registry else sboms).append(ref)
    return elig, sboms


def issue_sbom_vc(
    vendor_keys: KeyPair,
    vendor_did: Did | str,
    kind: VcKind | str,
    commitment: SbomCommitment,
    digest: bytes,
    metadata: SbomMetadata,
    embedded_refs: Sequence[EmbeddedRef],
    state: LedgerState,
    now: int,
    storage_uri: str = "",
    supersedes: str | None = None,
    retain_old: bool = True,
) -> tuple[VerifiableCredential, Transaction]:
    issuer = str(vendor_did)
    kind = VcKind(kind)
    if not kind.is_sbom:
        raise ValueError("use issue_eligibility_vc for eligibility credentials")
    if not state.active_eligibility(issuer, now):
        raise NotEligible(f"{issuer} holds no active, unexpired eligibility credential")
    if kind is VcKind.SYSTEM_SBOM and not embedded_refs:
        raise MissingComponents("a system SBOM credential must embed its component credentials")
    elig, sboms = _classify_refs(embedded_refs, state)
    for ref in elig:
        if state.elig_registry[ref.vc_id].subject != issuer:
            raise InvalidEmbedding(f"{ref.vc_id} certifies a different vendor")
    if len(elig) > 1:
        raise InvalidEmbedding("at most one eligibility credential may be embedded")
    if kind is VcKind.COMPONENT_SBOM and elig and sboms:
        raise InvalidEmbedding("a component credential embeds either eligibility or upstream credentials")
    if kind is VcKind.SYSTEM_SBOM and not sboms:
        raise MissingComponents("a system SBOM credential must embed its component credentials")
    claims = SbomClaims(
        sbom_digest=digest,
        attribute_root=commitment.attribute_root,
        index_root=commitment.index_root,
        metadata=metadata,
        storage_uri=storage_uri,
        supersedes=supersedes,
    ).to_json()
    vc = _sign(vendor_keys, issuer, kind, issuer, now, claims, embedded_refs, state)
    payload: dict[str, Any] = {"vcId": vc.id, "vcDigest": vc.digest().hex(), "issuer": issuer}
    if supersedes is None:
        tx = Transaction.create(vendor_keys, issuer, TxKind.SBOM_REGISTER, payload)
    else:
        payload.update(supersedes=supersedes, retainOld=retain_old)
        tx = Transaction.create(vendor_keys, issuer, TxKind.SBOM_UPDATE, payload)
    return vc, tx


def update_sbom_vc(
    vendor_keys: KeyPair,
    vendor_did: Did | str,
    old_vc_id: str,
    commitment: SbomCommitment,
    digest: bytes,
    metadata: SbomMetadata,
    embedded_refs: Sequence[EmbeddedRef],
    retain_old: bool,
    state: LedgerState,
    now: int,
    kind: VcKind | str = VcKind.COMPONENT_SBOM,
    storage_uri: str = "",
) -> tuple[VerifiableCredential, list[Transaction]]:
    """Issue a superseding SBOM credential.

    The single ``sbom_update`` transaction registers the new credential and,
    unless ``retain_old``, revokes the old one in the same transition.
    """
    record = state.sbom_registry.get(old_vc_id)
    if record is None:
        raise UnknownVc(f"{old_vc_id} is not a registered SBOM credential")
    if record.issuer != str(vendor_did):
        raise NotIssuer(f"{vendor_did} did not issue {old_vc_id}")
    vc, tx = issue_sbom_vc(
        vendor_keys, vendor_did, kind, commitment, digest, metadata, embedded_refs, state, now,
        storage_uri=storage_uri, supersedes=old_vc_id, retain_old=retain_old,
    )
    return vc, [tx]


def revoke_vc(caller_keys: KeyPair, caller_did: Did | str, vc_id: str, reason: str, state: LedgerState) -> Transaction:
    caller = str(caller_did)
    if vc_id in state.elig_registry:
        record = state.elig_registry[vc_id]
        allowed = caller in (record.issuer, state.oversight)
    elif vc_id in state.sbom_registry:
        record = state.sbom_registry[vc_id]
        allowed = caller == record.issuer
    else:
        raise UnknownVc(f"{vc_id} is not registered")
    if not allowed:
        raise NotAuthorized(f"{caller} may not revoke {vc_id}")
    if record.status != ACTIVE:
        raise AlreadyRevoked(f"{vc_id} is already revoked")
    return Transaction.create(caller_keys, caller, TxKind.VC_REVOKE, {"vcId": vc_id, "reason": reason})


# -- verification ------------------------------------------------------------

SIGNATURE = "signature"
ISSUER_ACTIVE = "issuer_active"
NOT_REVOKED = "not_revoked"
NOT_EXPIRED = "not_expired"
ELIGIBILITY_CHAIN = "eligibility_chain"


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class VerificationOutcome:
    checks: tuple[Check, ...]

    @property
    def valid(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def check(self, name: str) -> Check:
        return next(c for c in self.checks if c.name == name)

    def to_json(self) -> dict[str, Any]:
        return {
            "valid": self.valid,
            "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in self.checks],
        }


def _check_signature(vc: VerifiableCredential, state: LedgerState) -> Check:
    try:
        issued_at = vc.issued_at
    except ValueError:
        return Check(SIGNATURE, False, f"unparseable issuance date {vc.issuance_date!r}")
    if not vc.verification_method.startswith(vc.issuer + "#"):
        return Check(SIGNATURE, False, "verification method does not belong to the issuer")
    doc = state.document_at(vc.issuer, issued_at)
    if doc is None:
        return Check(SIGNATURE, False, f"{vc.issuer} had no registered key at {vc.issuance_date}")
    if not verify_signature(doc.public_key, canonical_bytes(vc), vc.signature):
        return Check(SIGNATURE, False, f"signature invalid under key version {doc.version}")
    return Check(SIGNATURE, True, f"verified under key version {doc.version}")


def _check_status(vc: VerifiableCredential, state: LedgerState) -> Check:
    registry = state.elig_registry if vc.vc_kind is VcKind.ELIGIBILITY else state.sbom_registry
    record = registry.get(vc.id)
    if record is None:
        return Check(NOT_REVOKED, False, "credential is not registered on the ledger")
    if record.digest != vc.digest().hex():
        return Check(NOT_REVOKED, False, "registered digest differs from this credential")
    if record.status != ACTIVE:
        return Check(NOT_REVOKED, False, f"revoked: {record.reason}")
    return Check(NOT_REVOKED, True, "active")


def _check_expiry(vc: VerifiableCredential, now: int) -> Check:
    if vc.vc_kind.is_sbom:
        return Check(NOT_EXPIRED, True, "SBOM credentials do not expire")
    try:
        until = parse_rfc3339(vc.eligibility_claims.valid_until)
    except (KeyError, ValueError) as exc:
        return Check(NOT_EXPIRED, False, f"bad validUntil: {exc}")
    if until <= now:
        return Check(NOT_EXPIRED, False, f"expired at {vc.eligibility_claims.valid_until}")
    return Check(NOT_EXPIRED, True, f"valid until {vc.eligibility_claims.valid_until}")


def _fetch(ref: EmbeddedRef, store: VcSource | None) -> VerifiableCredential | None:
    return store.get(ref.vc_id) if store is not None else None


def _check_eligibility(vc: VerifiableCredential, state: LedgerState, now: int, store: VcSource | None) -> Check:
    if not vc.vc_kind.is_sbom:
        return Check(ELIGIBILITY_CHAIN, True, "not applicable")
    refs = [r for r in vc.embedded_refs if r.vc_id in state.elig_registry]
    if not refs:
        return Check(ELIGIBILITY_CHAIN, True, "no embedded eligibility credential")
    for ref in refs:
        elig = _fetch(ref, store)
        if elig is None:
            return Check(ELIGIBILITY_CHAIN, False, f"embedded {ref.vc_id} unavailable")
        if elig.digest() != ref.vc_digest:
            return Check(ELIGIBILITY_CHAIN, False, f"embedded {ref.vc_id} digest mismatch")
        if elig.vc_kind is not VcKind.ELIGIBILITY or elig.subject != vc.issuer:
            return Check(ELIGIBILITY_CHAIN, False, f"{ref.vc_id} does not certify {vc.issuer}")
        outcome = verify_vc(elig, state, now, store)
        if not outcome.valid:
            return Check(ELIGIBILITY_CHAIN, False, f"embedded eligibility failed: {', '.join(outcome.failed)}")
    return Check(ELIGIBILITY_CHAIN, True, "embedded eligibility verified")


def verify_vc(vc: VerifiableCredential, state: LedgerState, now: int, store: VcSource | None = None) -> VerificationOutcome:
    """Run every check in order; the outcome records each one.

    ``store`` supplies bodies of embedded credentials; anonymous verifiers
    need only a ledger snapshot and the bodies the holder hands over.
    """
    return VerificationOutcome(
        (
            _check_signature(vc, state),
            Check(ISSUER_ACTIVE, state.is_active(vc.issuer), "issuer DID status"),
            _check_status(vc, state),
            _check_expiry(vc, now),
            _check_eligibility(vc, state, now, store),
        )
    )


def verify_full_disclosure(
    sbom_bytes: bytes, vc: VerifiableCredential, state: LedgerState, now: int, store: VcSource | None = None
) -> bool:
    if not vc.vc_kind.is_sbom:
        return False
    if sbom_digest(sbom_bytes) != vc.sbom_claims.sbom_digest:
        return False
    return verify_vc(vc, state, now, store).valid


# -- trust chain -------------------------------------------------------------

VALID = "valid"
FAILED = "failed"
DECLARED_UNVERIFIED = "declared-unverified"


@dataclass
class ChainNode:
    vc_id: str
    kind: VcKind
    depth: int
    status: str
    outcome: VerificationOutcome | None = None
    detail: str = ""
    children: list["ChainNode"] = field(default_factory=list)

    @property
    def subtree_valid(self) -> bool:
        return self.status != FAILED and all(c.subtree_valid for c in self.children)

    def walk(self) -> Iterator["ChainNode"]:
        yield self
        for child in self.children:
            yield from child.walk()

    def find(self, vc_id: str) -> "ChainNode":
        return next(n for n in self.walk() if n.vc_id == vc_id)

    def to_json(self) -> dict[str, Any]:
        return {
            "vcId": self.vc_id,
            "kind": self.kind.value,
            "depth": self.depth,
            "status": self.status,
            "detail": self.detail,
            "outcome": self.outcome.to_json() if self.outcome else None,
            "children": [c.to_json() for c in self.children],
        }


def _node_for(vc: VerifiableCredential, depth: int, state: LedgerState, now: int, store: VcSource | None) -> ChainNode:
    outcome = verify_vc(vc, state, now, store)
    if not outcome.valid:
        return ChainNode(vc.id, vc.vc_kind, depth, FAILED, outcome, "failed: " + ", ".join(outcome.failed))
    if vc.vc_kind is VcKind.COMPONENT_SBOM and not vc.embedded_refs:
        return ChainNode(vc.id, vc.vc_kind, depth, DECLARED_UNVERIFIED, outcome, "no embedded credentials")
    return ChainNode(vc.id, vc.vc_kind, depth, VALID, outcome)


def verify_trust_chain(
    root_vc: VerifiableCredential,
    state: LedgerState,
    now: int,
    store: VcSource | None = None,
    max_depth: int = 8,
) -> ChainNode:
    """Breadth-first verification of ``root_vc`` and everything it embeds."""
    if not root_vc.vc_kind.is_sbom:
        raise ValueError("trust chains start at an SBOM credential")
    root = _node_for(root_vc, 0, state, now, store)
    queue: deque[tuple[ChainNode, VerifiableCredential]] = deque([(root, root_vc)])
    seen = {root_vc.id}
    while queue:
        node, vc = queue.popleft()
        if vc.embedded_refs and node.depth >= max_depth:
            raise DepthExceeded(f"{vc.id} at depth {node.depth} embeds further credentials (max {max_depth})")
        for ref in vc.embedded_refs:
            child_vc = _fetch(ref, store)
            if child_vc is None:
                raise DanglingRef(f"{ref.vc_id} referenced by {vc.id} cannot be found")
            if child_vc.digest() != ref.vc_digest or child_vc.id != ref.vc_id:
                child = ChainNode(ref.vc_id, child_vc.vc_kind, node.depth + 1, FAILED, None, "embedded digest mismatch")
                node.children.append(child)
                continue
            child = _node_for(child_vc, node.depth + 1, state, now, store)
            node.children.append(child)
            if child_vc.id not in seen:
                seen.add(child_vc.id)
                queue.append((child, child_vc))
    return root
