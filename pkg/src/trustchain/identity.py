"""Ed25519 identities and ``did:sbomx`` documents."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Any

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey, Ed25519PublicKey

from .encoding import canonical_json, expect_keys, from_hex, sha256

if TYPE_CHECKING:
    from .ledger import LedgerState

DID_METHOD = "sbomx"
DID_PREFIX = f"did:{DID_METHOD}:"
DID_ID_BYTES = 20
ACTIVE = "active"
DEACTIVATED = "deactivated"


class IdentityError(Exception):
    pass


class BadSignature(IdentityError):
    pass


class NotFound(IdentityError):
    pass


class Deactivated(IdentityError):
    def __init__(self, message: str, document: "DidDocument | None" = None):
        super().__init__(message)
        self.document = document


class AlreadyDeactivated(Deactivated):
    pass


def sign(signing_key: bytes, message: bytes) -> bytes:
    return Ed25519PrivateKey.from_private_bytes(signing_key).sign(message)


def verify_signature(verifying_key: bytes, message: bytes, signature: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(verifying_key).verify(signature, message)
    except (InvalidSignature, ValueError):
        return False
    return True


@dataclass(frozen=True)
class KeyPair:
    signing_key: bytes
    verifying_key: bytes
    _private: Ed25519PrivateKey | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self._private is None:
            object.__setattr__(self, "_private", Ed25519PrivateKey.from_private_bytes(self.signing_key))

    @classmethod
    def from_seed(cls, seed: bytes) -> "KeyPair":
        if len(seed) != 32:
            raise ValueError("Ed25519 seeds are 32 bytes")
        private = Ed25519PrivateKey.from_private_bytes(seed)
        raw = private.public_key().public_bytes(serialization.Encoding.Raw, serialization.PublicFormat.Raw)
        return cls(seed, raw, private)

    def sign(self, message: bytes) -> bytes:
        return self._private.sign(message)

    def __repr__(self) -> str:
        return f"KeyPair(verifying_key={self.verifying_key.hex()})"


@dataclass(frozen=True, order=True)
class Did:
    id: str

    @property
    def method(self) -> str:
        return DID_METHOD

    @property
    def rendered(self) -> str:
        return DID_PREFIX + self.id

    @classmethod
    def from_public_key(cls, verifying_key: bytes) -> "Did":
        return cls(sha256(verifying_key)[:DID_ID_BYTES].hex())

    @classmethod
    def parse(cls, rendered: str) -> "Did":
        if not rendered.startswith(DID_PREFIX):
            raise ValueError(f"not a did:{DID_METHOD} identifier: {rendered!r}")
        ident = rendered[len(DID_PREFIX):]
        from_hex(ident, DID_ID_BYTES)
        return cls(ident)

    def __str__(self) -> str:
        return self.rendered


@dataclass(frozen=True)
class DidDocument:
    did: Did
    public_key: bytes
    service_endpoint: str | None = None
    version: int = 1
    status: str = ACTIVE

    @property
    def active(self) -> bool:
        return self.status == ACTIVE

    def to_json(self) -> dict[str, Any]:
        return {
            "id": self.did.rendered,
            "publicKeyHex": self.public_key.hex(),
            "serviceEndpoint": self.service_endpoint,
            "version": self.version,
            "status": self.status,
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "DidDocument":
        expect_keys(data, {"id", "publicKeyHex", "serviceEndpoint", "version", "status"}, "DID document")
        version = data["version"]
        if not isinstance(version, int) or isinstance(version, bool) or version < 1:
            raise ValueError(f"bad DID document version {version!r}")
        endpoint = data["serviceEndpoint"]
        if endpoint is not None and not isinstance(endpoint, str):
            raise ValueError("serviceEndpoint must be a string or null")
        if data["status"] not in (ACTIVE, DEACTIVATED):
            raise ValueError(f"unknown DID status {data['status']!r}")
        return cls(
            did=Did.parse(data["id"]),
            public_key=from_hex(data["publicKeyHex"], 32),
            service_endpoint=endpoint,
            version=version,
            status=data["status"],
        )


def create_identity(seed: bytes, service_endpoint: str | None = None) -> tuple[KeyPair, Did, DidDocument]:
    keys = KeyPair.from_seed(seed)
    did = Did.from_public_key(keys.verifying_key)
    return keys, did, DidDocument(did, keys.verifying_key, service_endpoint)


def resolve_did(state: "LedgerState", did: Did, allow_deactivated: bool = False) -> DidDocument:
    """Latest registered document for ``did``.

    A deactivated DID raises :class:`Deactivated` carrying its final
    document unless ``allow_deactivated`` is set.
    """
    history = state.did_registry.get(did.id)
    if not history:
        raise NotFound(f"{did.rendered} is not registered")
    document = history[-1].document
    if not document.active and not allow_deactivated:
        raise Deactivated(f"{did.rendered} is deactivated", document)
    return document


def _owner_proof(document: DidDocument, body: dict[str, Any], signed_by: bytes) -> str:
    if not document.active:
        raise AlreadyDeactivated(f"{document.did.rendered} is deactivated", document)
    if KeyPair.from_seed(signed_by).verifying_key != document.public_key:
        raise BadSignature(f"signer does not control {document.did.rendered}")
    return sign(signed_by, canonical_json(body)).hex()


def update_body(payload: dict[str, Any]) -> dict[str, Any]:
    """The part of a DID update/deactivation payload covered by ``proof``."""
    return {k: v for k, v in payload.items() if k != "proof"}


def rotate_key(
    document: DidDocument,
    new_key: bytes,
    signed_by: bytes,
    service_endpoint: str | None = None,
) -> dict[str, Any]:
    """Payload for a ``did_update`` transaction replacing the public key.

    ``signed_by`` is the current signing key; the payload proof is checked
    again by the DID registry when the transaction is applied.
    """
    if len(new_key) != 32:
        raise ValueError("verifying keys are 32 bytes")
    body = {
        "did": document.did.rendered,
        "publicKeyHex": new_key.hex(),
        "serviceEndpoint": service_endpoint if service_endpoint is not None else document.service_endpoint,
        "version": document.version + 1,
    }
    return {**body, "proof": _owner_proof(document, body, signed_by)}


def deactivate_did(document: DidDocument, signed_by: bytes) -> dict[str, Any]:
    """Payload for a ``did_deactivate`` transaction."""
    body = {"did": document.did.rendered, "version": document.version + 1}
    return {**body, "proof": _owner_proof(document, body, signed_by)}


def apply_update(document: DidDocument, payload: dict[str, Any]) -> DidDocument:
    return replace(
        document,
        public_key=from_hex(payload["publicKeyHex"], 32),
        service_endpoint=payload.get("serviceEndpoint"),
        version=document.version + 1,
    )


def apply_deactivation(document: DidDocument) -> DidDocument:
    return replace(document, version=document.version + 1, status=DEACTIVATED)
