"""Deterministic in-process permissioned ledger.

A single sequencer (:class:`LedgerNode`) collects signed transactions in a
pending pool and seals them into timestamped blocks on a simulated clock.
State is a pure fold of the genesis configuration and the ordered
transactions, so replaying a block log reproduces it exactly.

Registries:

* DID registry: document history per DID.
* Eligibility VC registry: status of eligibility credentials.
* SBOM VC registry: status and supersession of SBOM credentials.
* Penalty registry: penalty history per vendor; crossing the configured
  threshold revokes the vendor's active eligibility in the same transition.
"""

from __future__ import annotations

import json
import threading
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Iterable

from .encoding import ZERO_DIGEST, canonical_json, expect_keys, from_hex, sha256
from .identity import (
    ACTIVE,
    Did,
    DidDocument,
    KeyPair,
    apply_deactivation,
    apply_update,
    update_body,
    verify_signature,
)
from .merkle import merkle_root

REVOKED = "revoked"
DEFAULT_GENESIS_TIME = 1_704_067_200  # 2024-01-01T00:00:00Z
DEFAULT_BLOCK_INTERVAL = 12
DEFAULT_PENALTY_THRESHOLD = 100


class TxKind(str, Enum):
    DID_REGISTER = "did_register"
    DID_UPDATE = "did_update"
    DID_DEACTIVATE = "did_deactivate"
    ELIG_REGISTER = "elig_register"
    SBOM_REGISTER = "sbom_register"
    SBOM_UPDATE = "sbom_update"
    VC_REVOKE = "vc_revoke"
    PENALTY_RECORD = "penalty_record"


class Registry(str, Enum):
    DID = "did"
    ELIGIBILITY = "eligibility"
    SBOM = "sbom"
    PENALTY = "penalty"


class LedgerError(Exception):
    pass


class SubmissionError(LedgerError):
    pass


class BadSignature(SubmissionError):
    pass


class DuplicateTx(SubmissionError):
    pass


class InactiveSender(SubmissionError):
    pass


class TxRejected(LedgerError):
    """A transaction that fails its state-machine transition."""


class Unauthorized(TxRejected):
    pass


class UnknownSubject(TxRejected):
    pass


class InvalidTransition(TxRejected):
    pass


class MalformedTransaction(TxRejected):
    pass


class RecordNotFound(LedgerError):
    pass


class ChainIntegrityError(LedgerError):
    def __init__(self, height: int, message: str):
        super().__init__(f"block {height}: {message}")
        self.height = height


# -- transactions ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Transaction:
    sender: str
    kind: TxKind
    payload: dict[str, Any]
    nonce: int = 0
    signature: bytes = b""

    def body(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "nonce": self.nonce, "payload": self.payload, "sender": self.sender}

    def signing_bytes(self) -> bytes:
        return canonical_json(self.body())

    @property
    def tx_id(self) -> bytes:
        return sha256(self.signing_bytes())

    @classmethod
    def create(cls, keys: KeyPair, sender: Did | str, kind: TxKind, payload: dict[str, Any], nonce: int = 0) -> "Transaction":
        unsigned = cls(str(sender), TxKind(kind), payload, nonce)
        return replace(unsigned, signature=keys.sign(unsigned.signing_bytes()))

    def to_json(self) -> dict[str, Any]:
        return {**self.body(), "txId": self.tx_id.hex(), "signatureHex": self.signature.hex()}

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "Transaction":
        expect_keys(data, {"kind", "nonce", "payload", "sender", "txId", "signatureHex"}, "transaction")
        if not isinstance(data["payload"], dict) or not isinstance(data["nonce"], int):
            raise ValueError("transaction payload must be an object and nonce an integer")
        tx = cls(data["sender"], TxKind(data["kind"]), data["payload"], data["nonce"], from_hex(data["signatureHex"], 64))
        if tx.tx_id.hex() != data["txId"]:
            raise ValueError("txId does not match transaction content")
        return tx

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Transaction) and self.to_json() == other.to_json()

    def __hash__(self) -> int:
        return hash(self.tx_id)


@dataclass(frozen=True)
class Receipt:
    accepted: bool
    queued_at: int
    tx_id: bytes


@dataclass(frozen=True)
class TxResult:
    tx_id: bytes
    ok: bool
    error: str | None = None

    def to_json(self) -> dict[str, Any]:
        return {"txId": self.tx_id.hex(), "ok": self.ok, "error": self.error}

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "TxResult":
        expect_keys(data, {"txId", "ok", "error"}, "receipt")
        return cls(from_hex(data["txId"], 32), bool(data["ok"]), data["error"])


# -- registry records --------------------------------------------------------


@dataclass(frozen=True)
class DidRecord:
    document: DidDocument
    effective_at: int

    def to_json(self) -> dict[str, Any]:
        return {"document": self.document.to_json(), "effectiveAt": self.effective_at}


@dataclass(frozen=True)
class EligibilityRecord:
    vc_id: str
    digest: str
    issuer: str
    subject: str
    valid_until: int
    registered_at: int
    status: str = ACTIVE
    reason: str | None = None
    revoked_at: int | None = None

    def to_json(self) -> dict[str, Any]:
        return {
            "vcId": self.vc_id,
            "digest": self.digest,
            "issuer": self.issuer,
            "subject": self.subject,
            "validUntil": self.valid_until,
            "registeredAt": self.registered_at,
            "status": self.status,
            "reason": self.reason,
            "revokedAt": self.revoked_at,
        }


@dataclass(frozen=True)
class SbomRecord:
    vc_id: str
    digest: str
    issuer: str
    registered_at: int
    supersedes: str | None = None
    status: str = ACTIVE
    reason: str | None = None
    revoked_at: int | None = None

    def to_json(self) -> dict[str, Any]:
        return {
            "vcId": self.vc_id,
            "digest": self.digest,
            "issuer": self.issuer,
            "registeredAt": self.registered_at,
            "supersedes": self.supersedes,
            "status": self.status,
            "reason": self.reason,
            "revokedAt": self.revoked_at,
        }


@dataclass(frozen=True)
class PenaltyEntry:
    points: int
    reason: str
    timestamp: int

    def to_json(self) -> dict[str, Any]:
        return {"points": self.points, "reason": self.reason, "timestamp": self.timestamp}


@dataclass(frozen=True)
class LedgerConfig:
    block_interval_seconds: int = DEFAULT_BLOCK_INTERVAL
    penalty_threshold_points: int = DEFAULT_PENALTY_THRESHOLD

    def __post_init__(self):
        if self.block_interval_seconds < 1:
            raise ValueError("block interval must be at least one second")
        if self.penalty_threshold_points < 1:
            raise ValueError("penalty threshold must be positive")


@dataclass(frozen=True)
class GenesisConfig:
    """Everything block 0 commits to: the oversight DID and ledger policy."""

    oversight: DidDocument
    config: LedgerConfig = field(default_factory=LedgerConfig)
    genesis_time: int = DEFAULT_GENESIS_TIME

    def to_json(self) -> dict[str, Any]:
        return {
            "oversight": self.oversight.to_json(),
            "blockIntervalSeconds": self.config.block_interval_seconds,
            "penaltyThresholdPoints": self.config.penalty_threshold_points,
            "genesisTime": self.genesis_time,
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "GenesisConfig":
        expect_keys(data, {"oversight", "blockIntervalSeconds", "penaltyThresholdPoints", "genesisTime"}, "genesis")
        return cls(
            oversight=DidDocument.from_json(data["oversight"]),
            config=LedgerConfig(int(data["blockIntervalSeconds"]), int(data["penaltyThresholdPoints"])),
            genesis_time=int(data["genesisTime"]),
        )

    def save(self, path: Path) -> None:
        path.write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: Path) -> "GenesisConfig":
        return cls.from_json(json.loads(path.read_text()))


# -- state -------------------------------------------------------------------


@dataclass(frozen=True)
class LedgerState:
    """Immutable snapshot; transitions return a new state."""

    oversight: str
    config: LedgerConfig
    did_registry: dict[str, tuple[DidRecord, ...]] = field(default_factory=dict)
    elig_registry: dict[str, EligibilityRecord] = field(default_factory=dict)
    sbom_registry: dict[str, SbomRecord] = field(default_factory=dict)
    penalty_registry: dict[str, tuple[PenaltyEntry, ...]] = field(default_factory=dict)

    @classmethod
    def genesis(cls, genesis: GenesisConfig) -> "LedgerState":
        did = genesis.oversight.did
        return cls(
            oversight=did.rendered,
            config=genesis.config,
            did_registry={did.id: (DidRecord(genesis.oversight, genesis.genesis_time),)},
        )

    def document(self, did: str) -> DidDocument | None:
        try:
            history = self.did_registry.get(Did.parse(did).id)
        except ValueError:
            return None
        return history[-1].document if history else None

    def document_at(self, did: str, timestamp: int) -> DidDocument | None:
        """Document version in force at ``timestamp``."""
        try:
            history = self.did_registry.get(Did.parse(did).id, ())
        except ValueError:
            return None
        current = None
        for record in history:
            if record.effective_at <= timestamp:
                current = record.document
        return current

    def is_active(self, did: str) -> bool:
        doc = self.document(did)
        return doc is not None and doc.active

    def active_eligibility(self, vendor: str, now: int) -> list[EligibilityRecord]:
        return [
            r
            for r in self.elig_registry.values()
            if r.subject == vendor and r.status == ACTIVE and r.valid_until > now
        ]

    def penalty_points(self, vendor: str) -> int:
        return sum(e.points for e in self.penalty_registry.get(vendor, ()))

    def to_json(self) -> dict[str, Any]:
        return {
            "oversight": self.oversight,
            "config": {
                "blockIntervalSeconds": self.config.block_interval_seconds,
                "penaltyThresholdPoints": self.config.penalty_threshold_points,
            },
            "didRegistry": {k: [r.to_json() for r in v] for k, v in self.did_registry.items()},
            "eligRegistry": {k: r.to_json() for k, r in self.elig_registry.items()},
            "sbomRegistry": {k: r.to_json() for k, r in self.sbom_registry.items()},
            "penaltyRegistry": {k: [e.to_json() for e in v] for k, v in self.penalty_registry.items()},
        }

    def state_hash(self) -> bytes:
        return sha256(canonical_json(self.to_json()))


def query_registry(state: LedgerState, registry: Registry | str, key: str) -> Any:
    """Read-only lookup; DID keys may be rendered DIDs or bare ids."""
    registry = Registry(registry)
    if registry is Registry.DID:
        ident = Did.parse(key).id if key.startswith("did:") else key
        found = state.did_registry.get(ident)
    elif registry is Registry.ELIGIBILITY:
        found = state.elig_registry.get(key)
    elif registry is Registry.SBOM:
        found = state.sbom_registry.get(key)
    else:
        found = state.penalty_registry.get(key)
    if found is None:
        raise RecordNotFound(f"{registry.value} registry has no entry {key!r}")
    return found


# -- validation and transitions ----------------------------------------------


def validate_transaction(state: LedgerState, tx: Transaction) -> None:
    """Block-level checks: sender status and signature."""
    if tx.kind is TxKind.DID_REGISTER:
        try:
            key = from_hex(tx.payload["document"]["publicKeyHex"], 32)
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedTransaction(f"did_register without a usable public key: {exc}") from exc
    else:
        doc = state.document(tx.sender)
        if doc is None or not doc.active:
            raise InactiveSender(f"{tx.sender} is not an active DID")
        key = doc.public_key
    if not verify_signature(key, tx.signing_bytes(), tx.signature):
        raise BadSignature(f"signature does not verify for {tx.sender}")


def _field(payload: dict[str, Any], name: str, kind: type | tuple[type, ...] = str) -> Any:
    value = payload.get(name)
    if not isinstance(value, kind) or isinstance(value, bool) and kind is int:
        raise MalformedTransaction(f"payload field {name!r} missing or mistyped")
    return value


def _require_oversight(state: LedgerState, tx: Transaction) -> None:
    if tx.sender != state.oversight:
        raise Unauthorized(f"{tx.kind.value} is reserved for the oversight authority")


def _require_eligible(state: LedgerState, sender: str, timestamp: int) -> None:
    if not state.active_eligibility(sender, timestamp):
        raise Unauthorized(f"{sender} holds no active eligibility registration")


def _vc_id_free(state: LedgerState, vc_id: str) -> None:
    if not vc_id:
        raise MalformedTransaction("empty vcId")
    if vc_id in state.elig_registry or vc_id in state.sbom_registry:
        raise InvalidTransition(f"{vc_id} is already registered")


def _did_register(state: LedgerState, tx: Transaction, ts: int) -> LedgerState:
    try:
        document = DidDocument.from_json(_field(tx.payload, "document", dict))
    except (KeyError, ValueError) as exc:
        raise MalformedTransaction(f"bad DID document: {exc}") from exc
    if document.did != Did.from_public_key(document.public_key):
        raise InvalidTransition("DID is not derived from its public key")
    if tx.sender != document.did.rendered:
        raise Unauthorized("a DID registers itself")
    if document.version != 1 or not document.active:
        raise InvalidTransition("new documents start at version 1, active")
    if document.did.id in state.did_registry:
        raise InvalidTransition(f"{document.did.rendered} is already registered")
    registry = {**state.did_registry, document.did.id: (DidRecord(document, ts),)}
    return replace(state, did_registry=registry)


def _did_change(state: LedgerState, tx: Transaction, ts: int) -> LedgerState:
    target = _field(tx.payload, "did")
    if target != tx.sender:
        raise Unauthorized("only the DID controller may change its document")
    history = state.did_registry[Did.parse(target).id]
    current = history[-1].document
    if not current.active:
        raise InvalidTransition(f"{target} is deactivated")
    if _field(tx.payload, "version", int) != current.version + 1:
        raise InvalidTransition(f"version must be {current.version + 1}")
    try:
        proof = from_hex(_field(tx.payload, "proof"), 64)
    except ValueError as exc:
        raise MalformedTransaction(f"bad proof: {exc}") from exc
    if not verify_signature(current.public_key, canonical_json(update_body(tx.payload)), proof):
        raise Unauthorized("document change is not signed by the current key")
    if tx.kind is TxKind.DID_UPDATE:
        try:
            updated = apply_update(current, tx.payload)
        except (KeyError, ValueError) as exc:
            raise MalformedTransaction(f"bad update: {exc}") from exc
    else:
        updated = apply_deactivation(current)
    registry = {**state.did_registry, current.did.id: history + (DidRecord(updated, ts),)}
    return replace(state, did_registry=registry)


def _elig_register(state: LedgerState, tx: Transaction, ts: int) -> LedgerState:
    _require_oversight(state, tx)
    vc_id = _field(tx.payload, "vcId")
    subject = _field(tx.payload, "subject")
    if _field(tx.payload, "issuer") != tx.sender:
        raise Unauthorized("issuer must be the sender")
    if not state.is_active(subject):
        raise UnknownSubject(f"{subject} is not an active DID")
    _vc_id_free(state, vc_id)
    record = EligibilityRecord(
        vc_id=vc_id,
        digest=_field(tx.payload, "vcDigest"),
        issuer=tx.sender,
        subject=subject,
        valid_until=_field(tx.payload, "validUntil", int),
        registered_at=ts,
    )
    return replace(state, elig_registry={**state.elig_registry, vc_id: record})


def _sbom_register(state: LedgerState, tx: Transaction, ts: int) -> LedgerState:
    if _field(tx.payload, "issuer") != tx.sender:
        raise Unauthorized("issuer must be the sender")
    _require_eligible(state, tx.sender, ts)
    vc_id = _field(tx.payload, "vcId")
    _vc_id_free(state, vc_id)
    registry = dict(state.sbom_registry)
    supersedes = None
    if tx.kind is TxKind.SBOM_UPDATE:
        supersedes = _field(tx.payload, "supersedes")
        old = registry.get(supersedes)
        if old is None:
            raise UnknownSubject(f"{supersedes} is not a registered SBOM VC")
        if old.issuer != tx.sender:
            raise Unauthorized("only the issuer may supersede an SBOM VC")
        if not _field(tx.payload, "retainOld", bool) and old.status == ACTIVE:
            registry[supersedes] = replace(old, status=REVOKED, reason=f"superseded by {vc_id}", revoked_at=ts)
    registry[vc_id] = SbomRecord(
        vc_id=vc_id,
        digest=_field(tx.payload, "vcDigest"),
        issuer=tx.sender,
        registered_at=ts,
        supersedes=supersedes,
    )
    return replace(state, sbom_registry=registry)


def _vc_revoke(state: LedgerState, tx: Transaction, ts: int) -> LedgerState:
    vc_id = _field(tx.payload, "vcId")
    reason = _field(tx.payload, "reason")
    if vc_id in state.elig_registry:
        record = state.elig_registry[vc_id]
        allowed = tx.sender in (record.issuer, state.oversight)
    elif vc_id in state.sbom_registry:
        record = state.sbom_registry[vc_id]
        allowed = tx.sender == record.issuer
    else:
        raise UnknownSubject(f"{vc_id} is not registered")
    if not allowed:
        raise Unauthorized(f"{tx.sender} may not revoke {vc_id}")
    if record.status != ACTIVE:
        raise InvalidTransition(f"{vc_id} is already revoked")
    revoked = replace(record, status=REVOKED, reason=reason, revoked_at=ts)
    if isinstance(revoked, EligibilityRecord):
        return replace(state, elig_registry={**state.elig_registry, vc_id: revoked})
    return replace(state, sbom_registry={**state.sbom_registry, vc_id: revoked})


def _penalty_record(state: LedgerState, tx: Transaction, ts: int) -> LedgerState:
    _require_oversight(state, tx)
    vendor = _field(tx.payload, "vendor")
    points = _field(tx.payload, "points", int)
    reason = _field(tx.payload, "reason")
    if points <= 0:
        raise MalformedTransaction("penalty points must be positive")
    if state.document(vendor) is None:
        raise UnknownSubject(f"{vendor} is not a registered DID")
    history = state.penalty_registry.get(vendor, ()) + (PenaltyEntry(points, reason, ts),)
    new = replace(state, penalty_registry={**state.penalty_registry, vendor: history})
    total = sum(e.points for e in history)
    if total >= state.config.penalty_threshold_points:
        elig = dict(new.elig_registry)
        for vc_id, record in elig.items():
            if record.subject == vendor and record.status == ACTIVE:
                elig[vc_id] = replace(
                    record,
                    status=REVOKED,
                    reason=f"penalty threshold reached ({total} points)",
                    revoked_at=ts,
                )
        new = replace(new, elig_registry=elig)
    return new


_TRANSITIONS = {
    TxKind.DID_REGISTER: _did_register,
    TxKind.DID_UPDATE: _did_change,
    TxKind.DID_DEACTIVATE: _did_change,
    TxKind.ELIG_REGISTER: _elig_register,
    TxKind.SBOM_REGISTER: _sbom_register,
    TxKind.SBOM_UPDATE: _sbom_register,
    TxKind.VC_REVOKE: _vc_revoke,
    TxKind.PENALTY_RECORD: _penalty_record,
}


def apply_transaction(state: LedgerState, tx: Transaction, timestamp: int) -> LedgerState:
    """Kind-specific transition; raises :class:`TxRejected` and never mutates ``state``."""
    try:
        return _TRANSITIONS[tx.kind](state, tx, timestamp)
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedTransaction(f"{tx.kind.value}: {exc}") from exc


# -- blocks ------------------------------------------------------------------


def tx_root(tx_ids: Iterable[bytes]) -> bytes:
    leaves = [sha256(b"\x00" + t) for t in tx_ids]
    return merkle_root(leaves) if leaves else ZERO_DIGEST


@dataclass(frozen=True, eq=False)
class Block:
    height: int
    timestamp: int
    prev_hash: bytes
    transactions: tuple[Transaction, ...] = ()
    results: tuple[TxResult, ...] = ()
    genesis: dict[str, Any] | None = None

    @property
    def tx_root(self) -> bytes:
        return tx_root(t.tx_id for t in self.transactions)

    @property
    def body_hash(self) -> bytes:
        body = {
            "transactions": [t.to_json() for t in self.transactions],
            "receipts": [r.to_json() for r in self.results],
        }
        return sha256(canonical_json(body))

    def header(self) -> dict[str, Any]:
        return {
            "height": self.height,
            "timestamp": self.timestamp,
            "prevHash": self.prev_hash.hex(),
            "txRoot": self.tx_root.hex(),
            "bodyHash": self.body_hash.hex(),
            "genesis": self.genesis,
        }

    @property
    def hash(self) -> bytes:
        return sha256(canonical_json(self.header()))

    def to_json(self) -> dict[str, Any]:
        return {
            **self.header(),
            "hash": self.hash.hex(),
            "transactions": [t.to_json() for t in self.transactions],
            "receipts": [r.to_json() for r in self.results],
        }

    def to_line(self) -> bytes:
        return canonical_json(self.to_json())

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "Block":
        expect_keys(
            data,
            {"height", "timestamp", "prevHash", "txRoot", "bodyHash", "genesis", "hash", "transactions", "receipts"},
            "block",
        )
        block = cls(
            height=data["height"],
            timestamp=data["timestamp"],
            prev_hash=from_hex(data["prevHash"], 32),
            transactions=tuple(Transaction.from_json(t) for t in data["transactions"]),
            results=tuple(TxResult.from_json(r) for r in data["receipts"]),
            genesis=data["genesis"],
        )
        header = block.header()
        for key in ("txRoot", "bodyHash"):
            if header[key] != data[key]:
                raise ValueError(f"{key} does not match block content")
        if block.hash.hex() != data["hash"]:
            raise ValueError("header hash mismatch")
        return block

    @classmethod
    def from_line(cls, line: bytes) -> "Block":
        block = cls.from_json(json.loads(line.decode("utf-8")))
        if block.to_line() != line:
            raise ValueError("block line is not in canonical form")
        return block


def genesis_block(genesis: GenesisConfig) -> Block:
    return Block(0, genesis.genesis_time, ZERO_DIGEST, genesis=genesis.to_json())


def apply_block(state: LedgerState, block: Block) -> tuple[LedgerState, tuple[TxResult, ...]]:
    """Apply every transaction; failures are recorded and leave state untouched."""
    results = []
    for tx in block.transactions:
        try:
            validate_transaction(state, tx)
            state = apply_transaction(state, tx, block.timestamp)
        except (SubmissionError, TxRejected) as exc:
            results.append(TxResult(tx.tx_id, False, type(exc).__name__))
        else:
            results.append(TxResult(tx.tx_id, True))
    return state, tuple(results)


# -- node --------------------------------------------------------------------


class LedgerNode:
    """Single-sequencer ledger with a thread-safe pending pool.

    ``state`` is always an immutable snapshot, so readers never need a lock.
    """

    def __init__(self, genesis: GenesisConfig):
        self.genesis = genesis
        self.blocks: list[Block] = [genesis_block(genesis)]
        self._state = LedgerState.genesis(genesis)
        self._pending: deque[tuple[Transaction, int]] = deque()
        self._pending_ids: set[bytes] = set()
        self._committed_ids: set[bytes] = set()
        self._lock = threading.Lock()

    @property
    def state(self) -> LedgerState:
        return self._state

    @property
    def head(self) -> Block:
        return self.blocks[-1]

    @property
    def config(self) -> LedgerConfig:
        return self.genesis.config

    @property
    def pending_count(self) -> int:
        return len(self._pending)

    def next_block_time(self) -> int:
        return self.head.timestamp + self.config.block_interval_seconds

    def submit_transaction(self, tx: Transaction, now: int | None = None) -> Receipt:
        queued_at = self.head.timestamp if now is None else now
        with self._lock:
            if tx.tx_id in self._pending_ids or tx.tx_id in self._committed_ids:
                raise DuplicateTx(f"transaction {tx.tx_id.hex()[:16]} already seen")
            validate_transaction(self._state, tx)
            self._pending.append((tx, queued_at))
            self._pending_ids.add(tx.tx_id)
        return Receipt(True, queued_at, tx.tx_id)

    def produce_block(self, now: int) -> Block | None:
        with self._lock:
            if now < self.next_block_time():
                return None
            txs = tuple(tx for tx, _ in self._pending)
            self._pending.clear()
            self._pending_ids.clear()
            head = self.head
            draft = Block(head.height + 1, now, head.hash, txs)
            state, results = apply_block(self._state, draft)
            block = replace(draft, results=results)
            self.blocks.append(block)
            self._committed_ids.update(tx.tx_id for tx in txs)
            self._state = state
        return block

    def seal(self, now: int | None = None) -> Block:
        """Produce a block at ``now`` or at the earliest permitted time."""
        when = max(now or 0, self.next_block_time())
        block = self.produce_block(when)
        assert block is not None
        return block

    def submit_and_seal(self, *txs: Transaction) -> Block:
        for tx in txs:
            self.submit_transaction(tx)
        return self.seal()

    def result_of(self, tx: Transaction) -> TxResult | None:
        for block in reversed(self.blocks):
            for result in block.results:
                if result.tx_id == tx.tx_id:
                    return result
        return None

    def query(self, registry: Registry | str, key: str) -> Any:
        return query_registry(self._state, registry, key)

    # persistence

    def save(self, path: Path) -> None:
        with open(path, "wb") as fh:
            for block in self.blocks:
                fh.write(block.to_line() + b"\n")

    def append_new_blocks(self, path: Path, since_height: int) -> None:
        with open(path, "ab") as fh:
            for block in self.blocks[since_height + 1:]:
                fh.write(block.to_line() + b"\n")

    @classmethod
    def replay(cls, genesis: GenesisConfig, blocks: Iterable[Block]) -> "LedgerNode":
        """Rebuild a node from blocks, re-executing every transaction."""
        node = cls(genesis)
        blocks = list(blocks)
        if not blocks or blocks[0].to_line() != node.blocks[0].to_line():
            raise ChainIntegrityError(0, "genesis block does not match genesis config")
        for block in blocks[1:]:
            prev = node.head
            if block.height != prev.height + 1:
                raise ChainIntegrityError(block.height, "heights are not contiguous")
            if block.prev_hash != prev.hash:
                raise ChainIntegrityError(block.height, "prev_hash does not match previous header")
            if block.timestamp < prev.timestamp + genesis.config.block_interval_seconds:
                raise ChainIntegrityError(block.height, "block produced before its interval elapsed")
            if any(t.tx_id in node._committed_ids for t in block.transactions):
                raise ChainIntegrityError(block.height, "transaction replayed")
            state, results = apply_block(node._state, block)
            if results != block.results:
                raise ChainIntegrityError(block.height, "recorded receipts differ from re-execution")
            node.blocks.append(block)
            node._committed_ids.update(t.tx_id for t in block.transactions)
            node._state = state
        return node

    @classmethod
    def load(cls, genesis: GenesisConfig, path: Path) -> "LedgerNode":
        return cls.replay(genesis, read_block_log(path))


def read_block_log(path: Path) -> list[Block]:
    blocks = []
    for n, line in enumerate(Path(path).read_bytes().splitlines()):
        try:
            blocks.append(Block.from_line(line))
        except (ValueError, KeyError, TypeError) as exc:
            raise ChainIntegrityError(n, f"unreadable block: {exc}") from exc
    return blocks


def verify_chain(blocks: list[Block]) -> None:
    """Structural integrity only: linkage and contiguous heights."""
    for prev, block in zip(blocks, blocks[1:]):
        if block.height != prev.height + 1:
            raise ChainIntegrityError(block.height, "heights are not contiguous")
        if block.prev_hash != prev.hash:
            raise ChainIntegrityError(block.height, "prev_hash does not match previous header")
