"""Vendor-controlled off-chain storage and the on-disk CLI workspace.

Workspace layout::

    <workspace>/
      workspace.json          seed and defaults
      genesis.json            oversight DID document, block interval, penalty threshold
      ledger.jsonl            one canonical JSON block per line
      keys/<name>.key         hex Ed25519 seed, mode 0600
      identities.json         role name -> DID
      stores/<vendor>/        one OffChainStore per vendor
        sboms/<vc>.spdx.json  exact SBOM bytes
        commitments/<vc>.json salt seed and roots
        vcs/<vc>.json         credentials issued or held by the vendor
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Iterable, Iterator

from .credentials import VerifiableCredential
from .encoding import sha256
from .identity import Did, DidDocument, KeyPair, create_identity
from .ledger import GenesisConfig, LedgerConfig, LedgerNode, read_block_log
from .merkle import SbomCommitment


class StoreError(Exception):
    pass


class WorkspaceError(Exception):
    pass


def _slug(vc_id: str) -> str:
    return vc_id.rsplit(":", 1)[-1]


def _write_json(path: Path, data: object) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n")


class OffChainStore:
    """A single vendor's repository of SBOMs, salt seeds and credentials."""

    def __init__(self, root: Path | str):
        self.root = Path(root)

    def _path(self, kind: str, vc_id: str, suffix: str = ".json") -> Path:
        return self.root / kind / f"{_slug(vc_id)}{suffix}"

    def put_vc(self, vc: VerifiableCredential) -> Path:
        path = self._path("vcs", vc.id)
        _write_json(path, vc.to_json())
        return path

    def get(self, vc_id: str) -> VerifiableCredential | None:
        path = self._path("vcs", vc_id)
        if not path.exists():
            return None
        vc = VerifiableCredential.from_json(json.loads(path.read_text()))
        return vc if vc.id == vc_id else None

    def vc_ids(self) -> list[str]:
        folder = self.root / "vcs"
        if not folder.is_dir():
            return []
        ids = []
        for path in sorted(folder.glob("*.json")):
            ids.append(json.loads(path.read_text())["id"])
        return ids

    def put_sbom(self, vc_id: str, data: bytes, commitment: SbomCommitment) -> None:
        path = self._path("sboms", vc_id, ".spdx.json")
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
        commitment_path = self._path("commitments", vc_id)
        _write_json(commitment_path, commitment.to_json())
        os.chmod(commitment_path, 0o600)

    def get_sbom(self, vc_id: str) -> bytes:
        path = self._path("sboms", vc_id, ".spdx.json")
        if not path.exists():
            raise StoreError(f"no SBOM stored for {vc_id}")
        return path.read_bytes()

    def get_commitment(self, vc_id: str) -> SbomCommitment:
        path = self._path("commitments", vc_id)
        if not path.exists():
            raise StoreError(f"no commitment stored for {vc_id}")
        return SbomCommitment.from_json(json.loads(path.read_text()))

    def audit(self) -> list[str]:
        """Ids of stored SBOMs whose bytes no longer match their credential."""
        bad = []
        for vc_id in self.vc_ids():
            vc = self.get(vc_id)
            if vc is None or not vc.vc_kind.is_sbom:
                continue
            try:
                data = self.get_sbom(vc_id)
            except StoreError:
                continue
            if sha256(data) != vc.sbom_claims.sbom_digest:
                bad.append(vc_id)
        return bad


class CompositeSource:
    """Read-only union of several stores, as a verifier sees what it was handed."""

    def __init__(self, sources: Iterable[object]):
        self.sources = list(sources)

    def get(self, vc_id: str) -> VerifiableCredential | None:
        for source in self.sources:
            found = source.get(vc_id)
            if found is not None:
                return found
        return None


def identity_seed(workspace_seed: str, name: str) -> bytes:
    return sha256(f"trustchain-identity:{workspace_seed}:{name}".encode())


class Workspace:
    OVERSIGHT = "oversight"

    def __init__(self, root: Path | str, ledger_file: Path | str | None = None):
        self.root = Path(root)
        self.ledger_file = Path(ledger_file) if ledger_file else self.root / "ledger.jsonl"

    @property
    def genesis_file(self) -> Path:
        return self.root / "genesis.json"

    @property
    def initialized(self) -> bool:
        return self.genesis_file.exists() and (self.root / "workspace.json").exists()

    @property
    def seed(self) -> str:
        return json.loads((self.root / "workspace.json").read_text())["seed"]

    def init(self, seed: str, block_interval: int = 12, penalty_threshold: int = 100, genesis_time: int | None = None) -> GenesisConfig:
        if self.initialized:
            raise WorkspaceError(f"{self.root} is already initialized")
        self.root.mkdir(parents=True, exist_ok=True)
        _write_json(self.root / "workspace.json", {"seed": seed})
        keys, _, document = create_identity(identity_seed(seed, self.OVERSIGHT))
        self._save_identity(self.OVERSIGHT, keys, document.did)
        kwargs = {} if genesis_time is None else {"genesis_time": genesis_time}
        genesis = GenesisConfig(document, LedgerConfig(block_interval, penalty_threshold), **kwargs)
        genesis.save(self.genesis_file)
        LedgerNode(genesis).save(self.ledger_file)
        return genesis

    def genesis(self) -> GenesisConfig:
        if not self.initialized:
            raise WorkspaceError(f"{self.root} is not an initialized workspace (run `trustchain ledger init`)")
        return GenesisConfig.load(self.genesis_file)

    def load_node(self) -> LedgerNode:
        genesis = self.genesis()
        if not self.ledger_file.exists():
            return LedgerNode(genesis)
        return LedgerNode.replay(genesis, read_block_log(self.ledger_file))

    def persist(self, node: LedgerNode) -> None:
        node.save(self.ledger_file)

    # identities

    def _identities(self) -> dict[str, str]:
        path = self.root / "identities.json"
        return json.loads(path.read_text()) if path.exists() else {}

    def _save_identity(self, name: str, keys: KeyPair, did: Did) -> None:
        key_path = self.root / "keys" / f"{name}.key"
        key_path.parent.mkdir(parents=True, exist_ok=True)
        key_path.write_text(keys.signing_key.hex() + "\n")
        os.chmod(key_path, 0o600)
        names = self._identities()
        names[name] = did.rendered
        _write_json(self.root / "identities.json", names)

    def has_identity(self, name: str) -> bool:
        return name in self._identities()

    def new_identity(self, name: str, service_endpoint: str | None = None) -> tuple[KeyPair, Did, DidDocument]:
        if self.has_identity(name):
            raise WorkspaceError(f"identity {name!r} already exists")
        keys, did, document = create_identity(identity_seed(self.seed, name), service_endpoint)
        self._save_identity(name, keys, did)
        return keys, did, document

    def identity(self, name: str) -> tuple[KeyPair, Did]:
        rendered = self._identities().get(name)
        if rendered is None:
            raise WorkspaceError(f"unknown identity {name!r}")
        seed = bytes.fromhex((self.root / "keys" / f"{name}.key").read_text().strip())
        return KeyPair.from_seed(seed), Did.parse(rendered)

    def names(self) -> Iterator[str]:
        yield from self._identities()

    def store(self, vendor: str) -> OffChainStore:
        return OffChainStore(self.root / "stores" / vendor)

    def all_stores(self) -> CompositeSource:
        folder = self.root / "stores"
        roots = sorted(p for p in folder.iterdir() if p.is_dir()) if folder.is_dir() else []
        return CompositeSource(OffChainStore(p) for p in roots)
