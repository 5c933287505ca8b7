import json
from dataclasses import dataclass

import pytest
from hypothesis import settings

from trustchain.credentials import EmbeddedRef, SbomMetadata, VcKind, issue_eligibility_vc, issue_sbom_vc
from trustchain.encoding import sha256
from trustchain.identity import create_identity
from trustchain.ledger import GenesisConfig, LedgerConfig, LedgerNode, Transaction, TxKind
from trustchain.merkle import build_commitment
from trustchain.sbom import parse_spdx, sbom_digest
from trustchain.scenarios import fixture_bytes

settings.register_profile("default", deadline=None)
settings.load_profile("default")

YEAR = 365 * 86400


def seed(label: str) -> bytes:
    return sha256(label.encode())


@dataclass
class Party:
    keys: object
    did: object
    doc: object

    @property
    def id(self) -> str:
        return self.did.rendered


def party(label: str, endpoint=None) -> Party:
    return Party(*create_identity(seed(label), endpoint))


class MemoryStore:
    def __init__(self):
        self.vcs = {}

    def put(self, vc):
        self.vcs[vc.id] = vc
        return vc

    def get(self, vc_id):
        return self.vcs.get(vc_id)


class World:
    """A ledger with an oversight authority and helpers for onboarding."""

    def __init__(self, threshold: int = 100):
        self.oversight = party("oversight")
        self.node = LedgerNode(GenesisConfig(self.oversight.doc, LedgerConfig(12, threshold)))
        self.store = MemoryStore()

    @property
    def state(self):
        return self.node.state

    @property
    def now(self) -> int:
        return self.node.head.timestamp

    def seal(self, *txs):
        block = self.node.submit_and_seal(*txs)
        return block

    def seal_ok(self, *txs):
        block = self.seal(*txs)
        bad = [r.error for r in block.results if not r.ok]
        assert not bad, bad
        return block

    def register(self, label: str) -> Party:
        p = party(label)
        self.seal_ok(Transaction.create(p.keys, p.did, TxKind.DID_REGISTER, {"document": p.doc.to_json()}))
        return p

    def certify(self, vendor: Party, valid_for: int = YEAR):
        vc, tx = issue_eligibility_vc(
            self.oversight.keys, self.oversight.did, vendor.did, ["sdf"], self.now + valid_for, self.state, self.now
        )
        self.seal_ok(tx)
        return self.store.put(vc)

    def vendor(self, label: str) -> tuple[Party, object]:
        p = self.register(label)
        return p, self.certify(p)

    def issue(self, vendor: Party, refs=(), kind=VcKind.COMPONENT_SBOM, data: bytes | None = None, salt_label="salt"):
        data = fixture_bytes() if data is None else data
        sbom = parse_spdx(data)
        commitment = build_commitment(sbom, seed(salt_label + vendor.id))
        vc, tx = issue_sbom_vc(
            vendor.keys, vendor.did, kind, commitment, sbom_digest(data),
            SbomMetadata.from_sbom(sbom, vendor.did), [EmbeddedRef.of(r) for r in refs], self.state, self.now,
        )
        self.seal_ok(tx)
        return self.store.put(vc), sbom, commitment


@pytest.fixture
def world():
    return World()


@pytest.fixture
def spdx_doc():
    return json.loads(fixture_bytes())


@pytest.fixture
def spdx_bytes():
    return fixture_bytes()


def populate(world: World, n_tx: int = 200) -> int:
    """Drive ``world`` through a mixed workload of exactly ``n_tx`` transactions.

    Every eighth round includes a transaction the registries reject, so the
    log carries failure receipts too.
    """
    from trustchain.credentials import revoke_vc

    count = 0
    vendors = []
    while count < n_tx:
        i = len(vendors)
        p = party(f"load-{i}")
        batch = [Transaction.create(p.keys, p.did, TxKind.DID_REGISTER, {"document": p.doc.to_json()})]
        world.seal(*batch[: n_tx - count])
        count += len(batch[: n_tx - count])
        if count >= n_tx:
            break
        elig = world.certify(p)
        count += 1
        vendors.append((p, elig))
        for j in range(3):
            if count >= n_tx:
                break
            world.issue(p, [elig], salt_label=f"load-{i}-{j}")
            count += 1
        if count < n_tx and i % 8 == 7:
            # rejected: a vendor may not record penalties
            world.seal(Transaction.create(p.keys, p.did, TxKind.PENALTY_RECORD, {"vendor": p.id, "points": 1, "reason": "x"}))
            count += 1
        if count < n_tx and i % 3 == 2:
            world.seal_ok(
                Transaction.create(world.oversight.keys, world.oversight.did, TxKind.PENALTY_RECORD,
                                   {"vendor": p.id, "points": 40, "reason": f"late disclosure {i}"})
            )
            count += 1
        if count < n_tx and i % 4 == 1:
            world.seal_ok(revoke_vc(world.oversight.keys, world.oversight.did, elig.id, "audit", world.state))
            count += 1
    return count


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if passed else 'FAIL'} | {detail}")
