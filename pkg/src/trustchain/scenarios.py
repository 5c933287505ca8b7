"""End-to-end runs of the three disclosure scenarios.

Each run replays the whole protocol on a fresh ledger seeded from the
workspace genesis: vendor onboarding, eligibility issuance, SBOM import and
commitment, SBOM credential issuance, the disclosure exchange and the
procurer's verification. Identities, salts and the simulated clock are all
derived from the workspace seed, so transcripts are reproducible.
"""

from __future__ import annotations

import json
import shutil
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable

from .credentials import (
    EmbeddedRef,
    SbomMetadata,
    VcKind,
    VerifiableCredential,
    issue_eligibility_vc,
    issue_sbom_vc,
    verify_trust_chain,
    verify_vc,
)
from .encoding import canonical_json, rfc3339, sha256
from .identity import create_identity
from .ledger import LedgerNode, Transaction, TxKind
from .merkle import (
    AbsenceProof,
    DisclosureProof,
    ProofError,
    build_commitment,
    prove_absence,
    prove_disclosure,
    prove_presence,
    verify_absence,
    verify_disclosure,
    verify_presence,
)
from .sbom import ComponentId, check_ntia_minimum, parse_spdx, sbom_digest
from .store import OffChainStore, Workspace, identity_seed

SCENARIOS = {1: "secure full disclosure", 2: "secure selective disclosure", 3: "secure need-to-know disclosure"}
TAMPERS = {
    "sbom-byte": {1},
    "proof": {2, 3},
    "revoke-eligibility": {1, 2, 3},
}
VULNERABLE_QUERY = "componentA@2"
PRESENT_QUERY = "redis-py@4.5.3"
ELIGIBILITY_DAYS = 365
VENDOR = "vendor-acme"


class ScenarioError(Exception):
    pass


def fixture_bytes(name: str = "product.spdx.json") -> bytes:
    return resources.files("trustchain.fixtures").joinpath(name).read_bytes()


@dataclass
class ScenarioResult:
    scenario: int
    exit_code: int
    transcript: list[str] = field(default_factory=list)
    failed_checks: list[str] = field(default_factory=list)

    @property
    def text(self) -> str:
        return "\n".join(self.transcript) + "\n"


class _Run:
    def __init__(self, scenario: int):
        self.result = ScenarioResult(scenario, 0)

    def say(self, line: str) -> None:
        self.result.transcript.append(line)

    def check(self, name: str, passed: bool, detail: str = "") -> bool:
        self.say(f"  [{'PASS' if passed else 'FAIL'}] {name}{': ' + detail if detail else ''}")
        if not passed:
            self.result.failed_checks.append(name)
        return passed


def _seal(run: _Run, node: LedgerNode, what: str, *txs: Transaction) -> None:
    block = node.submit_and_seal(*txs)
    for result in block.results:
        if not result.ok:
            raise ScenarioError(f"{what} rejected by ledger: {result.error}")
    run.say(f"ledger: block {block.height} @ {rfc3339(block.timestamp)} sealed {len(block.transactions)} tx ({what})")


def _tamper_value(proof_json: dict) -> None:
    entry = proof_json["entries"][0]
    entry["value"] = entry["value"] + "-patched"


def _tamper_neighbor(proof_json: dict) -> None:
    salt = bytearray(bytes.fromhex(proof_json["leftNeighbor"]["salt"]))
    salt[0] ^= 0x01
    proof_json["leftNeighbor"]["salt"] = salt.hex()


def run_scenario(
    scenario: int,
    workspace: Workspace | Path | str,
    tamper: str | None = None,
    sbom: bytes | None = None,
) -> ScenarioResult:
    """Execute scenario 1, 2 or 3; ``exit_code`` is 0 iff every check passes."""
    if scenario not in SCENARIOS:
        raise ScenarioError(f"unknown scenario {scenario}; choose 1, 2 or 3")
    if tamper is not None and scenario not in TAMPERS.get(tamper, ()):
        raise ScenarioError(f"tamper {tamper!r} does not apply to scenario {scenario}")
    ws = workspace if isinstance(workspace, Workspace) else Workspace(workspace)
    genesis = ws.genesis()
    oversight_keys, oversight_did = ws.identity(Workspace.OVERSIGHT)
    run_dir = ws.root / "scenarios" / str(scenario)
    if run_dir.exists():
        shutil.rmtree(run_dir)
    run_dir.mkdir(parents=True)

    run = _Run(scenario)
    run.say(f"== scenario {scenario}: {SCENARIOS[scenario]}" + (f" (tamper: {tamper})" if tamper else ""))
    node = LedgerNode(genesis)
    run.say(f"oversight: {oversight_did.rendered} (genesis)")

    # vendor onboarding
    vendor_keys, vendor_did, vendor_doc = create_identity(identity_seed(ws.seed, VENDOR), "https://acme.example/sbom")
    store = OffChainStore(run_dir / "stores" / VENDOR)
    _seal(run, node, "vendor DID registration",
          Transaction.create(vendor_keys, vendor_did, TxKind.DID_REGISTER, {"document": vendor_doc.to_json()}))
    run.say(f"vendor: registered {vendor_did.rendered}")

    now = node.head.timestamp
    elig, elig_tx = issue_eligibility_vc(
        oversight_keys, oversight_did, vendor_did, ["secure-development-framework", "vulnerability-disclosure"],
        now + ELIGIBILITY_DAYS * 86400, node.state, now,
    )
    _seal(run, node, "eligibility registration", elig_tx)
    store.put_vc(elig)
    run.say(f"oversight: issued eligibility {elig.id}")

    # SBOM import and credential issuance
    data = fixture_bytes() if sbom is None else sbom
    canonical = parse_spdx(data)
    report = check_ntia_minimum(canonical)
    run.say(f"vendor: imported SBOM with {len(canonical.attributes)} attributes, "
            f"{len(canonical.component_ids)} components; NTIA compliant={report.compliant}"
            + (f" missing={sorted(report.missing)}" if report.missing else ""))
    commitment = build_commitment(canonical, sha256(f"trustchain-salt:{ws.seed}:{scenario}".encode()))
    metadata = SbomMetadata.from_sbom(canonical, vendor_did)
    now = node.head.timestamp
    vc, vc_tx = issue_sbom_vc(
        vendor_keys, vendor_did, VcKind.COMPONENT_SBOM, commitment, sbom_digest(data), metadata,
        [EmbeddedRef.of(elig)], node.state, now, storage_uri=f"store://{VENDOR}/sboms",
    )
    _seal(run, node, "SBOM credential registration", vc_tx)
    store.put_vc(vc)
    store.put_sbom(vc.id, data, commitment)
    run.say(f"vendor: issued {vc.vc_kind.value} credential {vc.id}")
    run.say(f"  attributeRoot={commitment.attribute_root.hex()}")
    run.say(f"  indexRoot={commitment.index_root.hex()}")

    if tamper == "revoke-eligibility":
        penalty = Transaction.create(
            oversight_keys, oversight_did, TxKind.PENALTY_RECORD,
            {"vendor": vendor_did.rendered, "points": genesis.config.penalty_threshold_points,
             "reason": "falsified SBOM credential reported"},
        )
        _seal(run, node, "penalty record", penalty)
        run.say(f"oversight: penalty recorded; eligibility status={node.state.elig_registry[elig.id].status}")

    # the procurer receives the credential over the wire
    wire_vc = VerifiableCredential.from_json(json.loads(canonical_json(vc.to_json())))
    now = node.head.timestamp
    run.say("procurer: verifying")
    outcome = verify_vc(wire_vc, node.state, now, store)
    for c in outcome.checks:
        run.check(c.name, c.passed, c.detail)
    chain = verify_trust_chain(wire_vc, node.state, now, store)
    run.check("trust_chain", chain.subtree_valid,
              ", ".join(f"{n.vc_id}={n.status}" for n in chain.walk()))

    claims = wire_vc.sbom_claims

    def full() -> None:
        received = bytearray(store.get_sbom(vc.id))
        if tamper == "sbom-byte":
            received[len(received) // 2] ^= 0x01
        ok = sbom_digest(bytes(received)) == claims.sbom_digest
        run.check("sbom_digest", ok, f"sha256={sbom_digest(bytes(received)).hex()}")
        if ok:
            parsed = parse_spdx(bytes(received))
            run.say(f"  full SBOM received: {', '.join(c.rendered for c in parsed.component_ids)}")

    def selective() -> None:
        n_packages = len(canonical.component_ids)
        selected = ["creationInfo/created"] + [
            f"packages/{i}/{f}" for i in range(n_packages) for f in ("name", "versionInfo", "supplier")
        ]
        selected = [p for p in selected if canonical.value_of(p) is not None]
        proof_json = prove_disclosure(canonical, commitment, selected).to_json()
        run.say(f"vendor: disclosed {len(selected)} of {len(canonical.attributes)} attributes")
        if tamper == "proof":
            _tamper_value(proof_json)
        try:
            revealed = verify_disclosure(DisclosureProof.from_json(proof_json), claims.attribute_root)
        except ProofError as exc:
            run.check("disclosure_proof", False, f"{type(exc).__name__}: {exc}")
            return
        run.check("disclosure_proof", True, f"{len(revealed)} attributes verified against attributeRoot")
        for path, value in revealed:
            run.say(f"    {path} = {value}")

    def need_to_know() -> None:
        query = ComponentId.parse(VULNERABLE_QUERY)
        run.say(f"procurer: asks whether {query.rendered} is present")
        absence = prove_absence(canonical, commitment, query).to_json()
        if tamper == "proof":
            _tamper_neighbor(absence)
        try:
            proof = AbsenceProof.from_json(absence)
            ok = verify_absence(proof, claims.index_root, query)
        except ProofError as exc:
            run.check("absence_proof", False, f"{type(exc).__name__}: {exc}")
            return
        run.check("absence_proof", ok,
                  f"{query.rendered} absent; bracketed by {proof.left.display} and {proof.right.display}")
        present = ComponentId.parse(PRESENT_QUERY)
        presence = DisclosureProof.from_json(prove_presence(canonical, commitment, present).to_json())
        run.check("presence_proof", verify_presence(presence, claims.index_root, present),
                  f"{present.rendered} present")

    steps: dict[int, Callable[[], None]] = {1: full, 2: selective, 3: need_to_know}
    steps[scenario]()

    node.save(run_dir / "ledger.jsonl")
    if run.result.failed_checks:
        run.result.exit_code = 2
        run.say(f"RESULT: FAIL ({', '.join(run.result.failed_checks)})")
    else:
        run.say("RESULT: PASS")
    (run_dir / "transcript.txt").write_text(run.result.text)
    return run.result
