"""``trustchain <role> <verb>`` command line.

Every state-changing command loads the workspace ledger, submits one
transaction, seals a block on the simulated clock and writes the log back.
Exit codes: 0 success, 2 verification failure or rejected operation,
3 usage error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Any, Sequence

from . import bench
from .credentials import (
    CredentialError,
    EmbeddedRef,
    SbomMetadata,
    VcKind,
    VerifiableCredential,
    issue_eligibility_vc,
    issue_sbom_vc,
    revoke_vc,
    update_sbom_vc,
    verify_trust_chain,
    verify_vc,
)
from .encoding import rfc3339, sha256
from .identity import IdentityError
from .ledger import (
    DEFAULT_BLOCK_INTERVAL,
    ChainIntegrityError,
    LedgerError,
    LedgerNode,
    Registry,
    Transaction,
    TxKind,
    read_block_log,
)
from .merkle import (
    AbsenceProof,
    DisclosureProof,
    ProofError,
    UnknownPath,
    build_commitment,
    prove_absence,
    prove_disclosure,
    prove_presence,
    verify_absence,
    verify_disclosure,
    verify_presence,
)
from .sbom import ComponentId, SbomError, check_ntia_minimum, parse_spdx, sbom_digest
from .scenarios import SCENARIOS, TAMPERS, ScenarioError, run_scenario
from .store import StoreError, Workspace, WorkspaceError

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_IO = 0, 2, 3, 4
DEFAULT_WORKSPACE = "trustchain-workspace"


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_VERIFY):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- helpers -----------------------------------------------------------------


def _workspace(args) -> Workspace:
    return Workspace(args.workspace, args.ledger_file)


def _read_bytes(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}", EXIT_IO) from exc


def _read_json(path: str) -> Any:
    try:
        return json.loads(_read_bytes(path))
    except ValueError as exc:
        raise CliError(f"{path} is not valid JSON: {exc}", EXIT_IO) from exc


def _load_vc(path: str) -> VerifiableCredential:
    try:
        return VerifiableCredential.from_json(_read_json(path))
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(f"{path} is not a well-formed credential: {exc}") from exc


def _emit(data: Any, out: str | None) -> None:
    text = json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    if out is None:
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text)
    except OSError as exc:
        raise CliError(f"cannot write {out}: {exc.strerror}", EXIT_IO) from exc
    print(f"wrote {out}")


def _jsonable(value: Any) -> Any:
    if hasattr(value, "to_json"):
        return value.to_json()
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _commit(ws: Workspace, node: LedgerNode, keys, tx: Transaction, what: str):
    # a per-block nonce keeps otherwise identical commands distinct
    tx = Transaction.create(keys, tx.sender, tx.kind, tx.payload, nonce=node.head.height + 1)
    node.submit_transaction(tx)
    block = node.seal()
    ws.persist(node)
    result = node.result_of(tx)
    if not result.ok:
        raise CliError(f"{what} rejected in block {block.height}: {result.error}")
    print(f"block {block.height} @ {rfc3339(block.timestamp)}: {what}")
    return block


def _now(args, node: LedgerNode) -> int:
    return args.at if getattr(args, "at", None) is not None else node.head.timestamp


def _print_outcome(outcome) -> None:
    for c in outcome.checks:
        print(f"  [{'PASS' if c.passed else 'FAIL'}] {c.name}{': ' + c.detail if c.detail else ''}")


def _vendor_eligibility(node: LedgerNode, did: str) -> str | None:
    active = node.state.active_eligibility(did, node.head.timestamp)
    return active[-1].vc_id if active else None


# -- ledger ------------------------------------------------------------------


def cmd_ledger_init(args) -> int:
    ws = _workspace(args)
    interval = args.block_interval or DEFAULT_BLOCK_INTERVAL
    genesis = ws.init(args.seed, interval, args.penalty_threshold, args.genesis_time)
    print(f"initialized {ws.root}")
    print(f"oversight: {genesis.oversight.did.rendered}")
    print(f"block interval {genesis.config.block_interval_seconds}s, "
          f"penalty threshold {genesis.config.penalty_threshold_points}")
    return EXIT_OK


def cmd_ledger_verify(args) -> int:
    ws = _workspace(args)
    genesis = ws.genesis()
    try:
        node = LedgerNode.replay(genesis, read_block_log(ws.ledger_file))
    except ChainIntegrityError as exc:
        print(f"FAIL: {exc}")
        return EXIT_VERIFY
    print(f"ok: {len(node.blocks)} blocks, head {node.head.hash.hex()}")
    print(f"state hash {node.state.state_hash().hex()}")
    return EXIT_OK


def cmd_ledger_query(args) -> int:
    node = _workspace(args).load_node()
    _emit(_jsonable(node.query(args.registry, args.key)), None)
    return EXIT_OK


def cmd_ledger_state_hash(args) -> int:
    print(_workspace(args).load_node().state.state_hash().hex())
    return EXIT_OK


# -- vendor ------------------------------------------------------------------


def cmd_vendor_register(args) -> int:
    ws = _workspace(args)
    node = ws.load_node()
    keys, did, document = ws.new_identity(args.name, args.endpoint)
    tx = Transaction.create(keys, did, TxKind.DID_REGISTER, {"document": document.to_json()})
    _commit(ws, node, keys, tx, f"registered {args.name} as {did.rendered}")
    return EXIT_OK


def _prepare_sbom(args, ws: Workspace, node: LedgerNode, did):
    data = _read_bytes(args.sbom)
    canonical = parse_spdx(data)
    report = check_ntia_minimum(canonical)
    if report.compliant:
        print(f"NTIA minimum elements: all {len(report.present)} present")
    else:
        print(f"NTIA minimum elements missing: {', '.join(sorted(report.missing))}")
        if args.require_ntia:
            raise CliError("SBOM is not NTIA compliant")
    seed = sha256(f"trustchain-salt:{ws.seed}:{args.name}:{node.head.height + 1}".encode())
    commitment = build_commitment(canonical, seed)
    sources = ws.all_stores()
    refs = []
    for vc_id in args.embed:
        found = sources.get(vc_id)
        if found is None:
            raise CliError(f"no stored credential {vc_id} to embed", EXIT_USAGE)
        ws.store(args.name).put_vc(found)
        refs.append(EmbeddedRef.of(found))
    kind = VcKind(args.kind)
    if kind is VcKind.SYSTEM_SBOM or not refs:
        elig = _vendor_eligibility(node, did.rendered)
        if elig is not None:
            found = sources.get(elig)
            if found is not None:
                refs.insert(0, EmbeddedRef.of(found))
    return data, commitment, SbomMetadata.from_sbom(canonical, did), refs, kind


def cmd_vendor_issue_sbom(args) -> int:
    ws = _workspace(args)
    node = ws.load_node()
    keys, did = ws.identity(args.name)
    data, commitment, metadata, refs, kind = _prepare_sbom(args, ws, node, did)
    store = ws.store(args.name)
    vc, tx = issue_sbom_vc(
        keys, did, kind, commitment, sbom_digest(data), metadata, refs, node.state, node.head.timestamp,
        storage_uri=f"store://{args.name}/sboms",
    )
    _commit(ws, node, keys, tx, f"registered {kind.value} credential")
    store.put_vc(vc)
    store.put_sbom(vc.id, data, commitment)
    print(vc.id)
    return EXIT_OK


def cmd_vendor_update_sbom(args) -> int:
    ws = _workspace(args)
    node = ws.load_node()
    keys, did = ws.identity(args.name)
    data, commitment, metadata, refs, kind = _prepare_sbom(args, ws, node, did)
    store = ws.store(args.name)
    vc, txs = update_sbom_vc(
        keys, did, args.old_vc, commitment, sbom_digest(data), metadata, refs, not args.revoke_old,
        node.state, node.head.timestamp, kind=kind, storage_uri=f"store://{args.name}/sboms",
    )
    for tx in txs:
        _commit(ws, node, keys, tx, f"superseded {args.old_vc}")
    store.put_vc(vc)
    store.put_sbom(vc.id, data, commitment)
    print(vc.id)
    return EXIT_OK


def cmd_vendor_revoke(args) -> int:
    ws = _workspace(args)
    node = ws.load_node()
    keys, did = ws.identity(args.name)
    tx = revoke_vc(keys, did, args.vc_id, args.reason, node.state)
    _commit(ws, node, keys, tx, f"revoked {args.vc_id}")
    return EXIT_OK


def _vendor_material(args):
    store = _workspace(args).store(args.name)
    data = store.get_sbom(args.vc_id)
    return parse_spdx(data), store.get_commitment(args.vc_id)


def cmd_vendor_disclose(args) -> int:
    canonical, commitment = _vendor_material(args)
    try:
        proof = prove_disclosure(canonical, commitment, args.paths)
    except UnknownPath as exc:
        raise CliError(str(exc), EXIT_USAGE) from exc
    _emit(proof.to_json(), args.out)
    return EXIT_OK


def cmd_vendor_prove(args) -> int:
    canonical, commitment = _vendor_material(args)
    query = ComponentId.parse(args.component)
    if query in canonical.component_ids:
        proof = prove_presence(canonical, commitment, query)
    else:
        proof = prove_absence(canonical, commitment, query)
    _emit(proof.to_json(), args.out)
    return EXIT_OK


def cmd_vendor_export(args) -> int:
    store = _workspace(args).store(args.name)
    vc = store.get(args.vc_id)
    if vc is None:
        raise CliError(f"{args.name} holds no credential {args.vc_id}", EXIT_USAGE)
    _emit(vc.to_json(), args.out)
    if args.sbom_out:
        try:
            Path(args.sbom_out).write_bytes(store.get_sbom(args.vc_id))
        except OSError as exc:
            raise CliError(f"cannot write {args.sbom_out}: {exc.strerror}", EXIT_IO) from exc
        print(f"wrote {args.sbom_out}")
    return EXIT_OK


# -- oversight ---------------------------------------------------------------


def cmd_oversight_issue_eligibility(args) -> int:
    ws = _workspace(args)
    node = ws.load_node()
    keys, did = ws.identity(Workspace.OVERSIGHT)
    _, vendor = ws.identity(args.vendor)
    now = node.head.timestamp
    vc, tx = issue_eligibility_vc(keys, did, vendor, args.criteria, now + args.days * 86400, node.state, now)
    _commit(ws, node, keys, tx, f"eligibility for {args.vendor}")
    ws.store(args.vendor).put_vc(vc)
    print(vc.id)
    return EXIT_OK


def cmd_oversight_penalize(args) -> int:
    ws = _workspace(args)
    node = ws.load_node()
    keys, did = ws.identity(Workspace.OVERSIGHT)
    _, vendor = ws.identity(args.vendor)
    payload = {"vendor": vendor.rendered, "points": args.points, "reason": args.reason}
    tx = Transaction.create(keys, did, TxKind.PENALTY_RECORD, payload)
    _commit(ws, node, keys, tx, f"penalty of {args.points} for {args.vendor}")
    total = node.state.penalty_points(vendor.rendered)
    print(f"{args.vendor} now has {total} penalty points")
    if not node.state.active_eligibility(vendor.rendered, node.head.timestamp):
        print(f"{args.vendor} holds no active eligibility")
    return EXIT_OK


def cmd_oversight_revoke(args) -> int:
    ws = _workspace(args)
    node = ws.load_node()
    keys, did = ws.identity(Workspace.OVERSIGHT)
    tx = revoke_vc(keys, did, args.vc_id, args.reason, node.state)
    _commit(ws, node, keys, tx, f"revoked {args.vc_id}")
    return EXIT_OK


# -- procurer ----------------------------------------------------------------


def _verify_credential(args, vc: VerifiableCredential) -> bool:
    ws = _workspace(args)
    node = ws.load_node()
    outcome = verify_vc(vc, node.state, _now(args, node), ws.all_stores())
    print(f"credential {vc.id} ({vc.vc_kind.value}) issued by {vc.issuer}")
    _print_outcome(outcome)
    return outcome.valid


def _result(ok: bool) -> int:
    print("RESULT: PASS" if ok else "RESULT: FAIL")
    return EXIT_OK if ok else EXIT_VERIFY


def _require_sbom_vc(vc: VerifiableCredential) -> None:
    if not vc.vc_kind.is_sbom:
        raise CliError(f"{vc.id} is not an SBOM credential", EXIT_USAGE)


def cmd_procurer_verify_vc(args) -> int:
    return _result(_verify_credential(args, _load_vc(args.vc)))


def cmd_procurer_verify_full(args) -> int:
    vc = _load_vc(args.vc)
    _require_sbom_vc(vc)
    ok = _verify_credential(args, vc)
    digest = sbom_digest(_read_bytes(args.sbom))
    matches = digest == vc.sbom_claims.sbom_digest
    print(f"  [{'PASS' if matches else 'FAIL'}] sbom_digest: sha256={digest.hex()}")
    return _result(ok and matches)


def cmd_procurer_verify_disclosure(args) -> int:
    vc = _load_vc(args.vc)
    _require_sbom_vc(vc)
    ok = _verify_credential(args, vc)
    try:
        proof = DisclosureProof.from_json(_read_json(args.proof))
        revealed = verify_disclosure(proof, vc.sbom_claims.attribute_root)
    except ProofError as exc:
        print(f"  [FAIL] disclosure_proof: {type(exc).__name__}: {exc}")
        return _result(False)
    print(f"  [PASS] disclosure_proof: {len(revealed)} attributes verified")
    for path, value in revealed:
        print(f"    {path} = {value}")
    return _result(ok)


def cmd_procurer_verify_component(args) -> int:
    vc = _load_vc(args.vc)
    _require_sbom_vc(vc)
    ok = _verify_credential(args, vc)
    query = ComponentId.parse(args.component)
    data = _read_json(args.proof)
    root = vc.sbom_claims.index_root
    try:
        if isinstance(data, dict) and "leftNeighbor" in data:
            proof = AbsenceProof.from_json(data)
            found, verdict = "absent", verify_absence(proof, root, query)
        else:
            found, verdict = "present", verify_presence(DisclosureProof.from_json(data), root, query)
    except ProofError as exc:
        print(f"  [FAIL] component_proof: {type(exc).__name__}: {exc}")
        return _result(False)
    detail = f"{query.rendered} {found}" if verdict else f"proof does not establish {query.rendered} {found}"
    print(f"  [{'PASS' if verdict else 'FAIL'}] component_proof: {detail}")
    if args.expect and args.expect != found:
        print(f"  [FAIL] expectation: wanted {query.rendered} {args.expect}")
        verdict = False
    return _result(ok and verdict)


def cmd_procurer_verify_chain(args) -> int:
    ws = _workspace(args)
    node = ws.load_node()
    vc = _load_vc(args.vc)
    _require_sbom_vc(vc)
    chain = verify_trust_chain(vc, node.state, _now(args, node), ws.all_stores(), args.max_depth)
    for item in chain.walk():
        detail = f" ({item.detail})" if item.detail else ""
        print(f"{'  ' * item.depth}{item.vc_id} [{item.kind.value}] {item.status}{detail}")
    return _result(chain.subtree_valid)


# -- bench and scenarios -----------------------------------------------------


def cmd_bench_run(args) -> int:
    try:
        records = bench.bench_run(args.counts, args.runs, args.out)
    except OSError as exc:
        raise CliError(f"cannot write {args.out}: {exc.strerror}", EXIT_IO) from exc
    print(",".join(bench.CSV_HEADER))
    for record in records:
        print(",".join(str(v) for v in record.row()))
    return EXIT_OK


def cmd_bench_latency(args) -> int:
    interval = args.block_interval or DEFAULT_BLOCK_INTERVAL
    report = bench.simulate_confirmation_latency(args.tx, interval, seed=args.sim_seed)
    print(f"{len(report.latencies)} transactions in {report.blocks} blocks")
    print(f"mean confirmation latency {report.mean:.3f}s (max {max(report.latencies)}s)")
    print(f"throughput {report.tps:.2f} tx/s (simulated clock, informational)")
    return EXIT_OK


def cmd_scenario_run(args) -> int:
    ws = _workspace(args)
    if not ws.initialized:
        ws.init(args.seed, args.block_interval or DEFAULT_BLOCK_INTERVAL)
    result = run_scenario(args.scenario, ws, args.tamper)
    sys.stdout.write(result.text)
    return result.exit_code


# -- parser ------------------------------------------------------------------


def _globals() -> argparse.ArgumentParser:
    # SUPPRESS lets the same flags appear before or after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--workspace", default=argparse.SUPPRESS, help="workspace directory")
    common.add_argument("--ledger-file", default=argparse.SUPPRESS, help="block log (default <workspace>/ledger.jsonl)")
    common.add_argument("--seed", default=argparse.SUPPRESS, help="workspace seed for init and scenarios")
    common.add_argument("--block-interval", type=int, default=argparse.SUPPRESS, help="seconds between blocks")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _globals()
    parser = _Parser(prog="trustchain", description="SBOM verifiable credentials on a permissioned ledger")
    parser.add_argument("--workspace", default=os.environ.get("TRUSTCHAIN_WORKSPACE", DEFAULT_WORKSPACE))
    parser.add_argument("--ledger-file", default=None)
    parser.add_argument("--seed", default="trustchain")
    parser.add_argument("--block-interval", type=int, default=None)
    roles = parser.add_subparsers(dest="role", required=True, parser_class=_Parser)

    def verbs(role: str, help: str):
        sub = roles.add_parser(role, help=help)
        return sub.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    def verb(group, name: str, func, help: str):
        p = group.add_parser(name, help=help, parents=[common])
        p.set_defaults(func=func)
        return p

    g = verbs("ledger", "ledger administration")
    p = verb(g, "init", cmd_ledger_init, "create a workspace and genesis block")
    p.add_argument("--penalty-threshold", type=int, default=100)
    p.add_argument("--genesis-time", type=int, default=None, help="UNIX seconds of block 0")
    verb(g, "verify", cmd_ledger_verify, "replay the block log and check integrity")
    p = verb(g, "query", cmd_ledger_query, "read a registry entry")
    p.add_argument("registry", choices=[r.value for r in Registry])
    p.add_argument("key")
    verb(g, "state-hash", cmd_ledger_state_hash, "print the canonical state hash")

    g = verbs("vendor", "vendor operations")
    p = verb(g, "register", cmd_vendor_register, "create and register a vendor DID")
    p.add_argument("name")
    p.add_argument("--endpoint", default=None, help="service endpoint for the DID document")
    for name, func, help in (
        ("issue-sbom", cmd_vendor_issue_sbom, "commit to an SPDX SBOM and issue its credential"),
        ("update-sbom", cmd_vendor_update_sbom, "issue a credential superseding an older one"),
    ):
        p = verb(g, name, func, help)
        p.add_argument("name")
        if name == "update-sbom":
            p.add_argument("old_vc")
        p.add_argument("sbom", help="SPDX-2.2 JSON file")
        p.add_argument("--kind", choices=[VcKind.COMPONENT_SBOM.value, VcKind.SYSTEM_SBOM.value],
                       default=VcKind.COMPONENT_SBOM.value)
        p.add_argument("--embed", action="append", default=[], metavar="VC_ID", help="upstream credential")
        p.add_argument("--require-ntia", action="store_true", help="refuse SBOMs missing NTIA elements")
        if name == "update-sbom":
            p.add_argument("--revoke-old", action="store_true", help="revoke the superseded credential")
    p = verb(g, "revoke", cmd_vendor_revoke, "revoke one of the vendor's credentials")
    p.add_argument("name")
    p.add_argument("vc_id")
    p.add_argument("--reason", default="revoked by issuer")
    p = verb(g, "disclose", cmd_vendor_disclose, "selective disclosure proof for attribute paths")
    p.add_argument("name")
    p.add_argument("vc_id")
    p.add_argument("paths", nargs="+")
    p.add_argument("--out", default=None)
    p = verb(g, "prove", cmd_vendor_prove, "presence or absence proof for name@version")
    p.add_argument("name")
    p.add_argument("vc_id")
    p.add_argument("component")
    p.add_argument("--out", default=None)
    p = verb(g, "export", cmd_vendor_export, "write a credential (and optionally its SBOM)")
    p.add_argument("name")
    p.add_argument("vc_id")
    p.add_argument("--out", default=None)
    p.add_argument("--sbom-out", default=None)

    g = verbs("oversight", "oversight authority operations")
    p = verb(g, "issue-eligibility", cmd_oversight_issue_eligibility, "certify a vendor")
    p.add_argument("vendor")
    p.add_argument("--criteria", nargs="+", default=["secure-development-framework"])
    p.add_argument("--days", type=int, default=365)
    p = verb(g, "penalize", cmd_oversight_penalize, "record penalty points against a vendor")
    p.add_argument("vendor")
    p.add_argument("points", type=int)
    p.add_argument("--reason", default="reported violation")
    p = verb(g, "revoke", cmd_oversight_revoke, "revoke an eligibility credential")
    p.add_argument("vc_id")
    p.add_argument("--reason", default="revoked by oversight")

    g = verbs("procurer", "procurer verification")
    specs = (
        ("verify-vc", cmd_procurer_verify_vc, "check a credential against the ledger", ()),
        ("verify-full", cmd_procurer_verify_full, "full disclosure: credential plus SBOM bytes", ("sbom",)),
        ("verify-disclosure", cmd_procurer_verify_disclosure, "selective disclosure proof", ("proof",)),
        ("verify-component", cmd_procurer_verify_component, "presence or absence proof", ("proof", "component")),
        ("verify-chain", cmd_procurer_verify_chain, "recursive trust-chain verification", ()),
    )
    for name, func, help, extra in specs:
        p = verb(g, name, func, help)
        p.add_argument("vc", help="credential JSON file")
        for arg in extra:
            p.add_argument(arg)
        p.add_argument("--at", type=int, default=None, help="verification time in UNIX seconds (default: ledger head)")
        if name == "verify-component":
            p.add_argument("--expect", choices=["present", "absent"], default=None)
        if name == "verify-chain":
            p.add_argument("--max-depth", type=int, default=8)

    g = verbs("bench", "performance harness")
    p = verb(g, "run", cmd_bench_run, "time credential generation and proofs")
    p.add_argument("--counts", type=int, nargs="+", default=list(bench.DEFAULT_COUNTS))
    p.add_argument("--runs", type=int, default=bench.DEFAULT_RUNS)
    p.add_argument("--out", default="bench.csv")
    p = verb(g, "latency", cmd_bench_latency, "simulated confirmation latency")
    p.add_argument("--tx", type=int, default=100)
    p.add_argument("--sim-seed", type=int, default=0)

    g = verbs("scenario", "end-to-end disclosure scenarios")
    p = verb(g, "run", cmd_scenario_run, "run scenario 1, 2 or 3")
    p.add_argument("scenario", type=int, choices=sorted(SCENARIOS))
    p.add_argument("--tamper", choices=sorted(TAMPERS), default=None)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except CliError as exc:
        message, code = str(exc), exc.code
    except (WorkspaceError, ScenarioError, UnknownPath) as exc:
        message, code = str(exc), EXIT_USAGE
    except (StoreError, OSError) as exc:
        message, code = str(exc), EXIT_IO
    except (CredentialError, LedgerError, ProofError, SbomError, IdentityError, ValueError) as exc:
        message, code = f"{type(exc).__name__}: {exc}", EXIT_VERIFY
    print(f"error: {message}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
