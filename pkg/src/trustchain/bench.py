"""Benchmark harness for SBOM credential generation and disclosure proofs,
plus the simulated confirmation-latency experiment for the ledger.

Absolute timings depend on the machine; what is meant to carry over is
the growth shape: credential generation grows linearly with attribute
count while proof generation and verification grow with the tree height.
"""

from __future__ import annotations

import csv
import gc
import math
import random
import statistics
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .credentials import SbomMetadata, VcKind, issue_eligibility_vc, issue_sbom_vc
from .encoding import canonical_json, sha256
from .identity import create_identity
from .ledger import GenesisConfig, LedgerConfig, LedgerNode, Transaction, TxKind
from .merkle import build_commitment, prove_disclosure, verify_disclosure
from .sbom import CanonicalSbom, sbom_digest

DEFAULT_COUNTS = (1, 5, 10, 25, 50, 100, 150, 200, 250, 500)
DEFAULT_RUNS = 20
CSV_HEADER = ("n", "vc_gen_ms", "proof_gen_ms", "proof_verify_ms", "siblings")


@dataclass(frozen=True)
class BenchRecord:
    n_attributes: int
    vc_generation_ms: float
    proof_generation_ms: float
    proof_verification_ms: float
    proof_sibling_count: int

    def row(self) -> tuple:
        return (
            self.n_attributes,
            f"{self.vc_generation_ms:.6f}",
            f"{self.proof_generation_ms:.6f}",
            f"{self.proof_verification_ms:.6f}",
            self.proof_sibling_count,
        )


def synthetic_sbom(n: int) -> tuple[CanonicalSbom, bytes]:
    """``n`` attributes ``pkg/<i>/field = value<i>`` and a byte rendering."""
    pairs = [(f"pkg/{i}/field", f"value{i}") for i in range(n)]
    raw = canonical_json({"attributes": pairs})
    return CanonicalSbom.from_pairs(pairs, source_digest=sha256(raw)), raw


def _eligible_vendor():
    okeys, odid, odoc = create_identity(sha256(b"bench-oversight"))
    vkeys, vdid, vdoc = create_identity(sha256(b"bench-vendor"))
    node = LedgerNode(GenesisConfig(odoc))
    node.submit_and_seal(Transaction.create(vkeys, vdid, TxKind.DID_REGISTER, {"document": vdoc.to_json()}))
    now = node.head.timestamp
    _, tx = issue_eligibility_vc(okeys, odid, vdid, ["bench"], now + 10**8, node.state, now)
    node.submit_and_seal(tx)
    return vkeys, vdid, node


class _Case:
    """One attribute count: its SBOM and the three timed phases."""

    def __init__(self, n: int, vendor):
        vkeys, vdid, node = vendor
        sbom, raw = synthetic_sbom(n)
        now = node.head.timestamp
        metadata = SbomMetadata("bench", "synthetic", str(n), vdid.rendered, "")
        seed = sha256(f"bench-salt:{n}".encode())
        target = [sbom.attributes[n // 2].path]

        def generate():
            commitment = build_commitment(sbom, seed)
            issue_sbom_vc(vkeys, vdid, VcKind.COMPONENT_SBOM, commitment, sbom_digest(raw), metadata, [], node.state, now)
            return commitment

        self.n = n
        self.commitment = generate()
        self.proof = prove_disclosure(sbom, self.commitment, target)
        root = self.commitment.attribute_root
        self.phases = (
            generate,
            lambda: prove_disclosure(sbom, self.commitment, target),
            lambda: verify_disclosure(self.proof, root),
        )
        self.samples: tuple[list[int], ...] = ([], [], [])

    def record(self) -> BenchRecord:
        vc, prove, verify = (statistics.median(s) / 1e6 for s in self.samples)
        return BenchRecord(self.n, vc, prove, verify, len(self.proof.entries[0].sibling_path))


def _measure(cases: Sequence[_Case], runs: int) -> None:
    # Runs are interleaved across sizes, in a fresh order each round, so
    # machine noise and cold caches land on every size alike; the collector
    # is paused as timeit does.
    order = list(cases)
    rng = random.Random(0)
    enabled = gc.isenabled()
    gc.disable()
    try:
        for _ in range(runs):
            rng.shuffle(order)
            for case in order:
                for phase, samples in zip(case.phases, case.samples):
                    start = time.perf_counter_ns()
                    phase()
                    samples.append(time.perf_counter_ns() - start)
    finally:
        if enabled:
            gc.enable()


def bench_size(n: int, runs: int = DEFAULT_RUNS, vendor=None) -> BenchRecord:
    case = _Case(n, vendor or _eligible_vendor())
    _measure([case], runs)
    return case.record()


def bench_run(
    attribute_counts: Sequence[int] = DEFAULT_COUNTS,
    runs: int = DEFAULT_RUNS,
    out: Path | str | None = None,
) -> list[BenchRecord]:
    """Median timings per attribute count, optionally written as CSV."""
    vendor = _eligible_vendor()
    cases = [_Case(n, vendor) for n in attribute_counts]
    # one untimed pass warms caches and the allocator
    _measure(cases, 1)
    for case in cases:
        case.samples = ([], [], [])
    _measure(cases, runs)
    records = [case.record() for case in cases]
    if out is not None:
        with open(out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_HEADER)
            writer.writerows(r.row() for r in records)
    return records


def expected_siblings(n: int) -> int:
    return math.ceil(math.log2(n)) if n > 1 else 0


# -- ledger confirmation latency ----------------------------------------------


@dataclass(frozen=True)
class LatencyReport:
    latencies: tuple[int, ...]
    blocks: int
    tps: float

    @property
    def mean(self) -> float:
        return statistics.fmean(self.latencies)


def simulate_confirmation_latency(
    n_tx: int = 100,
    block_interval: int = 12,
    window: int | None = None,
    seed: int = 0,
) -> LatencyReport:
    """Submit ``n_tx`` DID registrations at uniformly random integer seconds
    and measure inclusion time minus submission time.

    The simulated clock ticks once per second; at each tick the sequencer
    first seals a block if its interval has elapsed, then accepts the
    transactions arriving at that tick.
    """
    rng = random.Random(seed)
    window = window if window is not None else 10 * block_interval
    _, _, odoc = create_identity(sha256(b"latency-oversight"))
    node = LedgerNode(GenesisConfig(odoc, LedgerConfig(block_interval_seconds=block_interval), genesis_time=0))
    arrivals: dict[int, list[Transaction]] = {}
    for i in range(n_tx):
        keys, did, doc = create_identity(sha256(f"latency-{seed}-{i}".encode()))
        tx = Transaction.create(keys, did, TxKind.DID_REGISTER, {"document": doc.to_json()})
        arrivals.setdefault(rng.randrange(window), []).append(tx)
    queued: dict[bytes, int] = {}
    latencies: list[int] = []
    t = 0
    while len(latencies) < n_tx:
        block = node.produce_block(t)
        if block is not None:
            latencies.extend(block.timestamp - queued[tx.tx_id] for tx in block.transactions)
        for tx in arrivals.pop(t, ()):
            node.submit_transaction(tx, now=t)
            queued[tx.tx_id] = t
        t += 1
    elapsed = max(node.head.timestamp, 1)
    return LatencyReport(tuple(latencies), node.head.height, n_tx / elapsed)
