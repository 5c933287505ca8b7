"""Salted Merkle commitments over a CanonicalSbom with selective-disclosure,
presence and absence (non-membership) proofs.

Two trees are built per SBOM:

* the attribute tree, one leaf per ``(path, value)`` pair in path order;
* the index tree, one leaf per component identity in bytewise order,
  bracketed by a minimum and a maximum sentinel so that every absent
  identity falls strictly between two adjacent committed leaves.

Hashing rules (SHA-256 throughout)::

    salt(x)        = H(salt_seed || x)
    attribute leaf = H(0x00 || salt(path) || path || 0x1F || value)
    index leaf     = H(0x00 || salt(rendered) || rendered)
    internal node  = H(0x01 || left || right)

An unpaired node at the end of a level is promoted unchanged.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Any, Sequence

from .encoding import DIGEST_SIZE, expect_keys, from_hex, sha256
from .sbom import CanonicalSbom, ComponentId

LEAF_PREFIX = b"\x00"
NODE_PREFIX = b"\x01"
FIELD_SEPARATOR = b"\x1f"
MIN_SENTINEL = b"\x00MIN"
MAX_SENTINEL = b"\xffMAX"
SALT_SEED_SIZE = 32

LEFT = "L"
RIGHT = "R"


class ProofError(Exception):
    """Base class for commitment and proof failures."""


class EmptySbom(ProofError):
    pass


class UnknownPath(ProofError):
    pass


class NotPresent(ProofError):
    pass


class ActuallyPresent(ProofError):
    pass


class RootMismatch(ProofError):
    pass


class MalformedProof(ProofError):
    pass


# -- tree primitives ---------------------------------------------------------


def derive_salt(salt_seed: bytes, label: bytes) -> bytes:
    return sha256(salt_seed + label)


def attribute_leaf(salt: bytes, path: str, value: str) -> bytes:
    return sha256(LEAF_PREFIX + salt + path.encode("utf-8") + FIELD_SEPARATOR + value.encode("utf-8"))


def index_leaf(salt: bytes, rendered: bytes) -> bytes:
    return sha256(LEAF_PREFIX + salt + rendered)


def node_hash(left: bytes, right: bytes) -> bytes:
    return sha256(NODE_PREFIX + left + right)


def build_levels(leaves: Sequence[bytes]) -> list[list[bytes]]:
    """All tree levels, leaves first, root level last."""
    if not leaves:
        raise ValueError("a tree needs at least one leaf")
    levels = [list(leaves)]
    while len(levels[-1]) > 1:
        level = levels[-1]
        nxt = [node_hash(level[i], level[i + 1]) for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        levels.append(nxt)
    return levels


def merkle_root(leaves: Sequence[bytes]) -> bytes:
    return build_levels(leaves)[-1][0]


def expected_sides(leaf_count: int, index: int) -> list[str]:
    """Side of each sibling along the path of ``index``; promotions add nothing."""
    sides = []
    while leaf_count > 1:
        if index % 2:
            sides.append(LEFT)
        elif index + 1 < leaf_count:
            sides.append(RIGHT)
        index //= 2
        leaf_count = (leaf_count + 1) // 2
    return sides


def auth_path(levels: list[list[bytes]], index: int) -> list[tuple[bytes, str]]:
    path = []
    for level in levels[:-1]:
        if index % 2:
            path.append((level[index - 1], LEFT))
        elif index + 1 < len(level):
            path.append((level[index + 1], RIGHT))
        index //= 2
    return path


def fold_path(leaf: bytes, siblings: Sequence[tuple[bytes, str]]) -> bytes:
    node = leaf
    for sibling, side in siblings:
        node = node_hash(sibling, node) if side == LEFT else node_hash(node, sibling)
    return node


def check_path_shape(leaf_count: int, index: int, siblings: Sequence[tuple[bytes, str]]) -> None:
    if not isinstance(leaf_count, int) or not isinstance(index, int):
        raise MalformedProof("leaf count and index must be integers")
    if leaf_count < 1 or not 0 <= index < leaf_count:
        raise MalformedProof(f"leaf index {index} outside tree of {leaf_count} leaves")
    if [side for _, side in siblings] != expected_sides(leaf_count, index):
        raise MalformedProof(f"sibling sides inconsistent with leaf {index} of {leaf_count}")
    for sibling, _ in siblings:
        if len(sibling) != DIGEST_SIZE:
            raise MalformedProof("sibling digest has wrong length")


# -- commitment --------------------------------------------------------------


@dataclass(frozen=True)
class _ProverTree:
    """Prover-side cache: salts, levels and positions for both trees."""

    sbom: CanonicalSbom
    salts: list[bytes]
    levels: list[list[bytes]]
    position: dict[str, int]
    index_labels: list[bytes]
    index_salts: list[bytes]
    index_levels: list[list[bytes]]


@dataclass(frozen=True)
class SbomCommitment:
    attribute_root: bytes
    index_root: bytes
    salt_seed: bytes
    leaf_count: int
    index_leaf_count: int
    _tree: _ProverTree | None = field(default=None, compare=False, repr=False)

    def to_json(self) -> dict[str, Any]:
        return {
            "attributeRoot": self.attribute_root.hex(),
            "indexRoot": self.index_root.hex(),
            "saltSeed": self.salt_seed.hex(),
            "leafCount": self.leaf_count,
            "indexLeafCount": self.index_leaf_count,
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "SbomCommitment":
        expect_keys(data, {"attributeRoot", "indexRoot", "saltSeed", "leafCount", "indexLeafCount"}, "commitment")
        return cls(
            attribute_root=from_hex(data["attributeRoot"], DIGEST_SIZE),
            index_root=from_hex(data["indexRoot"], DIGEST_SIZE),
            salt_seed=from_hex(data["saltSeed"], SALT_SEED_SIZE),
            leaf_count=int(data["leafCount"]),
            index_leaf_count=int(data["indexLeafCount"]),
        )


def _index_labels(sbom: CanonicalSbom) -> list[bytes]:
    return [MIN_SENTINEL, *(c.rendered.encode("utf-8") for c in sbom.component_ids), MAX_SENTINEL]


def _build_tree(sbom: CanonicalSbom, salt_seed: bytes) -> _ProverTree:
    salts = [derive_salt(salt_seed, a.path.encode("utf-8")) for a in sbom.attributes]
    leaves = [attribute_leaf(s, a.path, a.value) for s, a in zip(salts, sbom.attributes)]
    labels = _index_labels(sbom)
    index_salts = [derive_salt(salt_seed, label) for label in labels]
    index_leaves = [index_leaf(s, label) for s, label in zip(index_salts, labels)]
    return _ProverTree(
        sbom=sbom,
        salts=salts,
        levels=build_levels(leaves),
        position={a.path: i for i, a in enumerate(sbom.attributes)},
        index_labels=labels,
        index_salts=index_salts,
        index_levels=build_levels(index_leaves),
    )


def build_commitment(sbom: CanonicalSbom, salt_seed: bytes) -> SbomCommitment:
    if len(salt_seed) != SALT_SEED_SIZE:
        raise ValueError(f"salt seed must be {SALT_SEED_SIZE} bytes")
    if not sbom.attributes:
        raise EmptySbom("an SBOM commitment needs at least one attribute")
    tree = _build_tree(sbom, salt_seed)
    return SbomCommitment(
        attribute_root=tree.levels[-1][0],
        index_root=tree.index_levels[-1][0],
        salt_seed=salt_seed,
        leaf_count=len(tree.salts),
        index_leaf_count=len(tree.index_labels),
        _tree=tree,
    )


def _tree_for(sbom: CanonicalSbom, commitment: SbomCommitment) -> _ProverTree:
    tree = commitment._tree
    if tree is None or tree.sbom is not sbom:
        if not sbom.attributes:
            raise EmptySbom("an SBOM commitment needs at least one attribute")
        tree = _build_tree(sbom, commitment.salt_seed)
        if tree.levels[-1][0] != commitment.attribute_root or tree.index_levels[-1][0] != commitment.index_root:
            raise ProofError("commitment was not built from this SBOM and salt seed")
    return tree


# -- disclosure proofs -------------------------------------------------------


def _siblings_to_json(siblings: Sequence[tuple[bytes, str]]) -> list[dict[str, str]]:
    return [{"hash": h.hex(), "side": side} for h, side in siblings]


def _siblings_from_json(items: Any) -> tuple[tuple[bytes, str], ...]:
    if not isinstance(items, list):
        raise MalformedProof("siblingPath must be a list")
    out = []
    for item in items:
        try:
            expect_keys(item, {"hash", "side"}, "sibling")
        except ValueError as exc:
            raise MalformedProof(str(exc)) from exc
        side = item["side"]
        if side not in (LEFT, RIGHT):
            raise MalformedProof(f"bad sibling side {side!r}")
        try:
            out.append((from_hex(item["hash"], DIGEST_SIZE), side))
        except (KeyError, ValueError) as exc:
            raise MalformedProof(f"bad sibling hash: {exc}") from exc
    return tuple(out)


@dataclass(frozen=True)
class DisclosedEntry:
    path: str
    value: str
    salt: bytes
    leaf_index: int
    sibling_path: tuple[tuple[bytes, str], ...]

    def to_json(self) -> dict[str, Any]:
        return {
            "path": self.path,
            "value": self.value,
            "salt": self.salt.hex(),
            "leafIndex": self.leaf_index,
            "siblingPath": _siblings_to_json(self.sibling_path),
        }


@dataclass(frozen=True)
class DisclosureProof:
    """Revealed attributes with authentication paths to ``attribute_root``.

    ``leaf_count`` lets the verifier check that every sibling side matches
    the claimed leaf index. Presence proofs reuse this type over the index
    tree; their entries carry the component identity in ``path`` and an
    empty ``value``.
    """

    entries: tuple[DisclosedEntry, ...]
    attribute_root: bytes
    leaf_count: int
    tree: str = "attribute"

    def to_json(self) -> dict[str, Any]:
        return {
            "tree": self.tree,
            "root": self.attribute_root.hex(),
            "leafCount": self.leaf_count,
            "entries": [e.to_json() for e in self.entries],
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "DisclosureProof":
        try:
            expect_keys(data, {"tree", "root", "leafCount", "entries"}, "disclosure proof")
            for e in data["entries"]:
                expect_keys(e, {"path", "value", "salt", "leafIndex", "siblingPath"}, "entry")
            entries = tuple(
                DisclosedEntry(
                    path=e["path"],
                    value=e["value"],
                    salt=from_hex(e["salt"], DIGEST_SIZE),
                    leaf_index=e["leafIndex"],
                    sibling_path=_siblings_from_json(e["siblingPath"]),
                )
                for e in data["entries"]
            )
            tree = data["tree"]
            if tree not in ("attribute", "index"):
                raise MalformedProof(f"unknown tree {tree!r}")
            return cls(entries, from_hex(data["root"], DIGEST_SIZE), data["leafCount"], tree)
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedProof(f"cannot decode disclosure proof: {exc}") from exc


def prove_disclosure(
    sbom: CanonicalSbom, commitment: SbomCommitment, selected_paths: Sequence[str]
) -> DisclosureProof:
    tree = _tree_for(sbom, commitment)
    missing = [p for p in selected_paths if p not in tree.position]
    if missing:
        raise UnknownPath(f"paths not in SBOM: {', '.join(missing)}")
    entries = []
    for path in dict.fromkeys(selected_paths):
        i = tree.position[path]
        attr = sbom.attributes[i]
        entries.append(DisclosedEntry(attr.path, attr.value, tree.salts[i], i, tuple(auth_path(tree.levels, i))))
    return DisclosureProof(tuple(entries), commitment.attribute_root, len(tree.salts))


def verify_disclosure(proof: DisclosureProof, expected_root: bytes) -> list[tuple[str, str]]:
    """Check every entry against ``expected_root``; return the revealed pairs.

    Raises :class:`MalformedProof` for structural defects and
    :class:`RootMismatch` when any entry does not reproduce the root.
    """
    if proof.tree != "attribute":
        raise MalformedProof("not an attribute-tree proof")
    if not proof.entries:
        raise MalformedProof("proof discloses nothing")
    if proof.attribute_root != expected_root:
        raise RootMismatch("proof was issued for a different root")
    seen: set[int] = set()
    revealed = []
    for entry in proof.entries:
        check_path_shape(proof.leaf_count, entry.leaf_index, entry.sibling_path)
        if entry.leaf_index in seen:
            raise MalformedProof(f"leaf {entry.leaf_index} disclosed twice")
        seen.add(entry.leaf_index)
        leaf = attribute_leaf(entry.salt, entry.path, entry.value)
        if fold_path(leaf, entry.sibling_path) != expected_root:
            raise RootMismatch(f"entry {entry.path!r} does not reproduce the committed root")
        revealed.append((entry.path, entry.value))
    return revealed


# -- presence / absence ------------------------------------------------------


def _index_position(labels: list[bytes], query: ComponentId) -> tuple[int, bool]:
    """Insertion point of ``query`` among index leaves (sentinels included)."""
    key = query.rendered.encode("utf-8")
    pos = bisect.bisect_left(labels, key)
    return pos, pos < len(labels) and labels[pos] == key


def prove_presence(sbom: CanonicalSbom, commitment: SbomCommitment, query: ComponentId) -> DisclosureProof:
    tree = _tree_for(sbom, commitment)
    pos, found = _index_position(tree.index_labels, query)
    if not found:
        raise NotPresent(f"{query.rendered} is not in the SBOM; request an absence proof")
    entry = DisclosedEntry(query.rendered, "", tree.index_salts[pos], pos, tuple(auth_path(tree.index_levels, pos)))
    return DisclosureProof((entry,), commitment.index_root, len(tree.index_labels), tree="index")


def verify_presence(proof: DisclosureProof, expected_root: bytes, query: ComponentId) -> bool:
    if proof.tree != "index" or len(proof.entries) != 1:
        raise MalformedProof("presence proofs carry exactly one index-tree entry")
    entry = proof.entries[0]
    check_path_shape(proof.leaf_count, entry.leaf_index, entry.sibling_path)
    if proof.attribute_root != expected_root or entry.path != query.rendered:
        return False
    # sentinels occupy the first and last positions
    if not 0 < entry.leaf_index < proof.leaf_count - 1:
        return False
    leaf = index_leaf(entry.salt, entry.path.encode("utf-8"))
    return fold_path(leaf, entry.sibling_path) == expected_root


@dataclass(frozen=True)
class Neighbor:
    rendered: bytes
    salt: bytes
    leaf_index: int
    sibling_path: tuple[tuple[bytes, str], ...]

    def to_json(self) -> dict[str, Any]:
        return {
            "renderedHex": self.rendered.hex(),
            "salt": self.salt.hex(),
            "leafIndex": self.leaf_index,
            "siblingPath": _siblings_to_json(self.sibling_path),
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "Neighbor":
        expect_keys(data, {"renderedHex", "salt", "leafIndex", "siblingPath"}, "neighbor")
        return cls(
            rendered=from_hex(data["renderedHex"]),
            salt=from_hex(data["salt"], DIGEST_SIZE),
            leaf_index=data["leafIndex"],
            sibling_path=_siblings_from_json(data["siblingPath"]),
        )

    @property
    def display(self) -> str:
        if self.rendered == MIN_SENTINEL:
            return "<MIN>"
        if self.rendered == MAX_SENTINEL:
            return "<MAX>"
        return self.rendered.decode("utf-8", errors="replace")


@dataclass(frozen=True)
class AbsenceProof:
    query: str
    left: Neighbor
    right: Neighbor
    index_root: bytes
    leaf_count: int

    def to_json(self) -> dict[str, Any]:
        return {
            "query": self.query,
            "indexRoot": self.index_root.hex(),
            "leafCount": self.leaf_count,
            "leftNeighbor": self.left.to_json(),
            "rightNeighbor": self.right.to_json(),
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "AbsenceProof":
        try:
            expect_keys(data, {"query", "indexRoot", "leafCount", "leftNeighbor", "rightNeighbor"}, "absence proof")
            return cls(
                query=data["query"],
                left=Neighbor.from_json(data["leftNeighbor"]),
                right=Neighbor.from_json(data["rightNeighbor"]),
                index_root=from_hex(data["indexRoot"], DIGEST_SIZE),
                leaf_count=data["leafCount"],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedProof(f"cannot decode absence proof: {exc}") from exc


def prove_absence(sbom: CanonicalSbom, commitment: SbomCommitment, query: ComponentId) -> AbsenceProof:
    tree = _tree_for(sbom, commitment)
    labels, salts, levels = tree.index_labels, tree.index_salts, tree.index_levels
    pos, found = _index_position(labels, query)
    if found:
        raise ActuallyPresent(f"{query.rendered} is in the SBOM; absence cannot be proven")
    # MIN < every valid identity < MAX, so 1 <= pos <= len(labels) - 1
    lo, hi = pos - 1, pos
    return AbsenceProof(
        query=query.rendered,
        left=Neighbor(labels[lo], salts[lo], lo, tuple(auth_path(levels, lo))),
        right=Neighbor(labels[hi], salts[hi], hi, tuple(auth_path(levels, hi))),
        index_root=commitment.index_root,
        leaf_count=len(labels),
    )


def verify_absence(proof: AbsenceProof, expected_root: bytes, query: ComponentId) -> bool:
    """True iff the proof shows ``query`` falls between two adjacent leaves."""
    check_path_shape(proof.leaf_count, proof.left.leaf_index, proof.left.sibling_path)
    check_path_shape(proof.leaf_count, proof.right.leaf_index, proof.right.sibling_path)
    key = query.rendered.encode("utf-8")
    if proof.query != query.rendered or proof.index_root != expected_root:
        return False
    if proof.left.leaf_index + 1 != proof.right.leaf_index:
        return False
    if not proof.left.rendered < key < proof.right.rendered:
        return False
    for neighbor in (proof.left, proof.right):
        leaf = index_leaf(neighbor.salt, neighbor.rendered)
        if fold_path(leaf, neighbor.sibling_path) != expected_root:
            return False
    return True
