"""SPDX-2.2 JSON ingestion: flattening into a canonical attribute list and
NTIA minimum-element checks.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any, Iterable

from .encoding import render_number, sha256, sha256_hex

SUPPORTED_SPDX_VERSION = "SPDX-2.2"
PATH_SEPARATOR = "/"
_FORBIDDEN_PATH_CHARS = re.compile(r"[\s\x1f]")


class SbomError(Exception):
    """Base class for SBOM ingestion failures."""


class MalformedJson(SbomError):
    pass


class NotSpdx(SbomError):
    pass


class UnsupportedVersion(SbomError):
    pass


@dataclass(frozen=True, order=True)
class AttributePair:
    path: str
    value: str

    def __post_init__(self) -> None:
        if not self.path or _FORBIDDEN_PATH_CHARS.search(self.path):
            raise ValueError(f"invalid attribute path {self.path!r}")


@dataclass(frozen=True)
class ComponentId:
    name: str
    version: str

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("component name must be non-empty")
        if "\x00" in self.name or "\x00" in self.version:
            raise ValueError("component identity may not contain NUL")

    @property
    def rendered(self) -> str:
        return f"{self.name}@{self.version}"

    @classmethod
    def parse(cls, rendered: str) -> "ComponentId":
        # versions never contain '@' in practice; names (npm scopes) may
        name, sep, version = rendered.rpartition("@")
        if not sep:
            raise ValueError(f"component id {rendered!r} lacks '@version'")
        return cls(name, version)

    def __str__(self) -> str:
        return self.rendered


def _utf8_key(text: str) -> bytes:
    return text.encode("utf-8")


@dataclass(frozen=True)
class CanonicalSbom:
    attributes: tuple[AttributePair, ...]
    source_digest: bytes
    component_ids: tuple[ComponentId, ...] = ()

    def __post_init__(self) -> None:
        paths = [_utf8_key(a.path) for a in self.attributes]
        if any(a >= b for a, b in zip(paths, paths[1:])):
            raise ValueError("attributes must be strictly sorted by path")
        ids = [_utf8_key(c.rendered) for c in self.component_ids]
        if any(a >= b for a, b in zip(ids, ids[1:])):
            raise ValueError("component ids must be strictly sorted and unique")

    @classmethod
    def from_pairs(
        cls,
        pairs: Iterable[tuple[str, str]],
        components: Iterable[ComponentId] = (),
        source_digest: bytes = b"",
    ) -> "CanonicalSbom":
        """Build from unsorted pairs; used for synthetic SBOMs."""
        attrs = sorted((AttributePair(p, v) for p, v in pairs), key=lambda a: _utf8_key(a.path))
        comps = {c.rendered: c for c in components}
        ordered = tuple(comps[k] for k in sorted(comps, key=_utf8_key))
        return cls(tuple(attrs), source_digest or sha256(b""), ordered)

    def value_of(self, path: str) -> str | None:
        for attr in self.attributes:
            if attr.path == path:
                return attr.value
        return None

    @property
    def paths(self) -> list[str]:
        return [a.path for a in self.attributes]

    def to_json(self) -> dict[str, Any]:
        return {
            "attributes": [[a.path, a.value] for a in self.attributes],
            "componentIds": [c.rendered for c in self.component_ids],
            "sourceDigest": self.source_digest.hex(),
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "CanonicalSbom":
        return cls(
            attributes=tuple(AttributePair(p, v) for p, v in data["attributes"]),
            source_digest=bytes.fromhex(data["sourceDigest"]),
            component_ids=tuple(ComponentId.parse(c) for c in data["componentIds"]),
        )


def render_scalar(value: Any) -> str:
    if value is None:
        return ""
    if value is True:
        return "true"
    if value is False:
        return "false"
    if isinstance(value, (int, float)):
        return render_number(value)
    if isinstance(value, str):
        return value
    raise TypeError(f"not a JSON scalar: {type(value).__name__}")


def flatten(document: Any, prefix: str = "") -> list[tuple[str, str]]:
    """Slash-joined paths to every scalar leaf; containers are not leaves."""
    out: list[tuple[str, str]] = []
    stack: list[tuple[str, Any]] = [(prefix, document)]
    while stack:
        path, node = stack.pop()
        if isinstance(node, dict):
            for key, child in node.items():
                if not key or PATH_SEPARATOR in key or _FORBIDDEN_PATH_CHARS.search(key):
                    raise MalformedJson(f"object key {key!r} cannot form an attribute path")
                stack.append((f"{path}{PATH_SEPARATOR}{key}" if path else key, child))
        elif isinstance(node, list):
            for i, child in enumerate(node):
                stack.append((f"{path}{PATH_SEPARATOR}{i}" if path else str(i), child))
        else:
            out.append((path, render_scalar(node)))
    return out


def _reject_constant(token: str) -> float:
    raise MalformedJson(f"non-standard JSON constant {token}")


def _load_json(data: bytes) -> Any:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedJson(f"input is not UTF-8: {exc}") from exc
    try:
        return json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise MalformedJson(str(exc)) from exc


def _component_ids(document: dict[str, Any]) -> tuple[ComponentId, ...]:
    found: dict[str, ComponentId] = {}
    for package in document.get("packages") or []:
        if not isinstance(package, dict):
            continue
        name = package.get("name")
        if not isinstance(name, str) or not name:
            continue
        version = package.get("versionInfo")
        cid = ComponentId(name, render_scalar(version) if version is not None else "")
        found[cid.rendered] = cid
    return tuple(found[k] for k in sorted(found, key=_utf8_key))


def parse_spdx(data: bytes) -> CanonicalSbom:
    """Parse SPDX-2.2 JSON bytes into a :class:`CanonicalSbom`."""
    document = _load_json(data)
    if not isinstance(document, dict) or "spdxVersion" not in document:
        raise NotSpdx("document has no spdxVersion field")
    if document["spdxVersion"] != SUPPORTED_SPDX_VERSION:
        raise UnsupportedVersion(
            f"spdxVersion {document['spdxVersion']!r} is not {SUPPORTED_SPDX_VERSION}"
        )
    pairs = flatten(document)
    try:
        # JSON escapes can smuggle in lone surrogates, which have no UTF-8 form
        pairs.sort(key=lambda pv: (_utf8_key(pv[0]), _utf8_key(pv[1])))
    except UnicodeEncodeError as exc:
        raise MalformedJson(f"string is not valid Unicode: {exc}") from exc
    for (a, _), (b, _) in zip(pairs, pairs[1:]):
        if a == b:
            raise MalformedJson(f"duplicate attribute path {a!r}")
    return CanonicalSbom(
        attributes=tuple(AttributePair(p, v) for p, v in pairs),
        source_digest=sha256(data),
        component_ids=_component_ids(document),
    )


def sbom_digest(data: bytes) -> bytes:
    return sha256(data)


def sbom_digest_hex(data: bytes) -> str:
    return sha256_hex(data)


# -- NTIA minimum elements ---------------------------------------------------

SUPPLIER_NAME = "supplier name"
COMPONENT_NAME = "component name"
COMPONENT_VERSION = "component version"
UNIQUE_IDENTIFIER = "unique identifier"
DEPENDENCY_RELATIONSHIP = "dependency relationship"
SBOM_AUTHOR = "SBOM author"
TIMESTAMP = "timestamp"

NTIA_FIELDS = frozenset(
    {
        SUPPLIER_NAME,
        COMPONENT_NAME,
        COMPONENT_VERSION,
        UNIQUE_IDENTIFIER,
        DEPENDENCY_RELATIONSHIP,
        SBOM_AUTHOR,
        TIMESTAMP,
    }
)

# SPDX-2.2 locations used for each NTIA element. Package-level elements must
# be present on every package; an SBOM without packages has none of them.
NTIA_SPDX_MAPPING = {
    SUPPLIER_NAME: "packages/*/supplier",
    COMPONENT_NAME: "packages/*/name",
    COMPONENT_VERSION: "packages/*/versionInfo",
    UNIQUE_IDENTIFIER: "packages/*/externalRefs/*/referenceLocator (referenceType purl, cpe22Type, cpe23Type or swid)",
    DEPENDENCY_RELATIONSHIP: "relationships/*/relationshipType (a dependency or containment type)",
    SBOM_AUTHOR: "creationInfo/creators/*",
    TIMESTAMP: "creationInfo/created",
}

IDENTIFIER_REF_TYPES = frozenset({"purl", "cpe22Type", "cpe23Type", "swid"})
DEPENDENCY_TYPES = frozenset(
    {
        "DEPENDS_ON",
        "DEPENDENCY_OF",
        "DEV_DEPENDENCY_OF",
        "BUILD_DEPENDENCY_OF",
        "OPTIONAL_DEPENDENCY_OF",
        "RUNTIME_DEPENDENCY_OF",
        "PROVIDED_DEPENDENCY_OF",
        "TEST_DEPENDENCY_OF",
        "DEPENDENCY_MANIFEST_OF",
        "CONTAINS",
        "CONTAINED_BY",
        "STATIC_LINK",
        "DYNAMIC_LINK",
        "PREREQUISITE_FOR",
        "HAS_PREREQUISITE",
    }
)


@dataclass(frozen=True)
class ComplianceReport:
    present: frozenset[str]
    missing: frozenset[str] = field(default_factory=frozenset)

    @property
    def compliant(self) -> bool:
        return not self.missing


def _group(sbom: CanonicalSbom, top: str) -> dict[str, dict[str, str]]:
    """Map array index -> {relative path: value} for one top-level array."""
    groups: dict[str, dict[str, str]] = {}
    for attr in sbom.attributes:
        parts = attr.path.split(PATH_SEPARATOR, 2)
        if len(parts) == 3 and parts[0] == top and parts[1].isdigit():
            groups.setdefault(parts[1], {})[parts[2]] = attr.value
    return groups


def _has_identifier(package: dict[str, str]) -> bool:
    refs: dict[str, dict[str, str]] = {}
    for rel, value in package.items():
        parts = rel.split(PATH_SEPARATOR)
        if len(parts) == 3 and parts[0] == "externalRefs":
            refs.setdefault(parts[1], {})[parts[2]] = value
    return any(
        ref.get("referenceType") in IDENTIFIER_REF_TYPES and ref.get("referenceLocator")
        for ref in refs.values()
    )


def check_ntia_minimum(sbom: CanonicalSbom) -> ComplianceReport:
    """Report which NTIA minimum elements the SBOM carries."""
    packages = list(_group(sbom, "packages").values())
    relationships = _group(sbom, "relationships").values()

    def every_package(pred) -> bool:
        return bool(packages) and all(pred(p) for p in packages)

    found = {
        SUPPLIER_NAME: every_package(lambda p: bool(p.get("supplier"))),
        COMPONENT_NAME: every_package(lambda p: bool(p.get("name"))),
        COMPONENT_VERSION: every_package(lambda p: bool(p.get("versionInfo"))),
        UNIQUE_IDENTIFIER: every_package(_has_identifier),
        DEPENDENCY_RELATIONSHIP: any(
            r.get("relationshipType") in DEPENDENCY_TYPES for r in relationships
        ),
        SBOM_AUTHOR: any(
            a.path.startswith("creationInfo/creators/") and a.value for a in sbom.attributes
        ),
        TIMESTAMP: bool(sbom.value_of("creationInfo/created")),
    }
    present = frozenset(name for name, ok in found.items() if ok)
    return ComplianceReport(present=present, missing=NTIA_FIELDS - present)
