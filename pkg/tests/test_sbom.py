import copy
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from trustchain.sbom import (
    NTIA_FIELDS,
    NTIA_SPDX_MAPPING,
    AttributePair,
    CanonicalSbom,
    ComponentId,
    MalformedJson,
    NotSpdx,
    UnsupportedVersion,
    check_ntia_minimum,
    flatten,
    parse_spdx,
    sbom_digest,
    sbom_digest_hex,
)


def oracle_attributes(document):
    """Independent recursive walk: every scalar leaf, slash paths, byte-sorted."""
    leaves = []

    def walk(node, parts):
        if isinstance(node, dict):
            for k in node:
                walk(node[k], parts + [k])
        elif isinstance(node, list):
            for i in range(len(node)):
                walk(node[i], parts + [str(i)])
        else:
            if node is None:
                text = ""
            elif isinstance(node, bool):
                text = "true" if node else "false"
            elif isinstance(node, int):
                text = str(node)
            else:
                text = node
            leaves.append(("/".join(parts), text))

    walk(document, [])
    return sorted(leaves, key=lambda pv: pv[0].encode("utf-8"))


def encode(document) -> bytes:
    return json.dumps(document).encode()


MINIMAL = {"spdxVersion": "SPDX-2.2", "packages": [{"name": "redis-py", "versionInfo": "4.5.3"}]}


class TestParse:
    def test_minimal_package(self):
        sbom = parse_spdx(encode(MINIMAL))
        assert AttributePair("packages/0/name", "redis-py") in sbom.attributes
        assert [c.rendered for c in sbom.component_ids] == ["redis-py@4.5.3"]

    def test_zero_packages(self):
        sbom = parse_spdx(encode({"spdxVersion": "SPDX-2.2", "name": "empty"}))
        assert sbom.component_ids == ()
        assert sbom.paths == ["name", "spdxVersion"]

    def test_fixture_matches_oracle(self, spdx_bytes, spdx_doc):
        sbom = parse_spdx(spdx_bytes)
        expected = oracle_attributes(spdx_doc)
        assert [(a.path, a.value) for a in sbom.attributes] == expected
        assert len(sbom.attributes) == 49

    def test_fixture_components(self, spdx_bytes):
        ids = [c.rendered for c in parse_spdx(spdx_bytes).component_ids]
        assert ids == ["acme-gateway@2.1.0", "componentA@1", "redis-py@4.5.3"]

    def test_scalars_rendered(self):
        doc = {"spdxVersion": "SPDX-2.2", "a": True, "b": None, "c": 1.0, "d": 1e21, "e": [False]}
        sbom = parse_spdx(encode(doc))
        assert sbom.value_of("a") == "true"
        assert sbom.value_of("b") == ""
        assert sbom.value_of("c") == "1"
        assert sbom.value_of("d") == "1e+21"
        assert sbom.value_of("e/0") == "false"

    def test_containers_are_not_leaves(self):
        sbom = parse_spdx(encode({"spdxVersion": "SPDX-2.2", "x": {}, "y": []}))
        assert sbom.paths == ["spdxVersion"]

    def test_source_digest_is_raw_bytes(self, spdx_bytes):
        assert parse_spdx(spdx_bytes).source_digest == sbom_digest(spdx_bytes)

    def test_errors(self):
        with pytest.raises(MalformedJson):
            parse_spdx(b"{not json")
        with pytest.raises(MalformedJson):
            parse_spdx(b"\xff\xfe")
        with pytest.raises(MalformedJson):
            parse_spdx(b'{"spdxVersion": "SPDX-2.2", "x": NaN}')
        with pytest.raises(NotSpdx):
            parse_spdx(b'{"name": "x"}')
        with pytest.raises(NotSpdx):
            parse_spdx(b"[1, 2]")
        with pytest.raises(UnsupportedVersion):
            parse_spdx(b'{"spdxVersion": "SPDX-2.3"}')

    @pytest.mark.parametrize(
        "raw", [b'{"spdxVersion": "SPDX-2.2", "\\ud800": 1}', b'{"spdxVersion": "SPDX-2.2", "k": "\\udc00"}']
    )
    def test_lone_surrogates_rejected(self, raw):
        with pytest.raises(MalformedJson):
            parse_spdx(raw)

    @pytest.mark.parametrize("key", ["a/b", "", "tab\there", "unit\x1fsep"])
    def test_unrepresentable_keys_rejected(self, key):
        with pytest.raises(MalformedJson):
            parse_spdx(encode({"spdxVersion": "SPDX-2.2", key: 1}))

    def test_idempotent(self, spdx_bytes):
        assert parse_spdx(spdx_bytes) == parse_spdx(spdx_bytes)

    def test_key_order_insensitive(self, spdx_doc):
        reordered = json.loads(json.dumps(spdx_doc, sort_keys=True))
        a = parse_spdx(encode(spdx_doc))
        b = parse_spdx(json.dumps(reordered, indent=4).encode())
        assert a.attributes == b.attributes
        assert a.component_ids == b.component_ids
        assert a.source_digest != b.source_digest

    def test_json_round_trip(self, spdx_bytes):
        sbom = parse_spdx(spdx_bytes)
        data = json.loads(json.dumps(sbom.to_json()))
        assert set(data) == {"attributes", "componentIds", "sourceDigest"}
        assert CanonicalSbom.from_json(data) == sbom


text = st.text(st.characters(blacklist_categories=("Cs",)), max_size=5)
leaf = st.one_of(st.none(), st.booleans(), st.integers(-(10**6), 10**6), text)
keys = st.text(
    st.characters(blacklist_characters="/\x1f", blacklist_categories=("Zs", "Cc", "Cs")), min_size=1, max_size=5
)
trees = st.recursive(
    leaf, lambda inner: st.one_of(st.lists(inner, max_size=3), st.dictionaries(keys, inner, max_size=3)), max_leaves=15
)


class TestProperties:
    @given(st.dictionaries(keys, trees, max_size=5))
    def test_flatten_agrees_with_oracle(self, body):
        body = {k: v for k, v in body.items() if k != "spdxVersion"}
        doc = {"spdxVersion": "SPDX-2.2", **body}
        sbom = parse_spdx(encode(doc))
        assert [(a.path, a.value) for a in sbom.attributes] == oracle_attributes(doc)

    @given(st.dictionaries(keys, trees, max_size=5))
    def test_flatten_counts_scalars(self, body):
        assert len(flatten(body)) == len(oracle_attributes(body))


class TestComponentId:
    def test_parse_splits_on_last_at(self):
        cid = ComponentId.parse("@scope/pkg@1.0")
        assert (cid.name, cid.version) == ("@scope/pkg", "1.0")

    def test_rendered(self):
        assert ComponentId("componentA", "2").rendered == "componentA@2"

    @pytest.mark.parametrize("bad", ["noversion", "@1.0", "a\x00b@1"])
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            ComponentId.parse(bad)


class TestDigest:
    def test_vectors(self):
        assert sbom_digest_hex(b"") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        assert sbom_digest_hex(b"abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"

    def test_deterministic(self, spdx_bytes):
        assert sbom_digest(spdx_bytes) == sbom_digest(bytes(spdx_bytes))


def drop(doc, *path):
    """Remove the element at ``path``; ``*`` applies to every array item."""
    doc = copy.deepcopy(doc)

    def go(node, rest):
        head, tail = rest[0], rest[1:]
        targets = range(len(node)) if head == "*" else [head]
        for t in targets:
            if tail:
                go(node[t], tail)
            else:
                del node[t]

    go(doc, list(path))
    return doc


# each NTIA element and a mutation that removes exactly its SPDX location
NTIA_MUTATIONS = {
    "supplier name": ("packages", "*", "supplier"),
    "component name": ("packages", 1, "name"),
    "component version": ("packages", "*", "versionInfo"),
    "unique identifier": ("packages", 2, "externalRefs"),
    "dependency relationship": ("relationships",),
    "SBOM author": ("creationInfo", "creators"),
    "timestamp": ("creationInfo", "created"),
}


class TestNtia:
    def test_fixture_compliant(self, spdx_bytes):
        report = check_ntia_minimum(parse_spdx(spdx_bytes))
        assert report.compliant
        assert report.present == NTIA_FIELDS

    def test_seven_fields(self):
        assert len(NTIA_FIELDS) == 7
        assert set(NTIA_SPDX_MAPPING) == NTIA_FIELDS
        assert set(NTIA_MUTATIONS) == NTIA_FIELDS

    @pytest.mark.parametrize("field", sorted(NTIA_MUTATIONS))
    def test_each_field_detected_missing(self, spdx_doc, field):
        report = check_ntia_minimum(parse_spdx(encode(drop(spdx_doc, *NTIA_MUTATIONS[field]))))
        assert report.missing == {field}
        assert not report.compliant

    def test_empty_sbom_missing_everything(self):
        assert check_ntia_minimum(CanonicalSbom.from_pairs([])).missing == NTIA_FIELDS

    def test_identifier_needs_recognised_type(self, spdx_doc):
        doc = copy.deepcopy(spdx_doc)
        doc["packages"][0]["externalRefs"][0]["referenceType"] = "website"
        assert "unique identifier" in check_ntia_minimum(parse_spdx(encode(doc))).missing

    def test_describes_is_not_a_dependency(self, spdx_doc):
        doc = copy.deepcopy(spdx_doc)
        doc["relationships"] = [r for r in doc["relationships"] if r["relationshipType"] == "DESCRIBES"]
        assert check_ntia_minimum(parse_spdx(encode(doc))).missing == {"dependency relationship"}
