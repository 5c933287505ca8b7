import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from trustchain.encoding import (
    _encode,
    canonical_json,
    expect_keys,
    from_hex,
    parse_rfc3339,
    render_number,
    rfc3339,
    sha256_hex,
)


class TestSha256:
    # FIPS 180-2 test vectors
    def test_empty(self):
        assert sha256_hex(b"") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"

    def test_abc(self):
        assert sha256_hex(b"abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"


class TestRenderNumber:
    # expected strings are what ECMAScript Number#toString produces
    @pytest.mark.parametrize(
        "value, text",
        [
            (0, "0"),
            (-0.0, "0"),
            (1.0, "1"),
            (-7, "-7"),
            (2**53 + 1, "9007199254740993"),
            (0.1 + 0.2, "0.30000000000000004"),
            (1e21, "1e+21"),
            (1e20, "100000000000000000000"),
            (123456789012345680000.0, "123456789012345680000"),
            (1e-6, "0.000001"),
            (1e-7, "1e-7"),
            (1.5e-7, "1.5e-7"),
            (123e-20, "1.23e-18"),
            (5e-324, "5e-324"),
            (1.7976931348623157e308, "1.7976931348623157e+308"),
            (2.5, "2.5"),
        ],
    )
    def test_ecmascript_vectors(self, value, text):
        assert render_number(value) == text

    @pytest.mark.parametrize("bad", [float("nan"), float("inf"), float("-inf")])
    def test_non_finite_rejected(self, bad):
        with pytest.raises(ValueError):
            render_number(bad)

    @given(st.floats(allow_nan=False, allow_infinity=False))
    def test_round_trips(self, x):
        assert float(render_number(x)) == x


json_scalars = st.one_of(st.none(), st.booleans(), st.integers(-(2**60), 2**60), st.text(max_size=8))
json_values = st.recursive(
    json_scalars,
    lambda inner: st.one_of(st.lists(inner, max_size=4), st.dictionaries(st.text(max_size=6), inner, max_size=4)),
    max_leaves=20,
)


class TestCanonicalJson:
    def test_sorted_compact_utf8(self):
        assert canonical_json({"b": [1, "é"], "a": {"y": None, "x": True}}) == (
            '{"a":{"x":true,"y":null},"b":[1,"é"]}'.encode()
        )

    def test_keys_sorted_by_code_point(self):
        assert canonical_json({"a": 1, "B": 2, "á": 3, "_": 4}) == '{"B":2,"_":4,"a":1,"á":3}'.encode()

    def test_float_rendering(self):
        assert canonical_json({"x": 1.0, "y": [1e21, 0.5]}) == b'{"x":1,"y":[1e+21,0.5]}'

    def test_control_characters_escaped(self):
        assert canonical_json("a\nb\x01") == b'"a\\nb\\u0001"'

    def test_non_string_key_rejected(self):
        with pytest.raises(TypeError):
            canonical_json({1: "x"})

    def test_unsupported_type_rejected(self):
        with pytest.raises(TypeError):
            canonical_json({"x": object()})

    @given(json_values)
    def test_parses_back(self, value):
        assert json.loads(canonical_json(value)) == value

    @given(json_values)
    def test_fast_path_matches_reference_encoder(self, value):
        out = []
        _encode(value, out)
        assert canonical_json(value) == "".join(out).encode()

    @given(json_values)
    def test_idempotent(self, value):
        once = canonical_json(value)
        assert canonical_json(json.loads(once)) == once


class TestHex:
    def test_lowercase_only(self):
        assert from_hex("00ff") == b"\x00\xff"
        with pytest.raises(ValueError):
            from_hex("00FF")

    @pytest.mark.parametrize("bad", ["0", "zz", " 00", 5, None])
    def test_malformed(self, bad):
        with pytest.raises(ValueError):
            from_hex(bad)

    def test_size_enforced(self):
        with pytest.raises(ValueError):
            from_hex("00" * 31, 32)


class TestMisc:
    def test_expect_keys_exact(self):
        expect_keys({"a": 1}, {"a"}, "thing")
        with pytest.raises(ValueError):
            expect_keys({"a": 1, "b": 2}, {"a"}, "thing")
        with pytest.raises(ValueError):
            expect_keys([], {"a"}, "thing")

    def test_rfc3339(self):
        assert rfc3339(1704067200) == "2024-01-01T00:00:00Z"
        assert parse_rfc3339("2024-01-01T00:00:12Z") == 1704067212

    @given(st.integers(0, 2**34))
    def test_rfc3339_round_trip(self, t):
        assert parse_rfc3339(rfc3339(t)) == t
