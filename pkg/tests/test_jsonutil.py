from __future__ import annotations

import datetime
import json
from decimal import Decimal

import pytest
from hypothesis import given, strategies as st

from dwengine import jsonutil


def test_decimals_emit_as_plain_numbers():
    assert jsonutil.dumps({"x": Decimal("10.50")}) == '{"x":10.5}'
    assert jsonutil.dumps([Decimal("2.0"), Decimal("100")]) == "[2,100]"
    assert jsonutil.dumps(Decimal("0.1")) == "0.1"
    # normalize() alone would print 1E+2; the writer must not.
    assert jsonutil.dumps(Decimal("100").normalize()) == "100"


def test_round_trip_preserves_decimal_exactness():
    text = '{"a":0.1,"b":10.50,"c":3}'
    data = jsonutil.loads(text)
    assert data["a"] == Decimal("0.1") and isinstance(data["a"], Decimal)
    assert isinstance(data["c"], int)
    assert jsonutil.loads(jsonutil.dumps(data)) == data


def test_dates_serialize_iso():
    assert jsonutil.dumps(datetime.date(1998, 11, 15)) == '"1998-11-15"'
    assert jsonutil.dumps(datetime.datetime(1998, 11, 15, 10, 30)) \
        == '"1998-11-15T10:30:00"'


def test_non_ascii_escaped_like_stdlib():
    for text in ("Département", "Qté_acte", "práctica", "日本", "a\nb", 'quo"te'):
        assert jsonutil.dumps(text) == json.dumps(text)


def test_astral_plane_uses_surrogate_pairs():
    assert jsonutil.dumps("\U0001F600") == json.dumps("\U0001F600")


def test_sort_keys_and_indent():
    data = {"b": 1, "a": {"z": [1, 2], "y": None}}
    assert jsonutil.dumps(data, sort_keys=True) == '{"a":{"y":null,"z":[1,2]},"b":1}'
    pretty = jsonutil.dumps(data, indent=2)
    assert json.loads(pretty) == {"b": 1, "a": {"z": [1, 2], "y": None}}


def test_dump_lines():
    text = jsonutil.dump_lines([{"a": 1}, {"b": Decimal("2.5")}])
    assert text == '{"a":1}\n{"b":2.5}\n'


def test_non_string_keys_rejected():
    with pytest.raises(TypeError):
        jsonutil.dumps({1: "x"})


@given(st.recursive(
    st.none() | st.booleans() | st.integers(-10**12, 10**12)
    | st.decimals(allow_nan=False, allow_infinity=False, places=6)
    | st.text(max_size=20),
    lambda children: st.lists(children, max_size=4)
    | st.dictionaries(st.text(max_size=8), children, max_size=4),
    max_leaves=20))
def test_output_always_parseable_and_stable(value):
    text = jsonutil.dumps(value)
    parsed = json.loads(text, parse_float=Decimal)
    assert jsonutil.dumps(parsed) == text
