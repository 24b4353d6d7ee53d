import pytest
from hypothesis import given, settings, strategies as st

from whomog.config import KEYS, RunConfig, defaults_table, parse_config, serialize_config
from whomog.errors import ParseError, ValidationError


def test_empty_file_gives_defaults():
    cfg = parse_config("")
    assert all(cfg[k] == spec.default for k, spec in KEYS.items())
    assert cfg.explicit == frozenset()


def test_fraction_accepted_for_reciprocal_keys():
    cfg = parse_config("[macro]\nh = 1/3\n")
    assert cfg["macro.h"] == 1 / 3
    assert parse_config("macro.h = 0.25")["macro.h"] == 0.25


def test_non_reciprocal_value_names_the_key():
    with pytest.raises(ValidationError) as exc:
        parse_config("[macro]\nh = 0.3\n")
    assert exc.value.key == "macro.h"


def test_misspelled_key_reports_line():
    with pytest.raises(ParseError) as exc:
        parse_config("# comment\n\nmacroo.h = 1/8\n")
    assert exc.value.line == 3
    with pytest.raises(ParseError, match="unknown section"):
        parse_config("[macroo]\nh = 1/8\n")


@pytest.mark.parametrize("text", ["[macro\nh=1", "just words", "[macro]\n= 3", "a.b.c = 1"])
def test_malformed_lines(text):
    with pytest.raises(ParseError):
        parse_config(text)


def test_duplicate_key():
    with pytest.raises(ParseError, match="duplicate"):
        parse_config("[micro]\ndt = 0.1\n[micro]\ndt = 0.2\n")


@pytest.mark.parametrize("line,key", [
    ("macro.dt = -1", "macro.dt"),
    ("sweep.ratio = 1.5", "sweep.ratio"),
    ("sweep.snapshots = 2.5", "sweep.snapshots"),
    ("model.reaction = magic", "model.reaction"),
    ("micro.dt = fast", "micro.dt"),
    ("sweep.epsilons = 1/2, 0.3", "sweep.epsilons"),
])
def test_validation_errors_name_the_key(line, key):
    with pytest.raises(ValidationError) as exc:
        parse_config(line)
    assert exc.value.key == key


def test_cross_checks():
    with pytest.raises(ValidationError, match="multiple"):
        parse_config("[sweep]\nmacro_h = 1/6\nepsilons = 1/4\n")
    with pytest.raises(ValidationError):
        parse_config("[geometry]\nradius = 0.49\n")


def test_round_trip_is_canonical():
    cfg = parse_config("[micro]\nepsilon = 1/16\ndt = 0.002\n[sweep]\nepsilons = 1/2, 1/4\n[output]\ntimes = 0, 0.1\n")
    text = serialize_config(cfg)
    again = parse_config(text)
    assert again.values == cfg.values
    assert serialize_config(again) == text


@settings(max_examples=30, deadline=None)
@given(dt=st.floats(1e-6, 1.0), T=st.floats(0.0, 10.0), n=st.integers(1, 64))
def test_round_trip_property(dt, T, n):
    cfg = RunConfig().set("micro.dt", repr(dt)).set("micro.T", repr(T)).set("micro.epsilon", f"1/{n}")
    again = parse_config(serialize_config(cfg))
    assert again.values == cfg.values


def test_output_times():
    cfg = RunConfig()
    assert cfg.output_times(1.0) == pytest.approx([i / 10 for i in range(11)])
    cfg.set("output.times", "0.5, 0.1")
    assert cfg.output_times(1.0) == [0.1, 0.5]
    with pytest.raises(ValidationError):
        cfg.output_times(0.2)
    with pytest.raises(ParseError):
        cfg.set("nope.key", "1")


def test_defaults_table_lists_every_key():
    table = defaults_table()
    assert all(f"`{k}`" in table for k in KEYS)
