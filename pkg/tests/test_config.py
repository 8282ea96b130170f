import pytest
from hypothesis import given
from hypothesis import strategies as st

from heraldbell.config import SCHEMA, Config, ConfigError, dump_config, load_config, parse_config
from heraldbell.planner import ExperimentParams, ParameterError
from importlib.resources import files


def _shipped(name):
    return str(files("heraldbell") / "data" / name)


def test_shipped_baseline_equals_defaults():
    cfg = load_config(_shipped("baseline.ini"))
    assert cfg.params == ExperimentParams()
    assert cfg.simulation["mode"] == "herald-conditioned"


def test_shipped_boosted():
    cfg = load_config(_shipped("boosted.ini"))
    assert cfg.params.p == 0.5
    assert cfg.overrides == {"eta_c": 1.0, "eta_t": 1.0, "eta_abs": 1.0, "eta_d": 1.0}


def test_missing_keys_fall_back():
    cfg = parse_config("[source]\np = 1e-3\n")
    assert cfg.params == ExperimentParams(p=1e-3)
    assert load_config(None).params == ExperimentParams()


def test_comments_and_blank_lines():
    cfg = parse_config("# header\n\n[detection]  # trailing\neta_d = 0.5   # note\n")
    assert cfg.params.eta_d == 0.5


@pytest.mark.parametrize(("text", "line", "key"), [
    ("[source]\np = 1e-3\nbogus = 2\n", 3, "bogus"),
    ("[nowhere]\n", 1, "nowhere"),
    ("p = 0.1\n", 1, "p"),
    ("[source]\np 0.1\n", 2, None),
    ("[source]\np = abc\n", 2, "p"),
    ("[source]\np = 1\np = 2\n", 3, "p"),
    ("[atoms\n", 1, None),
    ("[simulation]\nseed = 1.5\n", 2, "seed"),
])
def test_parse_errors_name_file_line_key(text, line, key):
    with pytest.raises(ConfigError) as info:
        parse_config(text, "exp.ini")
    err = info.value
    assert err.path == "exp.ini" and err.line == line and err.key == key
    assert str(err).startswith(f"exp.ini:{line}:")
    if key:
        assert key in str(err)


def test_unknown_key_in_wrong_section():
    with pytest.raises(ConfigError, match="unknown key 'p'"):
        parse_config("[optics]\np = 0.1\n")


def test_domain_errors_propagate():
    with pytest.raises(ParameterError):
        parse_config("[source]\np = 1.5\n")


def test_missing_file():
    with pytest.raises(ConfigError, match="cannot read"):
        load_config("/nonexistent/x.ini")


def test_simulation_values():
    cfg = parse_config("[simulation]\nmode = full-chain\nseed = 12\nn_trials = 1e6\nn_heralds = none\n")
    assert cfg.simulation == {"mode": "full-chain", "seed": 12, "n_trials": 1_000_000, "n_heralds": None}


def test_booleans():
    assert parse_config("[atoms]\neta_abs = 0.5\nallow_absorption_above_cap = true\n").params.eta_abs == 0.5
    with pytest.raises(ConfigError):
        parse_config("[atoms]\nallow_absorption_above_cap = maybe\n")


def test_roundtrip_defaults_and_shipped():
    for cfg in (Config(), load_config(_shipped("baseline.ini")), load_config(_shipped("boosted.ini"))):
        text = dump_config(cfg)
        once = parse_config(text)
        assert once.params == cfg.params and once.simulation == cfg.simulation
        assert dump_config(once) == text


@given(p=st.floats(0, 1), eta_d=st.floats(0, 1), dist=st.floats(1, 1e6), seed=st.integers(0, 2**64 - 1),
       eta_t=st.one_of(st.none(), st.floats(0, 1)))
def test_roundtrip_property(p, eta_d, dist, seed, eta_t):
    cfg = Config(params=ExperimentParams(p=p, eta_d=eta_d, distance=dist, eta_t=eta_t),
                 simulation={"seed": seed, "n_heralds": 10})
    once = parse_config(dump_config(cfg))
    assert once.params == cfg.params and once.simulation == cfg.simulation
    assert dump_config(parse_config(dump_config(once))) == dump_config(once)


def test_schema_covers_params():
    fields = {k for keys in SCHEMA.values() for k in keys}
    assert set(ExperimentParams().to_dict()) <= fields
