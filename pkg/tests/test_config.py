import pytest

from shapcouncil.config import DEFAULTS, RunConfig, layer_configs, validate


def test_defaults_validate():
    assert validate(dict(DEFAULTS)) == DEFAULTS


def test_layers_later_wins():
    conf = RunConfig.from_layers({"bps": 5, "lambda": 40.0}, {"bps": 10})
    assert conf["bps"] == 10
    assert conf["lambda"] == 40.0
    assert conf["h"] == DEFAULTS["h"]


@pytest.mark.parametrize(
    "key, value",
    [
        ("w_max", 1.5),
        ("c_max", -0.1),
        ("lambda", 0),
        ("theta_wta", 1.0),
        ("xi_minus", 0.3),
        ("n_win", 0),
        ("roles.benchmarks", "BTC"),
        ("agents.macro_signals", {"vix": 2}),
    ],
)
def test_out_of_range(key, value):
    with pytest.raises(ValueError, match=f"{key}: invalid value"):
        RunConfig.from_layers({key: value})


def test_unknown_key():
    with pytest.raises(KeyError, match="unknown configuration key"):
        RunConfig.from_layers({"lamda": 30})


@pytest.mark.parametrize(
    "layer",
    [
        {"gamma_rho": 0.5, "gamma_mu": 0.6},
        {"beta_s1_center": 0.95, "beta_s1_scale": 0.09},
        {"roles.dominance_recipients": ["BTC"], "roles.recipient_shares": [0.5, 0.5]},
        {"multiplier_anchors": [[1.0, 1.0]]},
    ],
)
def test_cross_key_constraints(layer):
    with pytest.raises(ValueError):
        validate(layer)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError, match="config file not found"):
        RunConfig.from_file(tmp_path / "nope.yaml")


def test_file_then_flags(tmp_path):
    fpath = tmp_path / "conf.yaml"
    fpath.write_text("bps: 5\nw_max: 0.35\n")
    conf = RunConfig.from_file(fpath, bps=2.0, seed=None)
    assert conf["bps"] == 2.0
    assert conf["w_max"] == 0.35
    assert conf["seed"] == DEFAULTS["seed"]


def test_dump_round_trip(tmp_path):
    conf = RunConfig.from_layers(
        {"bps": 5.0, "from": "2023-04-01", "assets": ["BTC", "ETH"]}
    )
    fpath = conf.dump(tmp_path / "config.yaml")
    assert RunConfig.from_file(fpath) == conf


def test_override_validates(conf):
    assert conf.override(bps=3.0)["bps"] == 3.0
    with pytest.raises(ValueError):
        conf.override(bps=-1.0)


def test_subset(conf):
    roles = conf.subset("roles")
    assert roles["dominance_recipients"] == ["BTC", "TRX", "ZEC"]
    assert "btc_floor" not in roles


def test_layers_replace_mappings():
    merged = layer_configs([{"a": {"x": 1, "y": 1}, "b": 1}, {"a": {"y": 2}}])
    assert merged == {"a": {"y": 2}, "b": 1}


def test_file_drops_macro_signals(tmp_path):
    fpath = tmp_path / "conf.yaml"
    fpath.write_text("agents.macro_signals:\n  vix: -1\n")
    conf = RunConfig.from_file(fpath)
    assert conf["agents.macro_signals"] == {"vix": -1}
    assert DEFAULTS["agents.macro_signals"]["sentiment"] == 1
