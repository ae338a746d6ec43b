from friendly_data.io import dwim_file
import numpy as np
import pandas as pd
import pytest

from shapcouncil.cli import main
from shapcouncil.trace import parse_trace


@pytest.fixture
def price_file(toy_prices, tmp_path):
    fpath = tmp_path / "prices.csv"
    toy_prices.frame.to_csv(fpath)
    return fpath


def _backtest(price_file, outdir, *flags):
    return main(["backtest", "--prices", str(price_file), "--out", str(outdir), *flags])


@pytest.mark.parametrize(
    "game, expected",
    [
        ("1,2,3,4,5,6,9", "phi: (2, 3, 4)"),
        ("0,0,0,0,0,0,0", "phi: (0, 0, 0)"),
        ("1,1,1,2,2,2,3", "phi: (1, 1, 1)"),
    ],
)
def test_shapley(game, expected, capsys):
    assert main(["shapley", "--game", game]) == 0
    out = capsys.readouterr().out
    assert expected in out
    assert "FAILED" not in out


def test_shapley_arity(capsys):
    with pytest.raises(SystemExit) as err:
        main(["shapley", "--game", "1,2,3"])
    assert err.value.code == 2
    assert "expected v1,v2,v3" in capsys.readouterr().err


def test_missing_price_file(tmp_path, capsys):
    with pytest.raises(SystemExit) as err:
        _backtest(tmp_path / "nope.csv", tmp_path / "out")
    assert err.value.code == 2
    assert "price table not found" in capsys.readouterr().err


def test_no_prices(tmp_path, capsys):
    with pytest.raises(SystemExit) as err:
        main(["backtest", "--out", str(tmp_path)])
    assert err.value.code == 2
    assert "no price table given" in capsys.readouterr().err


def test_backtest_outputs(price_file, tmp_path, capsys):
    outdir = tmp_path / "out"
    assert _backtest(price_file, outdir) == 0
    for name in ("trace.jsonl", "equity.csv", "config.yaml", "summary.yaml"):
        assert (outdir / name).is_file(), name
    summary = dwim_file(outdir / "summary.yaml")
    assert summary["periods"]["decisions"] == 90
    assert summary["bps"] == 0.0
    assert capsys.readouterr().out.startswith("council")


def test_backtest_costs(price_file, tmp_path):
    # without drawdown feedback both runs hold the same weights
    config = tmp_path / "conf.yaml"
    dwim_file(config, {"dd_nu": 0.0})
    _backtest(price_file, tmp_path / "free", "--config", str(config), "--bps", "0")
    _backtest(price_file, tmp_path / "costly", "--config", str(config), "--bps", "5")
    free = dwim_file(tmp_path / "free" / "summary.yaml")["metrics"]
    costly = dwim_file(tmp_path / "costly" / "summary.yaml")["metrics"]
    assert costly["cr"] < free["cr"]


def test_config_round_trip(price_file, tmp_path):
    _backtest(price_file, tmp_path / "first", "--bps", "5", "--from", "2024-01-15")
    config = tmp_path / "first" / "config.yaml"
    second = str(tmp_path / "second")
    assert main(["backtest", "--config", str(config), "--out", second]) == 0
    first = (tmp_path / "first" / "equity.csv").read_text()
    assert (tmp_path / "second" / "equity.csv").read_text() == first


def test_report(price_file, tmp_path, capsys):
    _backtest(price_file, tmp_path)
    capsys.readouterr()
    trace = str(tmp_path / "trace.jsonl")
    assert main(["report", "--trace", trace, "--period", "0"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("period 0 (2024-01-01)")
    assert "ω=(0.3333, 0.3333, 0.3333)" in out
    with pytest.raises(SystemExit) as err:
        main(["report", "--trace", trace, "--period", "90"])
    assert err.value.code == 2
    assert "out of range" in capsys.readouterr().err


def test_report_missing_trace(tmp_path, capsys):
    with pytest.raises(SystemExit) as err:
        main(["report", "--trace", str(tmp_path / "trace.jsonl")])
    assert err.value.code == 2
    assert "trace file not found" in capsys.readouterr().err


def test_backtest_tweets(price_file, toy_prices, tmp_path):
    dates = toy_prices.dates
    tweets = pd.DataFrame(
        {
            "date": dates.strftime("%Y-%m-%d"),
            "assets": "BTC|ETH",
            "label": np.where(np.arange(len(dates)) % 3 == 0, -1, 1),
            "confidence": 0.9,
            "likes": np.arange(len(dates)) % 7,
            "reposts": 0,
            "views": 100,
        }
    )
    fpath = tmp_path / "tweets.csv"
    tweets.to_csv(fpath, index=False)
    assert _backtest(price_file, tmp_path / "out", "--tweets", str(fpath)) == 0
    _, records = parse_trace(tmp_path / "out" / "trace.jsonl")
    assert all("sentiment" in rec.signals["macro_z"] for rec in records[5:])
    assert records[-1].coalitions["3"]["rationale"] != "risk-on 0.500"
