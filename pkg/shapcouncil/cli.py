"""Command line: ``backtest``, ``shapley``, and ``report`` subcommands

Failures exit with status 2 and a one-line diagnostic on stderr.

"""

from argparse import ArgumentParser, Namespace
import logging
from logging import getLogger
from pathlib import Path
from typing import List, Optional, Sequence

from friendly_data.io import dwim_file

from shapcouncil.backtest import CouncilBacktest
from shapcouncil.config import RunConfig
from shapcouncil.io import load_features, load_prices, read_tweets
from shapcouncil.market import sentiment_features
from shapcouncil.metrics import Metrics, encode_float
from shapcouncil.shapley import (
    CharacteristicGame,
    axiom_check,
    shapley_closed3,
    truncate_normalize,
)
from shapcouncil.trace import emit_trace, parse_trace, render

logger = getLogger(__name__)

EXIT_FAILURE = 2


def _game(text: str) -> List[float]:
    values = [float(v) for v in text.split(",")]
    if len(values) != 7:
        raise ValueError(
            f"{len(values)} values: expected v1,v2,v3,v12,v13,v23,v123"
        )
    return values


def make_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="council", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    subparsers = parser.add_subparsers(dest="command", required=True)

    bt = subparsers.add_parser("backtest", help="Run the council over a price table")
    bt.add_argument("--prices", help="Daily close prices, date,ASSET1,...")
    bt.add_argument("--features", help="On-chain and macro features, date,NAME1,...")
    bt.add_argument("--tweets", help="Labelled tweets, scored into sentiment features")
    bt.add_argument("--config", help="YAML configuration file")
    bt.add_argument("--from", dest="start", help="First decision date")
    bt.add_argument("--to", dest="end", help="Last decision date")
    bt.add_argument(
        "--bps", type=float, help="One-way cost per unit turnover (basis points)"
    )
    bt.add_argument("--seed", type=int, help="Seed for stochastic policy sets")
    bt.add_argument("--out", help="Output directory")
    bt.add_argument("--progress", action="store_true", help="Show a progress bar")

    sh = subparsers.add_parser("shapley", help="Shapley credit of a three-player game")
    sh.add_argument("--game", required=True, help="v1,v2,v3,v12,v13,v23,v123")

    rp = subparsers.add_parser("report", help="Explain one period of a trace")
    rp.add_argument("--trace", required=True, help="Trace file written by backtest")
    rp.add_argument("--period", type=int, default=0, help="0-based record index")
    return parser


def _print_metrics(name: str, m: Metrics):
    cells = " ".join(
        f"{k.upper()}={encode_float(getattr(m, k))}" for k in ("cr", "sr", "mdd", "ir")
    )
    print(f"{name:<10} {cells}")


def cmd_backtest(opts: Namespace) -> int:
    conf = RunConfig.from_file(
        opts.config,
        prices=opts.prices,
        features=opts.features,
        tweets=opts.tweets,
        bps=opts.bps,
        seed=opts.seed,
        out=opts.out,
        **{"from": opts.start, "to": opts.end},
    )
    if conf["prices"] is None:
        raise ValueError("prices: no price table given")
    if conf["out"] is None:
        raise ValueError("out: no output directory given")
    prices = load_prices(conf["prices"], end=conf["to"])
    if conf["assets"]:
        prices = prices.select(conf["assets"])
    features = load_features(conf["features"], prices.dates)
    if conf["tweets"] is not None:
        features = features.join(sentiment_features(read_tweets(conf["tweets"])))
    backtest = CouncilBacktest(prices, features, conf)
    result = backtest.run(conf["from"], conf["to"], opts.progress)

    outdir = Path(conf["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    trace_path = outdir / "trace.jsonl"
    result.trace_path = emit_trace(result.records, trace_path, result.assets)
    result.equity.to_csv(outdir / "equity.csv")
    conf.dump(outdir / "config.yaml")
    summary = result.summary()
    dwim_file(outdir / "summary.yaml", summary)

    _print_metrics("council", result.metrics())
    for name, m in result.benchmark_metrics().items():
        _print_metrics(name, m)
    return 0


def _fmt(vec: Sequence[float]) -> str:
    return ", ".join(f"{v:.6g}" for v in vec)


def cmd_shapley(opts: Namespace) -> int:
    game = CharacteristicGame.from_sequence(opts.game)
    credit = shapley_closed3(game)
    report = axiom_check(game, credit)
    print(f"game: {game}")
    print(f"phi: ({_fmt(credit.phi)})")
    print(f"weights: ({_fmt(truncate_normalize(credit.phi))})")
    for axiom, residual in report.residuals.items():
        status = "ok" if report.passed[axiom] else "FAILED"
        print(f"{axiom:<11} residual {residual:.3g} {status}")
    if report.symmetric_pairs:
        print(f"symmetric pairs: {report.symmetric_pairs}")
    if report.dummies:
        print(f"dummy players: {report.dummies}")
    return 0


def cmd_report(opts: Namespace) -> int:
    header, records = parse_trace(opts.trace)
    if not 0 <= opts.period < len(records):
        raise IndexError(f"{opts.period}: period out of range [0, {len(records)})")
    print(render(records[opts.period], header["assets"]))
    return 0


COMMANDS = {"backtest": cmd_backtest, "shapley": cmd_shapley, "report": cmd_report}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = make_parser()
    opts = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if opts.verbose else logging.WARNING,
        format="%(levelname)s:%(name)s: %(message)s",
    )
    if opts.command == "shapley":
        try:
            opts.game = _game(opts.game)
        except ValueError as err:
            parser.error(f"--game: {err}")
    try:
        return COMMANDS[opts.command](opts)
    except (FileNotFoundError, ValueError, KeyError, IndexError) as err:
        msg = err.args[0] if err.args else type(err).__name__
        parser.exit(EXIT_FAILURE, f"{parser.prog} {opts.command}: error: {msg}\n")
