#!/usr/bin/env python
"""Freeze the reference run on the synthetic market as a golden file

The file pins the metrics and the equity-curve digest of the default
configuration; ``tests/test_golden.py`` compares against it.

"""
from argparse import ArgumentParser
from pathlib import Path

from friendly_data.io import dwim_file

from shapcouncil.backtest import run
from shapcouncil.config import RunConfig
from shapcouncil.io import FeatureTable, PriceTable
from shapcouncil.synthetic import synthetic_market

parser = ArgumentParser()
parser.add_argument("-o", "--output", default="tests/data/golden.yaml")
parser.add_argument("--periods", type=int, default=540)
parser.add_argument("--seed", type=int, default=7)
parser.add_argument("--bps", type=float, nargs="+", default=[0.0, 5.0, 10.0])


if __name__ == "__main__":
    opts = parser.parse_args()
    prices, features = synthetic_market(periods=opts.periods, seed=opts.seed)
    golden = {"periods": opts.periods, "seed": opts.seed, "runs": {}}
    for bps in opts.bps:
        conf = RunConfig.from_layers({"bps": bps})
        result = run(PriceTable(prices), FeatureTable(features), conf)
        golden["runs"][f"{bps:g}"] = {
            "metrics": result.metrics().as_dict(),
            "digest": result.digest(),
        }
    Path(opts.output).parent.mkdir(parents=True, exist_ok=True)
    dwim_file(opts.output, golden)
