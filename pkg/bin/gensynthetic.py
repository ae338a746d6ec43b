#!/usr/bin/env python
"""Write the synthetic bull/volatile/bear market as price and feature CSVs

"""
from argparse import ArgumentParser

from shapcouncil.config import DEFAULT_ASSETS
from shapcouncil.synthetic import write_synthetic

parser = ArgumentParser()
parser.add_argument("-o", "--output", required=True, help="Output directory")
parser.add_argument("--periods", type=int, default=540, help="Number of daily rows")
parser.add_argument("--seed", type=int, default=7)
parser.add_argument("--assets", nargs="+", default=DEFAULT_ASSETS)


if __name__ == "__main__":
    opts = parser.parse_args()
    paths = write_synthetic(
        opts.output, assets=opts.assets, periods=opts.periods, seed=opts.seed
    )
    print(*paths, sep="\n")
