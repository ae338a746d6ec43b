#!/usr/bin/env python
"""Market regime council: backtest, Shapley credit, and trace reports

"""
import sys

from shapcouncil.cli import main


if __name__ == "__main__":
    sys.exit(main())
