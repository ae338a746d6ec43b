"""Window statistics over daily close matrices

All functions take a (dates × assets) array and a period index `t`; only
rows up to and including `t` are read.

"""

from typing import TypeVar

import numpy as np
import pandas as pd

DFSeries_t = TypeVar("DFSeries_t", pd.Series, pd.DataFrame)

DISPERSION_FLOOR = 1e-12


def _check(close: np.ndarray, t: int):
    if not 0 <= t < len(close):
        raise IndexError(f"{t=}: period out of range [0, {len(close)})")


def base_index(t: int, k: int) -> int:
    """Row a `k`-day return at `t` is measured from, clipped at the first row

    >>> base_index(40, 30), base_index(10, 30)
    (10, 0)

    """
    return max(0, t - k)


def simple_returns(close: np.ndarray, t: int, k: int) -> np.ndarray:
    _check(close, t)
    return close[t] / close[base_index(t, k)] - 1


def log_returns(close: np.ndarray, t: int, k: int) -> np.ndarray:
    _check(close, t)
    return np.log(close[t] / close[base_index(t, k)])


def daily_log_returns(close: np.ndarray, t: int, n: int) -> np.ndarray:
    """The last (at most) `n` daily log returns ending at `t`, row per day"""
    _check(close, t)
    window = close[base_index(t, n) : t + 1]
    return np.diff(np.log(window), axis=0)


def realized_vol(close: np.ndarray, t: int, n: int) -> np.ndarray:
    """Sample std of daily log returns; 0 with fewer than 2 returns"""
    rets = daily_log_returns(close, t, n)
    if len(rets) < 2:
        return np.zeros(close.shape[1:])
    return rets.std(axis=0, ddof=1)


def cross_zscore(values: np.ndarray) -> np.ndarray:
    """Cross-sectional z-score (population std); zeros without dispersion

    >>> cross_zscore(np.array([1.0, 2.0, 3.0])).round(4).tolist()
    [-1.2247, 0.0, 1.2247]
    >>> cross_zscore(np.array([0.1, 0.1])).tolist()
    [0.0, 0.0]

    """
    values = np.asarray(values, dtype=float)
    spread = values.std()
    if values.size < 2 or spread < DISPERSION_FLOOR:
        return np.zeros_like(values)
    return (values - values.mean()) / spread


def basket_levels(close: np.ndarray, t: int, n: int) -> np.ndarray:
    """Daily rebalanced equal-weight basket level over the window ending at `t`

    The basket starts at 1 on the first row of the window.

    """
    _check(close, t)
    window = close[base_index(t, n) : t + 1]
    growth = 1 + (window[1:] / window[:-1] - 1).mean(axis=1)
    return np.concatenate([[1.0], np.cumprod(growth)])


def basket_log_return(close: np.ndarray, t: int, n: int) -> float:
    return float(np.log(basket_levels(close, t, n)[-1]))


def basket_vol(close: np.ndarray, t: int, n: int) -> float:
    """Sample std of the basket's daily log returns; 0 with fewer than 2"""
    rets = np.diff(np.log(basket_levels(close, t, n)))
    return float(rets.std(ddof=1)) if len(rets) >= 2 else 0.0


def window_zscore(series: np.ndarray, t: int, n: int) -> float:
    """z-score of the value at `t` against the trailing `n`-day window

    Missing values in the window are dropped; NaN when the value at `t` is
    missing or fewer than 2 observations remain.

    """
    window = np.asarray(series[base_index(t, n) : t + 1], dtype=float)
    window = window[np.isfinite(window)]
    if not np.isfinite(series[t]) or len(window) < 2:
        return np.nan
    spread = window.std(ddof=1)
    if spread < DISPERSION_FLOOR:
        return 0.0
    return float((series[t] - window.mean()) / spread)


def expanding_zscore(series: np.ndarray, t: int) -> float:
    """z-score of the value at `t` against all history up to `t`"""
    return window_zscore(series, t, t)


def max_gap(df: pd.DataFrame) -> pd.Series:
    """Longest run of missing rows per column, ignoring leading missing rows

    >>> df = pd.DataFrame({"a": [1, None, None, 2], "b": [None, 1, 2, None]})
    >>> max_gap(df).tolist()
    [2, 1]

    """
    missing = df.isna()
    gaps = {}
    for col in df.columns:
        runs = (~missing[col]).cumsum()
        started = runs > 0
        lens = missing[col][started].groupby(runs[started]).sum()
        gaps[col] = int(lens.max()) if len(lens) else 0
    return pd.Series(gaps, dtype=int)


def to_calendar(df: DFSeries_t) -> DFSeries_t:
    """Reindex onto the daily calendar spanning the table"""
    days = pd.date_range(df.index[0], df.index[-1], freq="D", name=df.index.name)
    return df.reindex(days)
