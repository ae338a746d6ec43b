"""Performance metrics over daily simple returns

All ratios use a zero risk-free rate.  A Sharpe ratio over a series with no
dispersion is a signed infinity (0 when the mean is 0 as well); summaries
encode the infinities as the strings ``"+inf"`` and ``"-inf"``.

"""

from dataclasses import asdict, dataclass
from logging import getLogger
from typing import Dict, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

logger = getLogger(__name__)

ANNUALIZATION = 365

_float_t = Union[float, str, None]


def _series(returns: Sequence[float], name: str = "returns") -> np.ndarray:
    rets = np.asarray(returns, dtype=float)
    if rets.ndim != 1 or rets.size == 0:
        raise ValueError(f"{name}: need a nonempty series")
    if not np.isfinite(rets).all():
        raise ValueError(f"{name}: non-finite values")
    return rets


def _signed_ratio(values: np.ndarray) -> float:
    """mean/std (sample), with a signed infinity when std vanishes"""
    sd = values.std(ddof=1) if values.size > 1 else 0.0
    mean = values.mean()
    if sd > 0:
        return float(mean / sd)
    if mean == 0:
        return 0.0
    return float(np.copysign(np.inf, mean))


def cumulative_return(returns: Sequence[float]) -> float:
    """
    >>> round(cumulative_return([0.01, 0.01]), 10)
    0.0201
    """
    return float(np.prod(1 + _series(returns)) - 1)


def sharpe_ratio(
    returns: Sequence[float], annualization: float = ANNUALIZATION
) -> float:
    return float(np.sqrt(annualization) * _signed_ratio(_series(returns)))


def equity_curve(returns: Sequence[float], start: float = 1.0) -> np.ndarray:
    """Equity after each period, starting from `start` (not included)"""
    return start * np.cumprod(1 + _series(returns))


def drawdowns(equity: Sequence[float]) -> np.ndarray:
    """Fractional distance below the running peak

    >>> drawdowns([1.0, 1.2, 0.9, 1.3]).round(4).tolist()
    [0.0, 0.0, 0.25, 0.0]

    """
    equity = np.asarray(equity, dtype=float)
    peak = np.maximum.accumulate(equity)
    return 1 - equity / peak


def max_drawdown(returns: Sequence[float]) -> float:
    """Worst peak-to-trough loss, the initial capital counting as a peak

    >>> round(max_drawdown([-0.1, 0.05]), 10)
    0.1

    """
    equity = np.concatenate([[1.0], equity_curve(returns)])
    return float(drawdowns(equity).max())


def information_ratio(returns: Sequence[float], benchmark: Sequence[float]) -> float:
    """Daily mean active return over its tracking error

    0 when the active return is identically zero.

    """
    rets = _series(returns)
    bench = _series(benchmark, "benchmark")
    if rets.size != bench.size:
        raise ValueError(f"{rets.size} != {bench.size}: benchmark length differs")
    active = rets - bench
    if not active.any():
        return 0.0
    return _signed_ratio(active)


def encode_float(value: Optional[float]) -> _float_t:
    """Summary-safe float: infinities as strings, NaN as `None`

    >>> encode_float(float("inf")), encode_float(float("-inf")), encode_float(0.5)
    ('+inf', '-inf', 0.5)

    """
    if value is None or np.isnan(value):
        return None
    if np.isinf(value):
        return "+inf" if value > 0 else "-inf"
    return float(value)


def decode_float(value: _float_t) -> float:
    if value is None:
        return float("nan")
    if isinstance(value, str):
        try:
            return {"+inf": np.inf, "-inf": -np.inf}[value]
        except KeyError:
            raise ValueError(f"{value}: unknown float flag") from None
    return float(value)


@dataclass(frozen=True)
class Metrics:
    cr: float
    sr: float
    mdd: float
    ir: Optional[float] = None
    periods: int = 0

    def as_dict(self) -> Dict[str, _float_t]:
        return {
            k: (v if k == "periods" else encode_float(v))
            for k, v in asdict(self).items()
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Metrics":
        ir = data.get("ir")
        return cls(
            cr=decode_float(data["cr"]),
            sr=decode_float(data["sr"]),
            mdd=decode_float(data["mdd"]),
            ir=None if ir is None else decode_float(ir),
            periods=int(data.get("periods", 0)),
        )


def metrics(
    returns: Sequence[float],
    benchmark: Optional[Sequence[float]] = None,
    annualization: float = ANNUALIZATION,
) -> Metrics:
    """CR, SR, MDD, and (with a benchmark) IR of a daily return series"""
    rets = _series(returns)
    return Metrics(
        cr=cumulative_return(rets),
        sr=sharpe_ratio(rets, annualization),
        mdd=max_drawdown(rets),
        ir=None if benchmark is None else information_ratio(rets, benchmark),
        periods=int(rets.size),
    )


def metrics_table(results: Mapping[str, Metrics]) -> pd.DataFrame:
    """One row per strategy, columns ``cr, sr, mdd, ir, periods``"""
    rows = {k: asdict(v) for k, v in results.items()}
    df = pd.DataFrame.from_dict(rows, orient="index")
    df.index.name = "strategy"
    return df
