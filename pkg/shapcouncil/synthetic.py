"""Synthetic three-regime market: bull, volatile, then bear thirds

Prices follow a common factor plus idiosyncratic noise in the trending
segments.  The volatile segment oscillates with a 30-day period around a
slight upward drift, so the 30-day regime score stays well inside the
volatile band.  Feature columns follow the same segments: on-chain activity
(``<ASSET>.adractcnt``, ``<ASSET>.txcnt``; in the bear third BTC activity
keeps rising while altcoin activity falls) and macro series (``sentiment``,
``fear_greed``, ``vix``).

"""

from dataclasses import dataclass
from logging import getLogger
from pathlib import Path
from typing import Dict, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from shapcouncil.config import DEFAULT_ASSETS

logger = getLogger(__name__)

_path_t = Union[str, Path]

SEGMENTS = ("bull", "volatile", "bear")


@dataclass(frozen=True)
class SyntheticSpec:
    periods: int = 540
    start: str = "2023-03-01"
    # |daily drift| range in the trending thirds
    drift: Tuple[float, float] = (0.008, 0.012)
    common_vol: float = 0.01
    idio_vol: float = 0.01
    wave_amplitude: float = 0.06
    wave_period: int = 30
    wave_drift: float = 0.0000592
    wave_noise: float = 0.0005
    activity_trend: float = 0.004
    activity_noise: float = 0.01
    # (bull, volatile, bear) levels and noise
    sentiment: Tuple[float, float, float] = (0.6, 0.0, -0.6)
    sentiment_noise: float = 0.1
    fear_greed: Tuple[float, float, float] = (75.0, 50.0, 20.0)
    fear_greed_noise: float = 5.0
    vix: Tuple[float, float, float] = (15.0, 22.0, 35.0)
    vix_noise: float = 2.0

    def __post_init__(self):
        if self.periods < 3 * self.wave_period:
            raise ValueError(
                f"{self.periods=}: need at least {3 * self.wave_period} periods"
            )


def segment_bounds(periods: int) -> Dict[str, slice]:
    """Row ranges of the three segments

    >>> segment_bounds(9)["volatile"]
    slice(3, 6, None)

    """
    t1, t2 = periods // 3, 2 * periods // 3
    return dict(zip(SEGMENTS, (slice(0, t1), slice(t1, t2), slice(t2, periods))))


def _log_prices(spec: SyntheticSpec, k: int, rng: np.random.Generator) -> np.ndarray:
    bounds = segment_bounds(spec.periods)
    bull, wave, bear = (bounds[s] for s in SEGMENTS)
    levels = np.empty((spec.periods, k))
    levels[0] = np.log(rng.uniform(1.0, 1000.0, k))

    def _trend(seg: slice, sign: int):
        days = seg.stop - max(seg.start, 1)
        drift = sign * rng.uniform(*spec.drift, k)
        common = rng.normal(0, spec.common_vol, (days, 1))
        shocks = common + rng.normal(0, spec.idio_vol, (days, k))
        start = max(seg.start, 1)
        levels[start : seg.stop] = levels[start - 1] + np.cumsum(drift + shocks, axis=0)

    _trend(bull, 1)
    steps = np.arange(wave.stop - wave.start)[:, None]
    base = levels[wave.start - 1]
    levels[wave] = (
        base
        + spec.wave_amplitude * np.sin(2 * np.pi * steps / spec.wave_period)
        + spec.wave_drift * steps
        + rng.normal(0, spec.wave_noise, (steps.size, k))
    )
    _trend(bear, -1)
    return levels


def _activity(
    spec: SyntheticSpec, assets: Sequence[str], btc: str, rng: np.random.Generator
) -> Dict[str, np.ndarray]:
    bounds = segment_bounds(spec.periods)
    res = {}
    for asset in assets:
        trend = np.zeros(spec.periods)
        trend[bounds["bull"]] = spec.activity_trend
        sign = 1 if asset == btc else -1
        trend[bounds["bear"]] = sign * spec.activity_trend
        for metric in ("adractcnt", "txcnt"):
            scale = rng.uniform(1e4, 1e6)
            noise = rng.normal(0, spec.activity_noise, spec.periods)
            res[f"{asset}.{metric}"] = scale * np.exp(np.cumsum(trend + noise))
    return res


def _macro(spec: SyntheticSpec, rng: np.random.Generator) -> Dict[str, np.ndarray]:
    bounds = segment_bounds(spec.periods)
    res = {}
    for name, noise in (
        ("sentiment", spec.sentiment_noise),
        ("fear_greed", spec.fear_greed_noise),
        ("vix", spec.vix_noise),
    ):
        series = np.empty(spec.periods)
        for seg, level in zip(SEGMENTS, getattr(spec, name)):
            rows = bounds[seg]
            series[rows] = level + rng.normal(0, noise, rows.stop - rows.start)
        res[name] = series
    res["sentiment"] = np.clip(res["sentiment"], -1, 1)
    res["fear_greed"] = np.clip(res["fear_greed"], 0, 100)
    res["vix"] = np.maximum(res["vix"], 1.0)
    return res


def synthetic_market(
    assets: Sequence[str] = tuple(DEFAULT_ASSETS),
    periods: int = 540,
    seed: int = 7,
    btc: str = "BTC",
    spec: SyntheticSpec = None,
) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """Daily close prices and features, deterministic for a given `seed`

    Returns
    -------
    Tuple[pd.DataFrame, pd.DataFrame]
        Prices (one column per asset) and features, both indexed by date

    """
    if len(assets) < 2:
        raise ValueError(f"{list(assets)}: need at least 2 assets")
    spec = SyntheticSpec(periods=periods) if spec is None else spec
    rng = np.random.default_rng(seed)
    dates = pd.date_range(spec.start, periods=spec.periods, freq="D", name="date")
    levels = _log_prices(spec, len(assets), rng)
    prices = pd.DataFrame(np.exp(levels), index=dates, columns=list(assets))
    features = pd.DataFrame(
        {**_activity(spec, assets, btc, rng), **_macro(spec, rng)}, index=dates
    )
    logger.info(f"synthetic market: {len(assets)} assets, {spec.periods} days, {seed=}")
    return prices, features


def write_synthetic(outdir: _path_t, **kwargs) -> Tuple[Path, Path]:
    """Write ``prices.csv`` and ``features.csv`` under `outdir`"""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    prices, features = synthetic_market(**kwargs)
    paths = outdir / "prices.csv", outdir / "features.csv"
    prices.to_csv(paths[0], float_format="%.10g")
    features.to_csv(paths[1], float_format="%.10g")
    return paths
