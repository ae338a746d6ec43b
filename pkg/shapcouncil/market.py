"""Per-period market snapshots and sentiment scores"""

from dataclasses import dataclass, field
from logging import getLogger
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from shapcouncil.io import FeatureTable, PriceTable
from shapcouncil import tseries as ts

logger = getLogger(__name__)

WINDOW = 30

_tweet_t = Tuple[int, float, float, float, float]


@dataclass(frozen=True, eq=False)
class MarketSnapshot:
    """Window statistics at period `t`, computed from rows up to `t` only"""

    t: int
    date: pd.Timestamp
    assets: Tuple[str, ...]
    partial: bool
    ret_1d: np.ndarray
    ret_7d: np.ndarray
    ret_30d: np.ndarray
    logret_1d: np.ndarray
    logret_7d: np.ndarray
    logret_30d: np.ndarray
    vol_30d: np.ndarray
    z_30d: np.ndarray
    r_30d: float
    sigma_30d: float
    r_7d: float
    btc_ew_spread: float
    onchain_z: Optional[np.ndarray] = None
    delta_oc: Optional[float] = None
    macro_z: Dict[str, float] = field(default_factory=dict)

    @property
    def has_onchain(self) -> bool:
        return self.onchain_z is not None and bool(np.isfinite(self.onchain_z).any())

    def signals(self) -> Dict:
        """Compact raw-signal summary for the trace"""
        return {
            "r_30d": self.r_30d,
            "sigma_30d": self.sigma_30d,
            "r_7d": self.r_7d,
            "btc_ew_spread": self.btc_ew_spread,
            "delta_oc": self.delta_oc,
            "partial": self.partial,
            "z_30d": dict(zip(self.assets, self.z_30d.tolist())),
            "macro_z": dict(self.macro_z),
        }


def onchain_scores(
    features: FeatureTable,
    assets: Sequence[str],
    t: int,
    metrics: Iterable[str],
    n: int,
) -> Optional[np.ndarray]:
    """Per-asset on-chain activity z-score, averaged over available metrics

    Each metric is scored against its own trailing window; NaN for assets
    without any metric, `None` when no asset has one.

    """
    metrics = list(metrics)
    scores = np.full(len(assets), np.nan)
    for k, asset in enumerate(assets):
        zs = [
            ts.window_zscore(col, t, n)
            for col in (features.column(f"{asset}.{m}") for m in metrics)
            if col is not None
        ]
        zs = [z for z in zs if np.isfinite(z)]
        if zs:
            scores[k] = np.mean(zs)
    return scores if np.isfinite(scores).any() else None


def onchain_differential(
    scores: Optional[np.ndarray], btc: Optional[int]
) -> Optional[float]:
    """BTC on-chain z-score minus the mean altcoin z-score"""
    if scores is None or btc is None or not np.isfinite(scores[btc]):
        return None
    alts = np.delete(scores, btc)
    alts = alts[np.isfinite(alts)]
    if alts.size == 0:
        return None
    return float(scores[btc] - alts.mean())


def macro_scores(
    features: FeatureTable, t: int, names: Iterable[str]
) -> Dict[str, float]:
    """Expanding-window z-score of each available macro series at `t`"""
    res = {}
    for name in names:
        col = features.column(name)
        if col is None:
            continue
        z = ts.expanding_zscore(col, t)
        if np.isfinite(z):
            res[name] = z
    return res


def snapshot(
    prices: PriceTable,
    features: Optional[FeatureTable],
    t: int,
    *,
    window: int = WINDOW,
    btc: str = "BTC",
    onchain_metrics: Iterable[str] = ("adractcnt", "txcnt"),
    macro: Iterable[str] = (),
) -> MarketSnapshot:
    """Market snapshot at period `t`

    Windows before `t == window` use the available history and the snapshot
    is flagged partial.  `features` must be aligned to the price dates.

    """
    close = prices.close
    if not 0 <= t < len(close):
        raise IndexError(f"{t=}: period out of range [0, {len(close)})")
    assets = prices.assets
    ibtc = assets.index(btc) if btc in assets else None

    ret_30d = ts.simple_returns(close, t, window)
    r_30d = ts.basket_log_return(close, t, window)
    # BTC against the equal-weight basket of all assets, BTC included
    spread = 0.0 if ibtc is None else float(ret_30d[ibtc] - np.expm1(r_30d))

    if features is None:
        features = FeatureTable.empty(prices.dates)
    onchain = onchain_scores(features, assets, t, onchain_metrics, window)

    return MarketSnapshot(
        t=t,
        date=prices.dates[t],
        assets=assets,
        partial=t < window,
        ret_1d=ts.simple_returns(close, t, 1),
        ret_7d=ts.simple_returns(close, t, 7),
        ret_30d=ret_30d,
        logret_1d=ts.log_returns(close, t, 1),
        logret_7d=ts.log_returns(close, t, 7),
        logret_30d=ts.log_returns(close, t, window),
        vol_30d=ts.realized_vol(close, t, window),
        z_30d=ts.cross_zscore(ret_30d),
        r_30d=r_30d,
        sigma_30d=ts.basket_vol(close, t, window),
        r_7d=ts.basket_log_return(close, t, 7),
        btc_ew_spread=spread,
        onchain_z=onchain,
        delta_oc=onchain_differential(onchain, ibtc),
        macro_z=macro_scores(features, t, macro),
    )


def engagement_weight(likes: float, reposts: float, views: float) -> float:
    """Tweet weight log(1 + likes + reposts + views/100) + 1

    >>> engagement_weight(0, 0, 0)
    1.0

    """
    return float(np.log1p(likes + reposts + views / 100) + 1)


def sentiment_score(tweets: Sequence[_tweet_t]) -> float:
    """Engagement-weighted sentiment in [-1, 1]

    Parameters
    ----------
    tweets : Sequence[Tuple[int, float, float, float, float]]
        (label in {-1, 0, 1}, confidence in (0, 1], likes, reposts, views)

    >>> sentiment_score([(1, 1.0, 0, 0, 0)])
    1.0

    """
    if len(tweets) == 0:
        raise ValueError("tweets: no sentiment observations")
    num = den = 0.0
    for label, conf, likes, reposts, views in tweets:
        if label not in (-1, 0, 1):
            raise ValueError(f"{label=}: must be -1, 0, or +1")
        if not 0 < conf <= 1:
            raise ValueError(f"{conf=}: confidence outside (0, 1]")
        weight = engagement_weight(likes, reposts, views)
        num += label * conf * weight
        den += weight
    return num / den


def polymarket_score(prob: float) -> float:
    """Map a mean implied probability onto [-1, 1]

    >>> polymarket_score(0.5), polymarket_score(1.0)
    (0.0, 1.0)

    """
    if not 0 <= prob <= 1:
        raise ValueError(f"{prob=}: probability outside [0, 1]")
    return (prob - 0.5) * 2


def expand_mentions(tweets: pd.DataFrame) -> pd.DataFrame:
    """One row per (tweet, asset) from the ``|``-separated `assets` column"""
    df = tweets.assign(asset=tweets["assets"].astype(str).str.split("|"))
    df = df.explode("asset").drop(columns="assets")
    df["asset"] = df["asset"].str.strip().str.upper()
    return df[df["asset"] != ""].reset_index(drop=True)


_TWEET_COLS = ["label", "confidence", "likes", "reposts", "views"]


def _daily_scores(df: pd.DataFrame, keys) -> pd.Series:
    df = df.assign(date=pd.to_datetime(df["date"]).dt.normalize())
    return df.groupby(keys)[_TWEET_COLS].apply(
        lambda grp: sentiment_score(list(grp.itertuples(index=False, name=None)))
    )


def sentiment_features(tweets: pd.DataFrame) -> pd.DataFrame:
    """Daily sentiment columns from a tweet table

    ``<ASSET>.sentiment`` scores the tweets mentioning each asset; the
    market-wide ``sentiment`` column scores every tweet once and is the
    series the macro agent reads.

    """
    wide = _daily_scores(expand_mentions(tweets), ["date", "asset"]).unstack("asset")
    wide.columns = [f"{asset}.sentiment" for asset in wide.columns]
    wide.insert(0, "sentiment", _daily_scores(tweets, "date"))
    wide.index.name = "date"
    return wide
