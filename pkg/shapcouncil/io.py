"""Read daily price, feature, and tweet tables from delimited text files"""

from dataclasses import dataclass, field
from logging import getLogger
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import pandas as pd

from shapcouncil.tseries import max_gap, to_calendar

logger = getLogger(__name__)

_path_t = Union[str, Path]
_date_t = Union[str, pd.Timestamp, None]

FILL_LIMIT = 5  # calendar days


@dataclass(frozen=True, eq=False)
class PriceTable:
    """Validated close prices, one row per calendar day"""

    frame: pd.DataFrame
    close: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        frame = self.frame
        if frame.shape[1] < 2:
            raise ValueError(f"{list(frame.columns)}: need at least 2 assets")
        if frame.empty:
            raise ValueError("price table: empty date range")
        if not frame.index.is_monotonic_increasing or not frame.index.is_unique:
            raise ValueError("price table: dates not strictly increasing")
        if frame.isna().any().any():
            raise ValueError("price table: missing cells after forward-fill")
        if (frame <= 0).any().any():
            raise ValueError("price table: prices must be positive")
        close = frame.to_numpy(dtype=float, copy=True)
        close.flags.writeable = False
        object.__setattr__(self, "close", close)

    def __len__(self):
        return len(self.frame)

    @property
    def dates(self) -> pd.DatetimeIndex:
        return self.frame.index

    @property
    def assets(self) -> Tuple[str, ...]:
        return tuple(self.frame.columns)

    def subset(self, start: _date_t = None, end: _date_t = None) -> "PriceTable":
        return type(self)(self.frame.loc[start:end])

    def select(self, assets) -> "PriceTable":
        missing = [a for a in assets if a not in self.frame.columns]
        if missing:
            raise KeyError(f"{missing}: assets not in price table")
        return type(self)(self.frame.loc[:, list(assets)])


@dataclass(frozen=True, eq=False)
class FeatureTable:
    """Named feature series aligned to a price calendar; may hold missing values"""

    frame: pd.DataFrame
    availability: pd.Series = field(default=None)

    def __post_init__(self):
        if self.availability is None:
            first = {col: self.frame[col].first_valid_index() for col in self.frame}
            series = pd.Series(first, index=self.frame.columns, dtype="datetime64[ns]")
            object.__setattr__(self, "availability", series)

    @classmethod
    def empty(cls, dates: Optional[pd.DatetimeIndex] = None) -> "FeatureTable":
        return cls(pd.DataFrame(index=dates))

    @property
    def columns(self) -> Tuple[str, ...]:
        return tuple(self.frame.columns)

    def align(self, dates: pd.DatetimeIndex) -> "FeatureTable":
        """Rows for `dates`; the first-valid dates are kept from the full table"""
        return type(self)(self.frame.reindex(dates), self.availability)

    def join(self, extra: pd.DataFrame, limit: int = FILL_LIMIT) -> "FeatureTable":
        """Add daily series on the same calendar; same-named columns are replaced

        `extra` is forward-filled up to `limit` days before alignment.

        """
        extra = to_calendar(extra).ffill(limit=limit)
        replaced = [col for col in extra.columns if col in self.frame.columns]
        if replaced:
            logger.info(f"{replaced}: replaced by joined series")
        frame = self.frame.drop(columns=replaced).join(extra.reindex(self.frame.index))
        first = type(self)(extra).availability
        availability = pd.concat([self.availability.drop(replaced), first])
        return type(self)(frame, availability)

    def column(self, name: str) -> Optional[np.ndarray]:
        if name not in self.frame.columns:
            return None
        return self.frame[name].to_numpy(dtype=float)


def read_table(fpath: _path_t, what: str = "table") -> pd.DataFrame:
    """Read a delimited table with a leading date column

    The delimiter is sniffed; cells must be numeric or empty.

    """
    fpath = Path(fpath)
    if not fpath.is_file():
        raise FileNotFoundError(f"{fpath}: {what} not found")
    df = pd.read_csv(fpath, header=0, index_col=0, sep=None, engine="python")
    try:
        df.index = pd.DatetimeIndex(pd.to_datetime(df.index), name="date")
    except (ValueError, TypeError) as err:
        raise ValueError(f"{fpath}: unparseable date ({err})") from None
    try:
        df = df.apply(pd.to_numeric)
    except (ValueError, TypeError) as err:
        raise ValueError(f"{fpath}: unparseable cell ({err})") from None
    if not df.index.is_unique:
        raise ValueError(f"{fpath}: duplicate dates")
    if not df.index.is_monotonic_increasing:
        raise ValueError(f"{fpath}: dates not strictly increasing")
    return df.astype(float)


def load_prices(
    fpath: _path_t, start: _date_t = None, end: _date_t = None, limit: int = FILL_LIMIT
) -> PriceTable:
    """Load close prices, forward-filling calendar gaps of up to `limit` days

    Parameters
    ----------
    fpath : Union[str, Path]
        Delimited text file, ``date,ASSET1,ASSET2,...``

    start, end : str, optional
        Inclusive date range; filling uses rows before `start`

    limit : int (default: 5)
        Longest gap (in missing calendar days) that is forward-filled

    Returns
    -------
    PriceTable

    """
    df = read_table(fpath, "price table")
    if df.empty:
        raise ValueError(f"{fpath}: price table is empty")
    df = to_calendar(df)
    leading = df.iloc[0].isna()
    if leading.any():
        raise ValueError(f"{list(df.columns[leading])}: no price on the first date")
    gaps = max_gap(df)
    if (gaps > limit).any():
        worst = gaps.idxmax()
        raise ValueError(
            f"{worst}: gap exceeds fill limit ({gaps[worst]} > {limit} days)"
        )
    filled = int(df.isna().sum().sum())
    if filled:
        logger.info(f"{fpath}: forward-filled {filled} missing price cells")
    df = df.ffill(limit=limit).loc[start:end]
    if df.empty:
        raise ValueError(f"{start}..{end}: empty date range")
    return PriceTable(df)


def load_features(
    fpath: Optional[_path_t], dates: pd.DatetimeIndex, limit: int = FILL_LIMIT
) -> FeatureTable:
    """Load feature series and align them to the price calendar

    Gaps longer than `limit` days stay missing; columns that start after the
    first date are logged.

    """
    if fpath is None:
        return FeatureTable.empty(dates)
    df = read_table(fpath, "feature table")
    if df.empty:
        logger.warning(f"{fpath}: feature table is empty")
        return FeatureTable.empty(dates)
    full = to_calendar(df).ffill(limit=limit)
    features = FeatureTable(full).align(dates)
    late = features.availability[features.availability > dates[0]]
    for col, first in late.items():
        logger.warning(f"{col}: unavailable before {first:%Y-%m-%d}")
    return features


def read_tweets(fpath: _path_t) -> pd.DataFrame:
    """Tweets with ``date, assets, label, confidence, likes, reposts, views``

    `assets` may list several tickers separated by ``|``.

    """
    fpath = Path(fpath)
    if not fpath.is_file():
        raise FileNotFoundError(f"{fpath}: tweet table not found")
    df = pd.read_csv(fpath, header=0, parse_dates=["date"])
    expected = {"date", "assets", "label", "confidence", "likes", "reposts", "views"}
    if not expected.issubset(df.columns):
        missing = sorted(expected - set(df.columns))
        raise ValueError(f"{fpath}: missing columns {missing}")
    return df
