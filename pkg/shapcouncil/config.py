"""Run configuration: compiled defaults, layering, and validation

The configuration is a flat mapping; keys may contain dots (``roles.btc``)
but are never nested.  Values come from three layers, later layers win:
compiled defaults, an optional YAML file, and command line flags.

"""

from datetime import date
from logging import getLogger
from pathlib import Path
from typing import Dict, List, Optional, Union

from friendly_data.io import dwim_file
from glom import And, M, Match, MatchError, Or, glom

logger = getLogger(__name__)

_path_t = Union[str, Path]

DEFAULT_ASSETS = [
    "BTC",
    "ETH",
    "BNB",
    "XRP",
    "ADA",
    "DOGE",
    "TRX",
    "LINK",
    "XLM",
    "BCH",
    "ZEC",
    "PAXG",
    "LTC",  # thirteenth asset, not named by the reference universe
]

DEFAULTS: Dict = {
    # data & run
    "prices": None,
    "features": None,
    "tweets": None,
    "from": None,
    "to": None,
    "out": None,
    "assets": [],  # empty: every price column
    "bps": 0.0,
    "seed": 0,
    "window": 30,
    "burnin_alpha": 0.0,
    # characteristic function
    "h": 252.0,
    "gamma_rho": 0.4,
    "gamma_mu": 0.6,
    "annualization": 365,
    "sr_cap": 10.0,
    # adaptive mixture
    "lambda": 30.0,
    "n_win": 30,
    "theta_wta": 1.8,
    "omega_wta": 0.80,
    # regime
    "xi_plus": 0.30,
    "xi_minus": -0.30,
    "attenuation_factor": 0.5,
    "attenuation_ratio": 0.30,
    "xi_saturation": 0.999,
    "multiplier_anchors": [[1.50, 1.20, 0.60], [0.90, 1.00, 0.90], [0.60, 0.80, 1.50]],
    "consensus_gain": 0.5,
    # council blend
    "beta_s1_center": 0.90,
    "beta_s1_scale": 0.09,
    "beta_s1_tau": 0.075,
    "beta_gc_center": 0.15,
    "beta_gc_scale": 0.20,
    "beta_gc_tau": 0.10,
    "ema_build": 0.70,
    "ema_derisk": 0.78,
    "w_max": 0.40,
    "c_max": 0.30,
    # overlays
    "momentum_base": 0.08,
    "momentum_slope": 0.35,
    "momentum_zcap": 1.5,
    "dominance_tau": 0.15,
    "dominance_volatile": 0.45,
    "dominance_bear": 0.30,
    "dominance_alt": 0.20,
    "dominance_recipient_cap": 0.30,
    "btc_floor": 0.18,
    "bear_tilt_max": 0.08,
    "bear_tilt_bandwidth": 1.5,
    "bear_tilt_activation": 0.005,
    "bear_tilt_btc_cap": 0.30,
    "cash_floor": 0.08,
    "cash_span": 0.17,
    "cash_bandwidth": 0.12,
    "bull_cash_cap": 0.08,
    "transition_depth": 0.35,
    "transition_tau": 0.25,
    "dd_tau": 0.15,
    "dd_nu": 0.40,
    "dd_cash_base": 0.08,
    "dd_cash_span": 0.22,
    "drawdown_window": 0,
    "onchain_metrics": ["adractcnt", "txcnt"],
    # asset roles
    "roles.btc": "BTC",
    "roles.dominance_donors": ["ETH", "ADA", "LINK", "DOGE", "XLM", "XRP", "BCH"],
    "roles.dominance_recipients": ["BTC", "TRX", "ZEC"],
    "roles.recipient_shares": [0.60, 0.25, 0.15],
    "roles.alt_payers": ["BTC", "TRX"],
    "roles.alt_recipients": ["ADA", "XLM", "DOGE", "XRP", "BCH", "ETH"],
    "roles.benchmarks": ["BTC", "ETH"],
    # agents
    "agents.policy_set": "reference",
    "agents.temperature": 1.0,
    "agents.a1_cash_base": 0.08,
    "agents.a1_cash_span": 0.17,
    "agents.a2_cash": 0.15,
    "agents.debate_caution": 0.25,
    "agents.readout_split": 0.5,
    "agents.macro_signals": {"sentiment": 1, "fear_greed": 1, "vix": -1},
}

_num = Or(float, int)
_unit = And(_num, M >= 0, M <= 1)
_pos = And(_num, M > 0)
_nonneg = And(_num, M >= 0)
_count = And(int, M >= 1)
_names = [str]
_date = Or(None, str, date)
_file = Or(None, str)

SCHEMA: Dict = {
    "prices": _file,
    "features": _file,
    "tweets": _file,
    "from": _date,
    "to": _date,
    "out": _file,
    "assets": _names,
    "bps": _nonneg,
    "seed": int,
    "window": And(int, M >= 2),
    "burnin_alpha": And(_num, M >= 0, M < 1),
    "h": _pos,
    "gamma_rho": _unit,
    "gamma_mu": _unit,
    "annualization": _pos,
    "sr_cap": _pos,
    "lambda": _pos,
    "n_win": _count,
    "theta_wta": And(_num, M > 1),
    "omega_wta": And(_num, M > 0, M < 1),
    "xi_plus": And(_num, M > 0, M < 1),
    "xi_minus": And(_num, M < 0, M > -1),
    "attenuation_factor": _unit,
    "attenuation_ratio": _nonneg,
    "xi_saturation": And(_num, M > 0, M < 1),
    "multiplier_anchors": [[_pos]],
    "consensus_gain": _nonneg,
    "beta_s1_center": _unit,
    "beta_s1_scale": _unit,
    "beta_s1_tau": _pos,
    "beta_gc_center": _unit,
    "beta_gc_scale": _unit,
    "beta_gc_tau": _pos,
    "ema_build": And(_num, M > 0, M <= 1),
    "ema_derisk": And(_num, M > 0, M <= 1),
    "w_max": And(_num, M > 0, M <= 1),
    "c_max": _unit,
    "momentum_base": _unit,
    "momentum_slope": _unit,
    "momentum_zcap": _pos,
    "dominance_tau": _pos,
    "dominance_volatile": _unit,
    "dominance_bear": _unit,
    "dominance_alt": _unit,
    "dominance_recipient_cap": _unit,
    "btc_floor": _unit,
    "bear_tilt_max": _unit,
    "bear_tilt_bandwidth": _pos,
    "bear_tilt_activation": _unit,
    "bear_tilt_btc_cap": _unit,
    "cash_floor": _unit,
    "cash_span": _unit,
    "cash_bandwidth": _pos,
    "bull_cash_cap": _unit,
    "transition_depth": _unit,
    "transition_tau": _pos,
    "dd_tau": _pos,
    "dd_nu": _unit,
    "dd_cash_base": _unit,
    "dd_cash_span": _unit,
    "drawdown_window": And(int, M >= 0),
    "onchain_metrics": _names,
    "roles.btc": str,
    "roles.dominance_donors": _names,
    "roles.dominance_recipients": _names,
    "roles.recipient_shares": [_unit],
    "roles.alt_payers": _names,
    "roles.alt_recipients": _names,
    "roles.benchmarks": _names,
    "agents.policy_set": str,
    "agents.temperature": _pos,
    "agents.a1_cash_base": _unit,
    "agents.a1_cash_span": _unit,
    "agents.a2_cash": _unit,
    "agents.debate_caution": _unit,
    "agents.readout_split": _unit,
    "agents.macro_signals": {str: Or(1, -1)},
}


def layer_configs(confs: List[Dict]) -> Dict:
    """Overlay flat configurations, later layers win

    A key set in a later layer replaces the earlier value wholesale, even when
    the value is a mapping, so a layer can drop entries of a default mapping.

    Examples
    --------

    >>> layer_configs([{"h": 252.0, "bps": 0}, {"bps": 5}])
    {'h': 252.0, 'bps': 5}
    >>> defaults = {"agents.macro_signals": {"sentiment": 1, "vix": -1}}
    >>> layer_configs([defaults, {"agents.macro_signals": {"vix": -1}}])
    {'agents.macro_signals': {'vix': -1}}

    """
    res: Dict = {}
    for conf in confs:
        res.update(conf)
    return res


def validate(conf: Dict) -> Dict:
    """Validate a flat configuration, raise on the first offending key

    Unknown keys raise `KeyError`, out of range values `ValueError`.

    >>> validate({"bps": 5})
    {'bps': 5}
    >>> validate({"lamda": 30})
    Traceback (most recent call last):
        ...
    KeyError: 'lamda: unknown configuration key'

    """
    unknown = [key for key in conf if key not in SCHEMA]
    if unknown:
        raise KeyError(f"{unknown[0]}: unknown configuration key")
    for key, value in conf.items():
        try:
            glom(value, Match(SCHEMA[key]))
        except MatchError:
            raise ValueError(f"{key}: invalid value {value!r}") from None
    _cross_check(conf)
    return conf


def _cross_check(conf: Dict):
    """Constraints spanning several keys, checked when all of them are set"""

    def _has(*keys):
        return all(k in conf for k in keys)

    if _has("gamma_rho", "gamma_mu"):
        if abs(conf["gamma_rho"] + conf["gamma_mu"] - 1) > 1e-9:
            raise ValueError("gamma_rho + gamma_mu: weights must sum to 1")
    if _has("beta_s1_center", "beta_s1_scale"):
        if conf["beta_s1_center"] + conf["beta_s1_scale"] > 1:
            raise ValueError("beta_s1_center + beta_s1_scale: exceeds 1")
    if _has("roles.dominance_recipients", "roles.recipient_shares"):
        recipients = conf["roles.dominance_recipients"]
        shares = conf["roles.recipient_shares"]
        if len(recipients) != len(shares):
            raise ValueError("roles.recipient_shares: one share per recipient expected")
    if "multiplier_anchors" in conf:
        if any(len(row) != 3 for row in conf["multiplier_anchors"]):
            raise ValueError(
                "multiplier_anchors: expected (bull, neutral, bear) triples"
            )


class RunConfig(dict):
    """Effective run configuration (defaults, file, then flags)

    NOTE: item assignment is not validated; use `override`

    """

    @classmethod
    def from_layers(cls, *layers: Optional[Dict]) -> "RunConfig":
        confs = [validate(dict(layer)) for layer in layers if layer]
        return cls(layer_configs([DEFAULTS, *confs]))

    @classmethod
    def from_file(cls, fpath: Optional[_path_t], **flags) -> "RunConfig":
        """Read a YAML config file; flags set to `None` are ignored"""
        file_conf = {}
        if fpath is not None:
            fpath = Path(fpath)
            if not fpath.is_file():
                raise FileNotFoundError(f"{fpath}: config file not found")
            file_conf = dwim_file(fpath) or {}
            if not isinstance(file_conf, dict):
                raise ValueError(f"{fpath}: config must be a mapping")
            logger.info(f"{fpath}: read {len(file_conf)} config keys")
        overrides = {k: v for k, v in flags.items() if v is not None}
        return cls.from_layers(file_conf, overrides)

    def override(self, **flags) -> "RunConfig":
        return type(self).from_layers(dict(self), flags)

    def dump(self, fpath: _path_t) -> Path:
        fpath = Path(fpath)
        conf = {k: (str(v) if isinstance(v, date) else v) for k, v in self.items()}
        dwim_file(fpath, conf)
        return fpath

    def subset(self, prefix: str) -> Dict:
        """Keys under a dotted prefix, with the prefix stripped

        >>> RunConfig.from_layers().subset("roles")["btc"]
        'BTC'

        """
        start = len(prefix) + 1
        return {k[start:]: v for k, v in self.items() if k.startswith(f"{prefix}.")}
