"""Risk overlay cascade

Seven continuous portfolio transforms applied in a fixed order, followed
by a projection back onto the constraint set:

1. momentum tilt
2. BTC dominance / alt season rotation
3. BTC floor (volatile)
4. on-chain BTC tilt (bear)
5. cash target (volatile, bull)
6. transition buffer
7. drawdown protection

Intermediate steps may leave ``sum(w) + c != 1``; the momentum tilt is the
only step that changes the total mass.

Every scalar map below is Lipschitz in its signal.  The steepest is the
dominance signal, with slope ``1 / dominance_tau``; the others stay under
``1 / dd_tau``.  The bear tilt switches on at ``bear_tilt_activation``, a jump
of that size.

"""

from dataclasses import asdict, dataclass, field
from logging import getLogger
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from shapcouncil.council import PortfolioVector, project_constraints
from shapcouncil.regime import Regime, RegimeState

logger = getLogger(__name__)

_wc_t = Tuple[np.ndarray, float]


@dataclass(frozen=True)
class OverlayConfig:
    momentum_base: float = 0.08
    momentum_slope: float = 0.35
    momentum_zcap: float = 1.5
    dominance_tau: float = 0.15
    dominance_volatile: float = 0.45
    dominance_bear: float = 0.30
    dominance_alt: float = 0.20
    dominance_recipient_cap: float = 0.30
    btc_floor: float = 0.18
    bear_tilt_max: float = 0.08
    bear_tilt_bandwidth: float = 1.5
    bear_tilt_activation: float = 0.005
    bear_tilt_btc_cap: float = 0.30
    cash_floor: float = 0.08
    cash_span: float = 0.17
    cash_bandwidth: float = 0.12
    bull_cash_cap: float = 0.08
    transition_depth: float = 0.35
    transition_tau: float = 0.25
    dd_tau: float = 0.15
    dd_nu: float = 0.40
    dd_cash_base: float = 0.08
    dd_cash_span: float = 0.22

    def __post_init__(self):
        for name, value in asdict(self).items():
            if name.endswith(("tau", "bandwidth", "zcap")):
                if not value > 0:
                    raise ValueError(f"{name}={value}: bandwidth must be positive")
            elif not 0 <= value <= 1:
                raise ValueError(f"{name}={value}: coefficient outside [0, 1]")

    @classmethod
    def from_config(cls, conf: Mapping) -> "OverlayConfig":
        return cls(**{k: float(conf[k]) for k in cls.__dataclass_fields__})


@dataclass(frozen=True)
class AssetRoles:
    """Asset indices playing a role in the dominance and BTC overlays"""

    btc: Optional[int]
    alts: np.ndarray
    donors: np.ndarray
    recipients: np.ndarray
    shares: np.ndarray
    alt_payers: np.ndarray
    alt_recipients: np.ndarray

    @classmethod
    def resolve(cls, assets: Sequence[str], roles: Mapping) -> "AssetRoles":
        """Map role names from config onto asset positions

        Missing role assets are dropped with a warning; recipient shares are
        renormalised over the recipients present.

        """
        assets = list(assets)

        def _idx(key: str) -> np.ndarray:
            names = roles[key]
            missing = [name for name in names if name not in assets]
            if missing:
                logger.warning(f"roles.{key}: {missing} not in the asset universe")
            return np.array([assets.index(n) for n in names if n in assets], dtype=int)

        btc = assets.index(roles["btc"]) if roles["btc"] in assets else None
        if btc is None:
            logger.warning(f"roles.btc: {roles['btc']} not in the asset universe")
        present = [n in assets for n in roles["dominance_recipients"]]
        shares = np.array(roles["recipient_shares"], dtype=float)[present]
        if shares.sum() > 0:
            shares = shares / shares.sum()
        return cls(
            btc=btc,
            alts=np.array([k for k in range(len(assets)) if k != btc], dtype=int),
            donors=_idx("dominance_donors"),
            recipients=_idx("dominance_recipients"),
            shares=shares,
            alt_payers=_idx("alt_payers"),
            alt_recipients=_idx("alt_recipients"),
        )


def _take(w: np.ndarray, idx: np.ndarray, amount: float) -> Tuple[np.ndarray, float]:
    """Remove up to `amount` from `w[idx]` pro-rata to current weights"""
    pool = w[idx].sum() if idx.size else 0.0
    taken = min(amount, pool)
    if taken > 0:
        w[idx] *= 1 - taken / pool
    return w, float(taken)


def _give(w: np.ndarray, idx: np.ndarray, amount: float) -> np.ndarray:
    """Add `amount` to `w[idx]` pro-rata; equally when they hold nothing"""
    pool = w[idx].sum()
    share = w[idx] / pool if pool > 0 else np.full(idx.size, 1.0 / idx.size)
    w[idx] += amount * share
    return w


def _set_cash(w: np.ndarray, c: float, target: float) -> _wc_t:
    """Trim or redeploy longs pro-rata so that cash equals `target`"""
    longs = w.sum()
    if longs <= 0:
        return w, c
    delta = min(target - c, longs)  # > 0 trims, < 0 redeploys
    return w * (1 - delta / longs), c + delta


def tilt_strength(xi: float, cfg: OverlayConfig = OverlayConfig()) -> float:
    """
    >>> tilt_strength(-0.5), round(tilt_strength(1.0), 2)
    (0.08, 0.43)
    """
    return cfg.momentum_base + cfg.momentum_slope * max(0.0, xi)


def momentum_overlay(
    w: np.ndarray, z: np.ndarray, xi: float, cfg: OverlayConfig = OverlayConfig()
) -> np.ndarray:
    """Multiplicative tilt towards cross-sectional 30-day winners"""
    return w * (1 + tilt_strength(xi, cfg) * np.tanh(np.asarray(z) / cfg.momentum_zcap))


def dominance_signal(spread: float, cfg: OverlayConfig = OverlayConfig()) -> float:
    return float(np.tanh(spread / cfg.dominance_tau))


def dominance_overlay(
    w: np.ndarray,
    c: float,
    spread: float,
    regime: Regime,
    roles: AssetRoles,
    cfg: OverlayConfig = OverlayConfig(),
) -> _wc_t:
    """Rotate between BTC-led recipients and altcoins by BTC outperformance

    BTC season (positive signal, volatile or bear) moves mass from the donors
    to the recipients by share, each capped; residual spills to the next
    recipient and finally to cash.  Alt season (negative signal, bull) moves
    mass from the alt payers to the alt recipients.

    """
    w = w.copy()
    d = dominance_signal(spread, cfg)
    if d > 0 and regime in (Regime.VOLATILE, Regime.BEAR):
        if roles.donors.size == 0 or roles.recipients.size == 0:
            logger.debug("dominance: BTC season leg skipped, missing roles")
            return w, c
        if regime is Regime.VOLATILE:
            coef = cfg.dominance_volatile
        else:
            coef = cfg.dominance_bear
        w, taken = _take(w, roles.donors, d * coef)
        carry = 0.0
        ranked = sorted(zip(roles.recipients, roles.shares), key=lambda ks: -ks[1])
        for k, share in ranked:
            amount = taken * share + carry
            room = max(0.0, cfg.dominance_recipient_cap - w[k])
            w[k] += min(amount, room)
            carry = amount - min(amount, room)
        return w, c + carry
    if d < 0 and regime is Regime.BULL:
        if roles.alt_payers.size == 0 or roles.alt_recipients.size == 0:
            logger.debug("dominance: alt season leg skipped, missing roles")
            return w, c
        w, taken = _take(w, roles.alt_payers, abs(d) * cfg.dominance_alt)
        return _give(w, roles.alt_recipients, taken), c
    return w, c


def btc_floor(
    w: np.ndarray,
    c: float,
    regime: Regime,
    roles: AssetRoles,
    cfg: OverlayConfig = OverlayConfig(),
) -> _wc_t:
    """Lift BTC to the floor in volatile regimes, from altcoins then cash"""
    if regime is not Regime.VOLATILE or roles.btc is None:
        return w, c
    w = w.copy()
    shortfall = max(0.0, cfg.btc_floor - w[roles.btc])
    if shortfall <= 0:
        return w, c
    w, taken = _take(w, roles.alts, shortfall)
    from_cash = min(shortfall - taken, c)
    w[roles.btc] += taken + from_cash
    return w, c - from_cash


def onchain_tilt_size(delta_oc: float, cfg: OverlayConfig = OverlayConfig()) -> float:
    """
    >>> round(onchain_tilt_size(1.5), 5)
    0.06093
    """
    return cfg.bear_tilt_max * float(np.tanh(delta_oc / cfg.bear_tilt_bandwidth))


def bear_onchain_tilt(
    w: np.ndarray,
    delta_oc: Optional[float],
    regime: Regime,
    roles: AssetRoles,
    cfg: OverlayConfig = OverlayConfig(),
) -> np.ndarray:
    """Shift weight from altcoins to BTC when BTC on-chain activity leads"""
    if regime is not Regime.BEAR or roles.btc is None:
        return w
    if delta_oc is None or not np.isfinite(delta_oc):
        logger.debug("bear tilt: skipped, on-chain data unavailable")
        return w
    size = onchain_tilt_size(delta_oc, cfg)
    if size <= cfg.bear_tilt_activation:
        return w
    w = w.copy()
    add = min(size, max(0.0, cfg.bear_tilt_btc_cap - w[roles.btc]))
    w, taken = _take(w, roles.alts, add)
    w[roles.btc] += taken
    return w


def cash_target(xi: float, cfg: OverlayConfig = OverlayConfig()) -> float:
    """Volatile-regime cash target, 0.25 at ξ = 0 falling towards 0.08

    >>> round(cash_target(0.0), 4), round(cash_target(0.30), 4)
    (0.25, 0.094)

    """
    return cfg.cash_floor + cfg.cash_span * float(np.exp(-abs(xi) / cfg.cash_bandwidth))


def volatile_cash_target(
    w: np.ndarray,
    c: float,
    xi: float,
    regime: Regime,
    cfg: OverlayConfig = OverlayConfig(),
) -> _wc_t:
    """Move cash to the volatile target, or down to the bull cap"""
    if regime is Regime.VOLATILE:
        return _set_cash(w.copy(), c, cash_target(xi, cfg))
    if regime is Regime.BULL and c > cfg.bull_cash_cap:
        return _set_cash(w.copy(), c, cfg.bull_cash_cap)
    return w, c


def transition_scale(drop: float, cfg: OverlayConfig = OverlayConfig()) -> float:
    """
    >>> round(transition_scale(0.05), 4), round(transition_scale(0.60), 4)
    (0.9309, 0.6557)
    """
    squash = np.tanh(max(0.0, drop) / cfg.transition_tau)
    return 1 - cfg.transition_depth * float(squash)


def transition_buffer(
    w: np.ndarray,
    c: float,
    xi_prev: Optional[float],
    xi_now: float,
    cfg: OverlayConfig = OverlayConfig(),
) -> _wc_t:
    """Scale longs down after a drop in the regime score; freed mass to cash"""
    if xi_prev is None:
        return w, c
    scale = transition_scale(xi_prev - xi_now, cfg)
    return w * scale, c + (1 - scale) * w.sum()


def drawdown_scale(dd: float, xi: float, cfg: OverlayConfig = OverlayConfig()) -> float:
    """
    >>> round(drawdown_scale(0.15, -1.0), 4)
    0.6954
    """
    gate = max(0.0, -xi)
    return 1 - gate * float(np.tanh(dd / cfg.dd_tau)) * cfg.dd_nu


def drawdown_cash_cap(xi: float, cfg: OverlayConfig = OverlayConfig()) -> float:
    return cfg.dd_cash_base + cfg.dd_cash_span * max(0.0, -xi)


def drawdown_protect(
    w: np.ndarray, c: float, dd: float, xi: float, cfg: OverlayConfig = OverlayConfig()
) -> _wc_t:
    """Regime-gated de-risking on drawdown, cash capped by bearishness

    Cash above the cap, whichever overlay put it there, goes back to the
    longs pro-rata.

    """
    if not 0 <= dd < 1:
        raise ValueError(f"{dd=}: drawdown outside [0, 1)")
    if xi >= 0:
        return w, c
    scale = drawdown_scale(dd, xi, cfg)
    cap = drawdown_cash_cap(xi, cfg)
    w, cash = w * scale, c + (1 - scale) * w.sum()
    if cash > cap:
        w, cash = _set_cash(w, cash, cap)
    return w, cash


@dataclass
class OverlayStep:
    name: str
    pre: PortfolioVector
    post: PortfolioVector
    signals: Dict = field(default_factory=dict)

    @property
    def active(self) -> bool:
        return not np.array_equal(self.pre.as_array(), self.post.as_array())

    def as_dict(self, assets: Optional[Sequence[str]] = None) -> Dict:
        return {
            "name": self.name,
            "active": self.active,
            "signals": self.signals,
            "pre": self.pre.as_dict(assets),
            "post": self.post.as_dict(assets),
        }


class OverlayTrace(list):
    """Ordered overlay steps; each step starts where the previous one ended"""

    def record(self, name: str, post: _wc_t, pre: Optional[_wc_t] = None, **signals):
        before = self[-1].post if self else PortfolioVector(*pre)
        self.append(OverlayStep(name, before, PortfolioVector(*post), signals))

    def is_chained(self) -> bool:
        return all(a.post.allclose(b.pre, atol=0) for a, b in zip(self, self[1:]))

    def as_records(self, assets: Optional[Sequence[str]] = None) -> List[Dict]:
        return [step.as_dict(assets) for step in self]


def run_cascade(
    portfolio: PortfolioVector,
    snap,
    regime: RegimeState,
    drawdown: float,
    roles: AssetRoles,
    cfg: OverlayConfig = OverlayConfig(),
    w_max: float = 0.40,
    c_max: float = 0.30,
) -> Tuple[PortfolioVector, OverlayTrace]:
    """Apply the overlays in order, then project onto the constraint set

    Parameters
    ----------
    portfolio : PortfolioVector
        Feasible council portfolio

    snap : MarketSnapshot
        Market signals at the decision period

    regime : RegimeState
        Current score and label; `previous` drives the transition buffer

    drawdown : float
        Current drawdown of the executed portfolio from its rolling peak

    """
    xi, lbl = regime.score, regime.label
    trace = OverlayTrace()
    w, c = portfolio.weights.copy(), portfolio.cash
    start = (w, c)

    steps: List[Tuple[str, Callable[[np.ndarray, float], _wc_t], Dict]] = [
        (
            "momentum",
            lambda w, c: (momentum_overlay(w, snap.z_30d, xi, cfg), c),
            {"eta": tilt_strength(xi, cfg)},
        ),
        (
            "dominance",
            lambda w, c: dominance_overlay(w, c, snap.btc_ew_spread, lbl, roles, cfg),
            {
                "spread": snap.btc_ew_spread,
                "d": dominance_signal(snap.btc_ew_spread, cfg),
            },
        ),
        (
            "btc_floor",
            lambda w, c: btc_floor(w, c, lbl, roles, cfg),
            {"floor": cfg.btc_floor},
        ),
        (
            "bear_onchain_tilt",
            lambda w, c: (bear_onchain_tilt(w, snap.delta_oc, lbl, roles, cfg), c),
            {
                "delta_oc": snap.delta_oc,
                "skipped": snap.delta_oc is None,
            },
        ),
        (
            "cash_target",
            lambda w, c: volatile_cash_target(w, c, xi, lbl, cfg),
            {"target": cash_target(xi, cfg) if lbl is Regime.VOLATILE else None},
        ),
        (
            "transition_buffer",
            lambda w, c: transition_buffer(w, c, regime.previous, xi, cfg),
            {
                "drop": (
                    None if regime.previous is None else max(0.0, regime.previous - xi)
                ),
            },
        ),
        (
            "drawdown",
            lambda w, c: drawdown_protect(w, c, drawdown, xi, cfg),
            {
                "drawdown": drawdown,
                "gate": max(0.0, -xi),
                "scale": drawdown_scale(drawdown, xi, cfg),
                "cash_cap": drawdown_cash_cap(xi, cfg),
            },
        ),
    ]
    for name, overlay, signals in steps:
        w, c = overlay(w, c)
        trace.record(name, (w, c), pre=start, **signals)

    final = project_constraints(w, c, w_max, c_max)
    trace.record("projection", (final.weights, final.cash))
    return final, trace
