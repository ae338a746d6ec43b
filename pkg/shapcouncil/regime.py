"""Regime score, labels, regime-conditional multipliers, and consensus"""

from dataclasses import dataclass
from enum import Enum
from logging import getLogger
from typing import Mapping, Optional, Sequence, Set

import numpy as np

logger = getLogger(__name__)


class Regime(str, Enum):
    BULL = "bull"
    VOLATILE = "volatile"
    BEAR = "bear"

    def __str__(self):
        return self.value


ANCHORS = ((1.50, 1.20, 0.60), (0.90, 1.00, 0.90), (0.60, 0.80, 1.50))


@dataclass(frozen=True)
class RegimeParams:
    xi_plus: float = 0.30
    xi_minus: float = -0.30
    attenuation_factor: float = 0.5
    attenuation_ratio: float = 0.30
    saturation: float = 0.999
    anchors: tuple = ANCHORS  # per agent: (ξ = +1, ξ = 0, ξ = -1)
    consensus_gain: float = 0.5

    def __post_init__(self):
        if not self.xi_minus < 0 < self.xi_plus:
            raise ValueError(
                f"{self.xi_minus}, {self.xi_plus}: need xi_minus < 0 < xi_plus"
            )
        anchors = np.asarray(self.anchors, dtype=float)
        if anchors.ndim != 2 or anchors.shape[1] != 3 or (anchors <= 0).any():
            raise ValueError(f"{self.anchors}: anchors must be positive triples")

    @classmethod
    def from_config(cls, conf: Mapping) -> "RegimeParams":
        return cls(
            xi_plus=float(conf["xi_plus"]),
            xi_minus=float(conf["xi_minus"]),
            attenuation_factor=float(conf["attenuation_factor"]),
            attenuation_ratio=float(conf["attenuation_ratio"]),
            saturation=float(conf["xi_saturation"]),
            anchors=tuple(
                tuple(float(v) for v in row) for row in conf["multiplier_anchors"]
            ),
            consensus_gain=float(conf["consensus_gain"]),
        )


def is_conflicting(r_30d: float, r_7d: float, ratio: float = 0.30) -> bool:
    """Short-term move opposes the 30-day trend by more than `ratio` of it"""
    return bool(np.sign(r_7d) != np.sign(r_30d) and abs(r_7d) > ratio * abs(r_30d))


def regime_score(
    r_30d: float, sigma_30d: float, r_7d: float, params: RegimeParams = RegimeParams()
) -> float:
    """Momentum-to-volatility score in (-1, 1)

    >>> round(regime_score(0.1, 0.1, 0.05), 5)
    0.76159
    >>> round(regime_score(0.1, 0.1, -0.04), 5)
    0.3808

    """
    if sigma_30d < 0:
        raise ValueError(f"{sigma_30d=}: volatility cannot be negative")
    sat = params.saturation
    if sigma_30d == 0:
        xi = float(np.sign(r_30d)) * sat
    else:
        xi = float(np.clip(np.tanh(r_30d / sigma_30d), -sat, sat))
    if is_conflicting(r_30d, r_7d, params.attenuation_ratio):
        xi *= params.attenuation_factor
    return xi


def label(xi: float, xi_plus: float = 0.30, xi_minus: float = -0.30) -> Regime:
    """Thresholds themselves are volatile

    >>> label(0.5), label(-0.5), label(0.30)
    (<Regime.BULL: 'bull'>, <Regime.BEAR: 'bear'>, <Regime.VOLATILE: 'volatile'>)

    """
    if xi > xi_plus:
        return Regime.BULL
    if xi < xi_minus:
        return Regime.BEAR
    return Regime.VOLATILE


@dataclass(frozen=True)
class RegimeState:
    score: float
    label: Regime
    previous: Optional[float] = None
    attenuated: bool = False

    @classmethod
    def perceive(
        cls,
        r_30d: float,
        sigma_30d: float,
        r_7d: float,
        previous: Optional[float] = None,
        params: RegimeParams = RegimeParams(),
    ) -> "RegimeState":
        xi = regime_score(r_30d, sigma_30d, r_7d, params)
        return cls(
            score=xi,
            label=label(xi, params.xi_plus, params.xi_minus),
            previous=previous,
            attenuated=is_conflicting(r_30d, r_7d, params.attenuation_ratio),
        )


def psi(anchors: Sequence[Sequence[float]], xi: float) -> np.ndarray:
    """Per-agent multipliers, linear between the ξ = -1, 0, +1 anchors

    >>> psi(ANCHORS, 0.5).round(4).tolist()
    [1.35, 0.95, 0.7]

    """
    if not -1 <= xi <= 1:
        raise ValueError(f"{xi=}: outside [-1, 1]")
    # anchors are listed from ξ = +1 down to ξ = -1
    return np.array([np.interp(xi, [-1.0, 0.0, 1.0], row[::-1]) for row in anchors])


def consensus_kappa(omega: Sequence[float], votes: Sequence[Regime]) -> float:
    """Largest total weight behind a single regime vote"""
    mass = {}
    for w, vote in zip(omega, votes):
        mass[vote] = mass.get(vote, 0.0) + float(w)
    return max(mass.values())


def plurality(
    omega: Sequence[float], votes: Sequence[Regime], tol: float = 1e-12
) -> Set[Regime]:
    """Regimes carrying the largest vote weight; several on ties"""
    mass = {}
    for w, vote in zip(omega, votes):
        mass[vote] = mass.get(vote, 0.0) + float(w)
    top = max(mass.values())
    return {vote for vote, m in mass.items() if top - m <= tol}


def amplification(kappa: float, n: int, gain: float = 0.5) -> float:
    """
    >>> amplification(1 / 3, 3)
    1.0
    >>> amplification(1.0, 3)
    1.5
    """
    strength = float(np.clip((kappa - 1 / n) / (1 - 1 / n), 0, 1))
    return 1 + gain * strength


def apply_multiplier(
    omega: Sequence[float],
    multipliers: Sequence[float],
    kappa: float,
    votes: Optional[Sequence[Regime]] = None,
    gain: float = 0.5,
) -> np.ndarray:
    """Regime-adjusted agent weights ω̃ ∝ ω ψ

    Agents voting with the weighted plurality have their multiplier scaled
    by the consensus amplification before renormalising.

    """
    omega = np.asarray(omega, dtype=float)
    mult = np.asarray(multipliers, dtype=float).copy()
    if (mult <= 0).any():
        raise ValueError(f"{mult.tolist()}: multipliers must be positive")
    if votes is not None:
        leaders = plurality(omega, votes)
        factor = amplification(kappa, omega.size, gain)
        mult[[vote in leaders for vote in votes]] *= factor
    raw = omega * mult
    return raw / raw.sum()
