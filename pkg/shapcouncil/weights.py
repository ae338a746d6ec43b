"""Bayesian adaptive mixture and the selective winner-takes-all override"""

from dataclasses import dataclass, field
from logging import getLogger
from math import ceil, exp, log
from typing import Mapping, Optional, Sequence, Tuple

import numpy as np

from shapcouncil.shapley import truncate_normalize

logger = getLogger(__name__)


@dataclass(frozen=True)
class MixtureConfig:
    lam: float = 30.0
    n_win: int = 30
    theta_wta: float = 1.8
    omega_wta: float = 0.80

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"{self.lam=}: concentration must be positive")
        if self.n_win < 1:
            raise ValueError(f"{self.n_win=}: window must hold at least one period")
        if not self.theta_wta > 1:
            raise ValueError(f"{self.theta_wta=}: dominance threshold must exceed 1")
        if not 0 < self.omega_wta < 1:
            raise ValueError(f"{self.omega_wta=}: share must lie in (0, 1)")

    @classmethod
    def from_config(cls, conf: Mapping) -> "MixtureConfig":
        return cls(
            lam=float(conf["lambda"]),
            n_win=int(conf["n_win"]),
            theta_wta=float(conf["theta_wta"]),
            omega_wta=float(conf["omega_wta"]),
        )


@dataclass(frozen=True, eq=False)
class WeightState:
    """Deployed agent weights ω and pairwise weights p after period `t`"""

    omega: np.ndarray
    p: np.ndarray
    t: int = 0
    wta_active: bool = False
    dominant: Optional[int] = None  # 0-based
    alpha: float = field(default=0.0)

    def __post_init__(self):
        for name in ("omega", "p"):
            vec = np.asarray(getattr(self, name), dtype=float)
            if (vec < 0).any() or abs(vec.sum() - 1) > 1e-9:
                raise ValueError(f"{name}={vec.tolist()}: not on the simplex")
            object.__setattr__(self, name, vec)

    @classmethod
    def uniform(cls, n: int = 3) -> "WeightState":
        n_pairs = n * (n - 1) // 2
        return cls(np.full(n, 1.0 / n), np.full(n_pairs, 1.0 / n_pairs))


def alpha_schedule(t: int, lam: float) -> float:
    """Evidence weight 1 - exp(-t/λ)

    >>> alpha_schedule(0, 30)
    0.0
    >>> round(alpha_schedule(30, 30), 5)
    0.63212

    """
    if t < 0:
        raise ValueError(f"{t=}: completed periods cannot be negative")
    return 1 - exp(-t / lam)


def burnin_days(alpha: float, lam: float) -> int:
    """Periods until the evidence weight reaches `alpha`

    >>> [burnin_days(a, 30) for a in (0.25, 0.5, 0.75, 0.9)]
    [9, 21, 42, 70]

    """
    if not 0 <= alpha < 1:
        raise ValueError(f"{alpha=}: must lie in [0, 1)")
    return ceil(-lam * log(1 - alpha))


def bayes_mix(wbar: Sequence[float], alpha: float) -> np.ndarray:
    """Blend data-driven weights with the uniform prior

    >>> bayes_mix([0.5, 0.25, 0.25], 0.5).round(5).tolist()
    [0.41667, 0.29167, 0.29167]

    """
    wbar = np.asarray(wbar, dtype=float)
    return alpha * wbar + (1 - alpha) / wbar.size


def pairwise_mix(pair_values: Sequence[float], alpha: float) -> np.ndarray:
    """Truncate-normalise the pairwise coalition values, then mix with the prior"""
    return bayes_mix(truncate_normalize(pair_values), alpha)


def rolling_sharpe(
    returns: Sequence[float], n_win: int, annualization: float = 365
) -> float:
    """Annualised Sharpe of the last `n_win` returns; 0 if fewer or flat"""
    rets = np.asarray(returns, dtype=float)
    if rets.size < max(n_win, 2):
        return 0.0
    window = rets[-n_win:]
    sd = window.std(ddof=1)
    if not sd > 0:
        return 0.0
    return float(np.sqrt(annualization) * window.mean() / sd)


def wta_override(
    omega: Sequence[float], rho: Sequence[float], theta: float, omega_wta: float
) -> Tuple[np.ndarray, Optional[int]]:
    """Concentrate weight on a dominant agent

    Fires when the leading rolling Sharpe is at least `theta` times the mean
    of the others and both are positive.  The others share ``1 - omega_wta``
    in proportion to their current weights.

    Returns
    -------
    Tuple[np.ndarray, Optional[int]]
        Weights and the 0-based dominant agent (`None` when inactive)

    """
    omega = np.asarray(omega, dtype=float)
    rho = np.asarray(rho, dtype=float)
    lead = int(np.argmax(rho))
    others = np.delete(rho, lead)
    if not (rho[lead] > 0 and others.mean() > 0 and rho[lead] / others.mean() >= theta):
        return omega.copy(), None
    rest = np.delete(omega, lead)
    total = rest.sum()
    share = rest / total if total > 0 else np.full(rest.size, 1.0 / rest.size)
    res = np.empty_like(omega)
    res[np.arange(omega.size) != lead] = (1 - omega_wta) * share
    res[lead] = omega_wta
    ratio = rho[lead] / others.mean()
    logger.debug(f"WTA: agent {lead + 1} dominant, ratio {ratio:.3f}")
    return res, lead


def mix(
    agent_credit: Sequence[float],
    pair_values: Sequence[float],
    rho: Sequence[float],
    t: int,
    conf: MixtureConfig = MixtureConfig(),
) -> WeightState:
    """Deployed weights after `t` completed periods"""
    alpha = alpha_schedule(t, conf.lam)
    omega = bayes_mix(truncate_normalize(agent_credit), alpha)
    omega, dominant = wta_override(omega, rho, conf.theta_wta, conf.omega_wta)
    return WeightState(
        omega=omega,
        p=pairwise_mix(pair_values, alpha),
        t=t,
        wta_active=dominant is not None,
        dominant=dominant,
        alpha=alpha,
    )
