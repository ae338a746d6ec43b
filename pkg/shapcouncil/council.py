"""Council blending: ensemble values, blend ratios, composition, smoothing

Cash is the last coordinate of every portfolio and is mixed and smoothed
like any asset.

"""

from dataclasses import dataclass
from logging import getLogger
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from shapcouncil.shapley import CharacteristicGame, pairs

logger = getLogger(__name__)

TOL = 1e-12


@dataclass(frozen=True, eq=False)
class PortfolioVector:
    """Long-only asset weights plus cash"""

    weights: np.ndarray
    cash: float

    def __post_init__(self):
        weights = np.array(self.weights, dtype=float)
        weights.flags.writeable = False
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "cash", float(self.cash))

    @classmethod
    def from_array(cls, arr: Sequence[float]) -> "PortfolioVector":
        arr = np.asarray(arr, dtype=float)
        return cls(arr[:-1], arr[-1])

    @classmethod
    def equal_weight(cls, k: int, cash: float = 0.0) -> "PortfolioVector":
        return cls(np.full(k, (1 - cash) / k), cash)

    @classmethod
    def all_cash(cls, k: int) -> "PortfolioVector":
        return cls(np.zeros(k), 1.0)

    def __len__(self):
        return self.weights.size

    def as_array(self) -> np.ndarray:
        return np.append(self.weights, self.cash)

    @property
    def total(self) -> float:
        return float(self.weights.sum() + self.cash)

    @property
    def longs(self) -> float:
        return float(self.weights.sum())

    def is_feasible(self, w_max: float, c_max: float, tol: float = 1e-9) -> bool:
        return bool(
            (self.weights >= -tol).all()
            and (self.weights <= w_max + tol).all()
            and -tol <= self.cash <= c_max + tol
            and abs(self.total - 1) <= tol
        )

    def allclose(self, other: "PortfolioVector", atol: float = 1e-12) -> bool:
        if len(self) != len(other):
            return False
        return np.allclose(self.as_array(), other.as_array(), atol=atol)

    def as_dict(self, assets: Optional[Sequence[str]] = None) -> Dict:
        weights = self.weights.tolist()
        if assets is not None:
            weights = dict(zip(assets, weights))
        return {"weights": weights, "cash": self.cash}


@dataclass(frozen=True)
class BlendConfig:
    beta_s1_center: float = 0.90
    beta_s1_scale: float = 0.09
    beta_s1_tau: float = 0.075
    beta_gc_center: float = 0.15
    beta_gc_scale: float = 0.20
    beta_gc_tau: float = 0.10
    ema_build: float = 0.70
    ema_derisk: float = 0.78
    w_max: float = 0.40
    c_max: float = 0.30

    def __post_init__(self):
        if min(self.beta_s1_scale, self.beta_gc_scale) < 0:
            raise ValueError("blend scales must be nonnegative")
        if min(self.beta_s1_tau, self.beta_gc_tau) <= 0:
            raise ValueError("blend bandwidths must be positive")
        if self.beta_s1_center + self.beta_s1_scale > 1:
            raise ValueError(f"{self.beta_s1_center} + {self.beta_s1_scale}: exceeds 1")
        for speed in (self.ema_build, self.ema_derisk):
            if not 0 < speed <= 1:
                raise ValueError(f"{speed=}: smoothing speed must lie in (0, 1]")

    @classmethod
    def from_config(cls, conf: Mapping) -> "BlendConfig":
        return cls(**{k: float(conf[k]) for k in cls.__dataclass_fields__})


def ensemble_values(
    omega_t: Sequence[float], p: Sequence[float], game: CharacteristicGame
) -> Tuple[float, float]:
    """Weight-averaged singleton and pair values

    >>> game = CharacteristicGame.from_sequence([1.3, 0, 0, 1, 2, 3, 0])
    >>> ensemble_values([1, 0, 0], [1 / 3] * 3, game)
    (1.3, 2.0)

    """
    singles = [game(1 << i) for i in range(game.n)]
    doubles = [game(mask) for mask in pairs(game.n)]
    return float(np.dot(omega_t, singles)), float(np.dot(p, doubles))


def blend_ratios(
    v_s1: float, v_s2: float, v_grand: float, conf: BlendConfig = BlendConfig()
) -> Tuple[float, float]:
    """Stage-1 share and grand-coalition blend driven by value gaps

    >>> blend_ratios(1.0, 1.0, 1.0)
    (0.9, 0.15)

    """
    beta_s1 = conf.beta_s1_center + conf.beta_s1_scale * np.tanh(
        -(v_s2 - v_s1) / conf.beta_s1_tau
    )
    beta_gc = conf.beta_gc_center + conf.beta_gc_scale * np.tanh(
        (v_grand - v_s1) / conf.beta_gc_tau
    )
    return float(beta_s1), float(max(0.0, beta_gc))


def divergence_discount(beta_gc: float, kappa: float) -> float:
    """
    >>> divergence_discount(0.15, 1.0)
    0.15
    """
    return beta_gc * (0.5 + kappa / 2)


def compose_council(
    stage1: Sequence[PortfolioVector],
    stage2: Sequence[PortfolioVector],
    grand: PortfolioVector,
    omega_t: Sequence[float],
    p: Sequence[float],
    beta_s1: float,
    beta_gc: float,
) -> PortfolioVector:
    """(1 - β_gc)[β_S1 Σ ω̃_i w_i + (1 - β_S1) Σ p_ij w_ij] + β_gc w_123"""
    if len(stage1) != len(omega_t) or len(stage2) != len(p):
        raise ValueError(
            f"{len(stage1)}/{len(omega_t)}, {len(stage2)}/{len(p)}: "
            "portfolio and weight counts differ"
        )
    dims = {len(pf) for pf in (*stage1, *stage2, grand)}
    if len(dims) != 1:
        raise ValueError(f"{sorted(dims)}: portfolios differ in asset count")
    s1 = np.dot(np.asarray(omega_t, dtype=float), [pf.as_array() for pf in stage1])
    s2 = np.dot(np.asarray(p, dtype=float), [pf.as_array() for pf in stage2])
    stages = beta_s1 * s1 + (1 - beta_s1) * s2
    mixed = (1 - beta_gc) * stages + beta_gc * grand.as_array()
    return PortfolioVector.from_array(mixed)


def ema_smooth(
    target: PortfolioVector,
    previous: PortfolioVector,
    build: float = 0.70,
    derisk: float = 0.78,
) -> PortfolioVector:
    """Asymmetric EMA per coordinate, faster when a coordinate shrinks"""
    tgt, prev = target.as_array(), previous.as_array()
    eta = np.where(tgt >= prev, build, derisk)
    mixed = eta * tgt + (1 - eta) * prev
    return PortfolioVector.from_array(mixed / mixed.sum())


def _redistribute(w: np.ndarray, mass: float, w_max: float) -> Tuple[np.ndarray, float]:
    """Add `mass` to uncapped assets pro-rata, re-clipping until stable

    Returns the weights and any mass left when every asset is capped.

    """
    for _ in range(w.size + 1):
        if mass <= TOL:
            return w, 0.0
        room = w < w_max
        if not room.any():
            break
        base = w[room]
        if base.sum() > 0:
            share = base / base.sum()
        else:
            share = np.full(base.size, 1.0 / base.size)
        w[room] += mass * share
        over = w > w_max
        mass = float((w[over] - w_max).sum())
        w[over] = w_max
    return w, mass


def _infeasible(k: int, w_max: float, c_max: float) -> str:
    return (
        f"{k=}, {w_max=}, {c_max=}: "
        "constraint set infeasible for K·w_max + c_max < 1"
    )


def project_constraints(
    weights: Sequence[float], cash: float, w_max: float = 0.40, c_max: float = 0.30
) -> PortfolioVector:
    """Proportional projection onto the capped long-only simplex

    >>> project_constraints([0.6, 0.2, 0.2], 0.0).weights.round(12).tolist()
    [0.4, 0.3, 0.3]

    """
    w = np.clip(np.asarray(weights, dtype=float), 0, None)
    c = max(float(cash), 0.0)
    k = w.size
    if k * w_max + c_max < 1 - 1e-9:
        raise ValueError(_infeasible(k, w_max, c_max))
    total = w.sum() + c
    if total <= 0:
        raise ValueError(f"{total=}: cannot project an empty portfolio")
    if abs(total - 1) > TOL:
        w, c = w / total, c / total
    if c > c_max:
        w, left = _redistribute(w, c - c_max, w_max)
        c = c_max + left
    over = w > w_max
    if over.any():
        excess = float((w[over] - w_max).sum())
        w[over] = w_max
        w, left = _redistribute(w, excess, w_max)
        c += left
    if c > c_max + 1e-9:
        raise ValueError(_infeasible(k, w_max, c_max))
    return PortfolioVector(w, min(c, c_max))
