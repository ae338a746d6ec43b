"""Coalition games, exact Shapley credit, and EWP-discounted coalition values

Coalitions are integer bitmasks over 1-based players: player ``i`` is bit
``i - 1``, so ``{1, 3}`` is ``0b101 == 5``.  The canonical order lists
coalitions by size and then lexicographically; for three players it is
``v1, v2, v3, v12, v13, v23, v123``.

"""

from dataclasses import dataclass, field
from functools import reduce
from itertools import combinations, permutations
from logging import getLogger
from math import factorial
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

logger = getLogger(__name__)

MAX_PLAYERS = 12
SIGMA_FLOOR = 1e-8


def coalition(*members: int) -> int:
    """Bitmask of a coalition of 1-based players

    >>> coalition(1, 3)
    5

    """
    if not members:
        raise ValueError("coalition: needs at least one member")
    if min(members) < 1:
        raise ValueError(f"{members}: players are numbered from 1")
    return reduce(lambda mask, i: mask | 1 << (i - 1), members, 0)


def members(mask: int) -> Tuple[int, ...]:
    """1-based members of a coalition bitmask

    >>> members(6)
    (2, 3)

    """
    return tuple(i + 1 for i in range(mask.bit_length()) if mask >> i & 1)


def label(mask: int) -> str:
    """
    >>> label(coalition(1, 2, 3))
    '123'
    """
    return "".join(map(str, members(mask)))


def canonical_order(n: int) -> List[int]:
    """
    >>> canonical_order(3)
    [1, 2, 4, 3, 5, 6, 7]
    """
    players = range(1, n + 1)
    return [coalition(*c) for k in players for c in combinations(players, k)]


def pairs(n: int) -> List[int]:
    return [mask for mask in canonical_order(n) if bin(mask).count("1") == 2]


class CharacteristicGame:
    """Values v(S) for every nonempty coalition, with v(∅) = 0"""

    def __init__(self, values: Mapping[int, float], n: int):
        if n < 1:
            raise ValueError(f"{n=}: a game needs at least one player")
        expected = set(range(1, 2**n))
        if set(values) != expected:
            raise ValueError(
                f"{n=}: expected {len(expected)} coalition values, got {len(values)}"
            )
        vals = {mask: float(values[mask]) for mask in sorted(values)}
        if not np.isfinite(list(vals.values())).all():
            raise ValueError("game: coalition values must be finite")
        self.n = n
        self._values = vals

    @classmethod
    def from_sequence(cls, values: Sequence[float]) -> "CharacteristicGame":
        """Build from values in canonical order

        >>> CharacteristicGame.from_sequence([1, 2, 3, 4, 5, 6, 9]).grand
        9.0

        """
        n = int(np.log2(len(values) + 1))
        if 2**n - 1 != len(values) or n < 1:
            raise ValueError(
                f"{len(values)} values: expected 2**N - 1 coalition values"
            )
        return cls(dict(zip(canonical_order(n), values)), n)

    @classmethod
    def null(cls, n: int) -> "CharacteristicGame":
        return cls(dict.fromkeys(range(1, 2**n), 0.0), n)

    def __call__(self, mask: int) -> float:
        return 0.0 if mask == 0 else self._values[mask]

    def __repr__(self):
        vals = ", ".join(f"v{label(m)}={v:g}" for m, v in self.items())
        return f"{type(self).__name__}({vals})"

    def __add__(self, other: "CharacteristicGame") -> "CharacteristicGame":
        if self.n != other.n:
            raise ValueError(f"{self.n} != {other.n}: games differ in player count")
        return type(self)({m: v + other(m) for m, v in self.items()}, self.n)

    def items(self) -> List[Tuple[int, float]]:
        return [(mask, self._values[mask]) for mask in canonical_order(self.n)]

    def as_sequence(self) -> List[float]:
        return [v for _, v in self.items()]

    def as_dict(self) -> Dict[str, float]:
        return {label(mask): v for mask, v in self.items()}

    @property
    def grand(self) -> float:
        return self._values[2**self.n - 1]


@dataclass(frozen=True, eq=False)
class ShapleyCredit:
    """Raw Shapley values with their truncated, normalised weights"""

    phi: np.ndarray
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "weights", truncate_normalize(phi))

    @property
    def positive(self) -> np.ndarray:
        return np.clip(self.phi, 0, None)


def truncate_normalize(phi: Sequence[float]) -> np.ndarray:
    """Clip negative credit to zero and normalise; uniform if nothing is left

    >>> truncate_normalize([2, -1, 1]).round(4).tolist()
    [0.6667, 0.0, 0.3333]
    >>> truncate_normalize([-1, -2, -3]).round(4).tolist()
    [0.3333, 0.3333, 0.3333]

    """
    pos = np.clip(np.asarray(phi, dtype=float), 0, None)
    total = pos.sum()
    if total <= 0:
        return np.full(pos.size, 1.0 / pos.size)
    return pos / total


def shapley_exact(game: CharacteristicGame) -> ShapleyCredit:
    """Mean marginal contribution over all player orderings"""
    n = game.n
    if n > MAX_PLAYERS:
        raise ValueError(
            f"{n=}: permutation enumeration is limited to N <= {MAX_PLAYERS}"
        )
    phi = np.zeros(n)
    for order in permutations(range(n)):
        mask, prev = 0, 0.0
        for i in order:
            mask |= 1 << i
            cur = game(mask)
            phi[i] += cur - prev
            prev = cur
    return ShapleyCredit(phi / factorial(n))


def shapley_weighted(game: CharacteristicGame) -> ShapleyCredit:
    """Coalition-weight form: Σ_S |S|!(N-|S|-1)!/N! (v(S ∪ {i}) - v(S))"""
    n = game.n
    if n > MAX_PLAYERS:
        raise ValueError(
            f"{n=}: coalition enumeration is limited to N <= {MAX_PLAYERS}"
        )
    weight = [factorial(s) * factorial(n - s - 1) / factorial(n) for s in range(n)]
    phi = np.zeros(n)
    for i in range(n):
        bit = 1 << i
        for mask in range(2**n):
            if mask & bit:
                continue
            phi[i] += weight[bin(mask).count("1")] * (game(mask | bit) - game(mask))
    return ShapleyCredit(phi)


def shapley_closed3(game: CharacteristicGame) -> ShapleyCredit:
    """Closed form for three players

    >>> game = CharacteristicGame.from_sequence([1, 2, 3, 4, 5, 6, 9])
    >>> shapley_closed3(game).phi.round(12).tolist()
    [2.0, 3.0, 4.0]

    """
    if game.n != 3:
        raise ValueError(f"n={game.n}: closed form needs exactly 3 players")
    v1, v2, v3, v12, v13, v23, v123 = game.as_sequence()
    phi = [
        v1 / 3 + (v12 - v2) / 6 + (v13 - v3) / 6 + (v123 - v23) / 3,
        v2 / 3 + (v12 - v1) / 6 + (v23 - v3) / 6 + (v123 - v13) / 3,
        v3 / 3 + (v13 - v1) / 6 + (v23 - v2) / 6 + (v123 - v12) / 3,
    ]
    return ShapleyCredit(np.array(phi))


def shapley(game: CharacteristicGame) -> ShapleyCredit:
    """Closed form for three players, enumeration otherwise"""
    return shapley_closed3(game) if game.n == 3 else shapley_exact(game)


@dataclass
class AxiomReport:
    efficiency: float
    symmetry: float
    dummy: float
    additivity: float
    symmetric_pairs: List[Tuple[int, int]]
    dummies: List[int]
    tol: float = 1e-9

    @property
    def residuals(self) -> Dict[str, float]:
        return {
            "efficiency": self.efficiency,
            "symmetry": self.symmetry,
            "dummy": self.dummy,
            "additivity": self.additivity,
        }

    @property
    def passed(self) -> Dict[str, bool]:
        return {k: v <= self.tol for k, v in self.residuals.items()}

    @property
    def ok(self) -> bool:
        return all(self.passed.values())


def symmetric_pairs(
    game: CharacteristicGame, tol: float = 1e-12
) -> List[Tuple[int, int]]:
    """1-based player pairs interchangeable in every coalition"""
    n, res = game.n, []
    for i, j in combinations(range(n), 2):
        others = [mask for mask in range(2**n) if not mask & (1 << i | 1 << j)]
        if all(abs(game(m | 1 << i) - game(m | 1 << j)) <= tol for m in others):
            res.append((i + 1, j + 1))
    return res


def dummy_players(game: CharacteristicGame, tol: float = 1e-12) -> List[int]:
    """1-based players whose marginal contribution is always their own value"""
    n, res = game.n, []
    for i in range(n):
        bit = 1 << i
        own = game(bit)
        others = (m for m in range(2**n) if not m & bit)
        if all(abs(game(m | bit) - game(m) - own) <= tol for m in others):
            res.append(i + 1)
    return res


def axiom_check(
    game: CharacteristicGame, credit: ShapleyCredit, seed: int = 0, tol: float = 1e-9
) -> AxiomReport:
    """Residuals of the four Shapley axioms for `credit` on `game`

    Additivity is checked against a random companion game with values in
    [-5, 5] drawn from `seed`.

    """
    phi = credit.phi
    pairs_ = symmetric_pairs(game)
    dummies = dummy_players(game)
    rng = np.random.default_rng(seed)
    other = CharacteristicGame.from_sequence(rng.uniform(-5, 5, 2**game.n - 1))
    combined = shapley_exact(game + other).phi
    return AxiomReport(
        efficiency=abs(phi.sum() - game.grand),
        symmetry=max((abs(phi[i - 1] - phi[j - 1]) for i, j in pairs_), default=0.0),
        dummy=max((abs(phi[i - 1] - game(1 << (i - 1))) for i in dummies), default=0.0),
        additivity=float(np.abs(combined - phi - shapley_exact(other).phi).max()),
        symmetric_pairs=pairs_,
        dummies=dummies,
        tol=tol,
    )


def ewp_weights(t: int, h: float) -> np.ndarray:
    """Decay weights exp(-(t - τ)/h) for τ = 1..t; `h` may be infinite

    >>> ewp_weights(3, np.inf).tolist()
    [1.0, 1.0, 1.0]

    """
    if t < 1:
        raise ValueError(f"{t=}: need at least one period")
    if not h > 0:
        raise ValueError(f"{h=}: decay period must be positive")
    lags = np.arange(t - 1, -1, -1, dtype=float)
    return np.exp(-lags / h)


def ewp_moments(returns: Sequence[float], h: float) -> Tuple[float, float]:
    """EWP-weighted daily mean and standard deviation"""
    rets = np.asarray(returns, dtype=float)
    if rets.size == 0:
        raise ValueError("returns: cold ledger")
    w = ewp_weights(rets.size, h)
    mu = float(np.dot(w, rets) / w.sum())
    var = float(np.dot(w, (rets - mu) ** 2) / w.sum())
    return mu, float(np.sqrt(max(var, 0.0)))


def influence_ratio(t: int, n0: int, h: float) -> float:
    """Share of total EWP weight carried by the first `n0` of `t` periods"""
    if not 0 <= n0 <= t:
        raise ValueError(f"{n0=}: must lie within [0, {t}]")
    w = ewp_weights(t, h)
    return float(w[:n0].sum() / w.sum())


@dataclass(frozen=True)
class ShapleyParams:
    h: float = 252.0
    gamma_rho: float = 0.4
    gamma_mu: float = 0.6
    annualization: float = 365.0
    sr_cap: float = 10.0

    def __post_init__(self):
        gammas = (self.gamma_rho, self.gamma_mu)
        if min(gammas) < 0 or abs(sum(gammas) - 1) > 1e-9:
            raise ValueError(
                f"{self.gamma_rho=}, {self.gamma_mu=}: "
                "need nonnegative weights summing to 1"
            )
        if not self.h > 0:
            raise ValueError(f"{self.h=}: decay period must be positive")

    @classmethod
    def from_config(cls, conf: Mapping) -> "ShapleyParams":
        return cls(
            h=float(conf["h"]),
            gamma_rho=float(conf["gamma_rho"]),
            gamma_mu=float(conf["gamma_mu"]),
            annualization=float(conf["annualization"]),
            sr_cap=float(conf["sr_cap"]),
        )


def composite_value(
    mu: float, sigma: float, params: ShapleyParams = ShapleyParams()
) -> float:
    """Blend of annualised Sharpe and annualised mean

    A history flatter than `SIGMA_FLOOR` takes ±sr_cap as its Sharpe term.

    >>> round(composite_value(0.001, 0.01), 5)
    0.9832
    >>> round(composite_value(0.001, 0.0), 3)
    4.219

    """
    ann = params.annualization
    if sigma < SIGMA_FLOOR:
        sharpe = float(np.sign(mu)) * params.sr_cap
    else:
        sharpe = float(np.sqrt(ann) * mu / sigma)
    return params.gamma_rho * sharpe + params.gamma_mu * ann * mu


def char_value(
    returns: Sequence[float], params: ShapleyParams = ShapleyParams()
) -> float:
    """Characteristic value of one coalition's history; 0 before any return"""
    if len(returns) == 0:
        return 0.0
    return composite_value(*ewp_moments(returns, params.h), params)


class ReturnHistory:
    """Append-only realised daily returns for every coalition of `n` players"""

    def __init__(self, n: int = 3):
        self.n = n
        self._returns: Dict[int, List[float]] = {
            mask: [] for mask in canonical_order(n)
        }

    def __len__(self):
        return len(self._returns[1])

    def append(self, returns: Mapping[int, float]):
        if set(returns) != set(self._returns):
            raise ValueError(
                f"{sorted(returns)}: "
                f"expected one return per coalition {sorted(self._returns)}"
            )
        bad = {mask: ret for mask, ret in returns.items() if not np.isfinite(ret)}
        if bad:
            mask, ret = next(iter(bad.items()))
            raise ValueError(f"v{label(mask)}: non-finite return {ret}")
        for mask, ret in returns.items():
            self._returns[mask].append(float(ret))

    def get(self, mask: int) -> np.ndarray:
        return np.array(self._returns[mask])

    def game(self, params: ShapleyParams = ShapleyParams()) -> CharacteristicGame:
        return CharacteristicGame(
            {mask: char_value(rets, params) for mask, rets in self._returns.items()},
            self.n,
        )

    def last(self, mask: int, n: int) -> Optional[np.ndarray]:
        rets = self._returns[mask]
        return np.array(rets[-n:]) if len(rets) >= n else None
