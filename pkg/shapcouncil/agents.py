"""Agent policies: stage-1 decisions, pairwise debate, grand readout

The reference policies are deterministic stand-ins for the technical,
on-chain, and macro specialists.  Any object implementing `CouncilPolicies`
can replace them.

"""

from collections import Counter
from dataclasses import dataclass, field
from logging import getLogger
from typing import Dict, List, Mapping, Optional, Protocol, Sequence, Tuple

import numpy as np

from shapcouncil.council import PortfolioVector, project_constraints
from shapcouncil.regime import Regime, label

logger = getLogger(__name__)

AGENTS = ("A1", "A2", "A3")  # technical, on-chain, macro
PAIR_INDEX = ((0, 1), (0, 2), (1, 2))
EPS = 1e-8


@dataclass(frozen=True, eq=False)
class AgentDecision:
    portfolio: PortfolioVector
    vote: Regime
    rationale: str = ""

    def as_dict(self, assets: Optional[Sequence[str]] = None) -> Dict:
        return {
            **self.portfolio.as_dict(assets),
            "vote": str(self.vote),
            "rationale": self.rationale,
        }


@dataclass(frozen=True, eq=False)
class ShapleyReport:
    """What the grand coalition sees of the ledger"""

    omega: np.ndarray
    p: np.ndarray
    values: Dict[str, float] = field(default_factory=dict)
    sharpes: np.ndarray = field(default_factory=lambda: np.zeros(len(AGENTS)))
    wta_active: bool = False
    t: int = 0


@dataclass(frozen=True)
class AgentParams:
    temperature: float = 1.0
    a1_cash_base: float = 0.08
    a1_cash_span: float = 0.17
    a2_cash: float = 0.15
    debate_caution: float = 0.25
    readout_split: float = 0.5
    macro_signals: Tuple[Tuple[str, int], ...] = (
        ("sentiment", 1),
        ("fear_greed", 1),
        ("vix", -1),
    )
    xi_plus: float = 0.30
    xi_minus: float = -0.30
    w_max: float = 0.40
    c_max: float = 0.30

    @classmethod
    def from_config(cls, conf: Mapping) -> "AgentParams":
        return cls(
            temperature=float(conf["agents.temperature"]),
            a1_cash_base=float(conf["agents.a1_cash_base"]),
            a1_cash_span=float(conf["agents.a1_cash_span"]),
            a2_cash=float(conf["agents.a2_cash"]),
            debate_caution=float(conf["agents.debate_caution"]),
            readout_split=float(conf["agents.readout_split"]),
            macro_signals=tuple(
                (k, int(v)) for k, v in conf["agents.macro_signals"].items()
            ),
            xi_plus=float(conf["xi_plus"]),
            xi_minus=float(conf["xi_minus"]),
            w_max=float(conf["w_max"]),
            c_max=float(conf["c_max"]),
        )


class CouncilPolicies(Protocol):
    """Interface every policy set implements"""

    def decide(self, agent: str, snap) -> AgentDecision:
        ...

    def debate(
        self, first: AgentDecision, second: AgentDecision, snap
    ) -> AgentDecision:
        ...

    def grand_readout(
        self,
        stage1: Sequence[AgentDecision],
        stage2: Sequence[AgentDecision],
        report: ShapleyReport,
    ) -> AgentDecision:
        ...


def softmax(x: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    """
    >>> softmax(np.zeros(4)).tolist()
    [0.25, 0.25, 0.25, 0.25]
    """
    x = np.asarray(x, dtype=float) / temperature
    e = np.exp(x - x.max())
    return e / e.sum()


def risk_on_score(
    macro_z: Mapping[str, float], signals: Sequence[Tuple[str, int]]
) -> float:
    """Macro risk appetite in [0, 1]; 0.5 without any available signal"""
    scores = [
        sign * np.tanh(macro_z[name]) for name, sign in signals if name in macro_z
    ]
    if not scores:
        return 0.5
    return float((1 + np.mean(scores)) / 2)


def macro_allocation(risk_on: float, k: int, c_max: float) -> Tuple[np.ndarray, float]:
    """Equal-weight longs, cash rising to `c_max` as risk appetite falls

    >>> w, c = macro_allocation(0.0, 4, 0.3)
    >>> round(c, 2), w.round(4).tolist()
    (0.3, [0.175, 0.175, 0.175, 0.175])

    """
    if not 0 <= risk_on <= 1:
        raise ValueError(f"{risk_on=}: outside [0, 1]")
    cash = c_max * (1 - risk_on)
    return np.full(k, (1 - cash) / k), cash


class ReferencePolicies:
    """Deterministic technical (A1), on-chain (A2), and macro (A3) agents"""

    def __init__(self, params: AgentParams = AgentParams()):
        self.params = params

    def _decision(self, weights, cash, vote, rationale) -> AgentDecision:
        pf = project_constraints(weights, cash, self.params.w_max, self.params.c_max)
        return AgentDecision(pf, vote, rationale)

    def _vote(self, signal: float) -> Regime:
        return label(float(np.tanh(signal)), self.params.xi_plus, self.params.xi_minus)

    def decide(self, agent: str, snap) -> AgentDecision:
        try:
            policies = {"A1": self._technical, "A2": self._onchain, "A3": self._macro}
            policy = policies[agent]
        except KeyError:
            raise KeyError(f"{agent}: unknown agent id") from None
        return policy(snap)

    def _technical(self, snap) -> AgentDecision:
        vol = np.asarray(snap.vol_30d)
        ratio = np.where(vol > EPS, snap.logret_30d / np.maximum(vol, EPS), 0.0)
        momentum = float(ratio.mean())
        prm = self.params
        cash = prm.a1_cash_base + prm.a1_cash_span * (1 - np.tanh(max(0.0, momentum)))
        weights = (1 - cash) * softmax(ratio, prm.temperature)
        vote = self._vote(momentum)
        return self._decision(weights, cash, vote, f"momentum {momentum:.3f}")

    def _onchain(self, snap) -> AgentDecision:
        k, cash = len(snap.assets), self.params.a2_cash
        if not snap.has_onchain:
            return self._decision(
                np.full(k, (1 - cash) / k),
                cash,
                Regime.VOLATILE,
                "on-chain data unavailable",
            )
        z = np.nan_to_num(snap.onchain_z, nan=0.0)
        activity = float(np.nanmean(snap.onchain_z))
        weights = (1 - cash) * softmax(z, self.params.temperature)
        vote = self._vote(activity)
        return self._decision(weights, cash, vote, f"activity {activity:.3f}")

    def _macro(self, snap) -> AgentDecision:
        prm = self.params
        risk_on = risk_on_score(snap.macro_z, prm.macro_signals)
        weights, cash = macro_allocation(risk_on, len(snap.assets), prm.c_max)
        vote = self._vote(2 * risk_on - 1)
        return self._decision(weights, cash, vote, f"risk-on {risk_on:.3f}")

    def debate(
        self, first: AgentDecision, second: AgentDecision, snap=None
    ) -> AgentDecision:
        """Average the two portfolios; disagreement moves long mass to cash"""
        mean = (first.portfolio.as_array() + second.portfolio.as_array()) / 2
        gap = first.portfolio.weights - second.portfolio.weights
        disagreement = float(np.abs(gap).sum() / 2)
        scale = 1 - self.params.debate_caution * disagreement
        weights = mean[:-1] * scale
        cash = mean[-1] + mean[:-1].sum() * (1 - scale)
        vote = first.vote if first.vote == second.vote else Regime.VOLATILE
        return self._decision(weights, cash, vote, f"disagreement {disagreement:.3f}")

    def grand_readout(
        self,
        stage1: Sequence[AgentDecision],
        stage2: Sequence[AgentDecision],
        report: ShapleyReport,
    ) -> AgentDecision:
        """Blend the weight-averaged stage-1 and stage-2 portfolios"""
        split = self.params.readout_split
        s1 = np.dot(report.omega, [d.portfolio.as_array() for d in stage1])
        s2 = np.dot(report.p, [d.portfolio.as_array() for d in stage2])
        mixed = split * s1 + (1 - split) * s2
        counts = Counter(d.vote for d in stage1).most_common()
        tied = [vote for vote, n in counts if n == counts[0][1]]
        vote = tied[0] if len(tied) == 1 else Regime.VOLATILE
        return self._decision(mixed[:-1], mixed[-1], vote, f"plurality {vote}")


POLICY_SETS = {"reference": ReferencePolicies}


def policy_set(name: str, params: AgentParams = AgentParams()) -> CouncilPolicies:
    try:
        return POLICY_SETS[name](params)
    except KeyError:
        raise KeyError(f"{name}: unknown policy set") from None


def coalition_decisions(
    policies: CouncilPolicies, snap, report: ShapleyReport
) -> Tuple[List[AgentDecision], List[AgentDecision], AgentDecision]:
    """The seven coalition portfolios of one period"""
    stage1 = [policies.decide(agent, snap) for agent in AGENTS]
    stage2 = [policies.debate(stage1[i], stage1[j], snap) for i, j in PAIR_INDEX]
    return stage1, stage2, policies.grand_readout(stage1, stage2, report)
