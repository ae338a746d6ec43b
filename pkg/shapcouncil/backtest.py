"""Online council loop: decide, execute, realise, and update the ledger

Weights decided at the close of period ``t`` earn the close-to-close
returns of ``t + 1``.  Coalition histories are fed the returns of the raw
coalition portfolios (no smoothing, overlays, or costs); the executed
portfolio pays ``bps`` per unit of drift-adjusted turnover.

"""

from dataclasses import dataclass, field
import hashlib
from logging import getLogger
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from shapcouncil.agents import (
    AGENTS,
    AgentDecision,
    AgentParams,
    CouncilPolicies,
    ShapleyReport,
    coalition_decisions,
    policy_set,
)
from shapcouncil.config import RunConfig
from shapcouncil.council import (
    BlendConfig,
    PortfolioVector,
    blend_ratios,
    compose_council,
    divergence_discount,
    ema_smooth,
    ensemble_values,
    project_constraints,
)
from shapcouncil.io import FeatureTable, PriceTable
from shapcouncil.market import snapshot
from shapcouncil.metrics import Metrics, metrics
from shapcouncil.overlays import AssetRoles, OverlayConfig, run_cascade
from shapcouncil.regime import (
    RegimeParams,
    RegimeState,
    amplification,
    apply_multiplier,
    consensus_kappa,
    psi,
)
from shapcouncil.shapley import (
    CharacteristicGame,
    ReturnHistory,
    ShapleyCredit,
    ShapleyParams,
    canonical_order,
    label,
    pairs,
    shapley,
)
from shapcouncil.trace import TraceRecord
from shapcouncil.weights import (
    MixtureConfig,
    WeightState,
    burnin_days,
    mix,
    rolling_sharpe,
)

logger = getLogger(__name__)

_date_t = Union[str, pd.Timestamp, None]

# coalition bitmask -> position in (stage1, stage2, grand)
STAGE1_MASKS = (1, 2, 4)
STAGE2_MASKS = tuple(pairs(len(AGENTS)))
GRAND_MASK = 2 ** len(AGENTS) - 1


class ShapleyLedger:
    """Coalition return histories and the weights derived from them"""

    def __init__(
        self,
        params: ShapleyParams = ShapleyParams(),
        mixture: MixtureConfig = MixtureConfig(),
        n: int = len(AGENTS),
    ):
        self.n = n
        self.params = params
        self.mixture = mixture
        self.history = ReturnHistory(n)
        self.game = CharacteristicGame.null(n)
        self.credit = ShapleyCredit(np.zeros(n))
        self.state = WeightState.uniform(n)
        self.sharpes = np.zeros(n)

    @property
    def t(self) -> int:
        """Completed periods"""
        return len(self.history)

    def update(self, returns: Mapping[int, float]) -> "ShapleyLedger":
        """Append one realised return per coalition and refresh the weights"""
        self.history.append(returns)
        self.game = self.history.game(self.params)
        self.credit = shapley(self.game)
        self.sharpes = np.array(
            [
                rolling_sharpe(
                    self.history.get(1 << i),
                    self.mixture.n_win,
                    self.params.annualization,
                )
                for i in range(self.n)
            ]
        )
        pair_values = [self.game(mask) for mask in pairs(self.n)]
        self.state = mix(
            self.credit.phi, pair_values, self.sharpes, self.t, self.mixture
        )
        if self.state.wta_active:
            winner = self.state.dominant + 1
            logger.debug(f"t={self.t}: winner-takes-all on agent {winner}")
        return self

    def report(self) -> ShapleyReport:
        return ShapleyReport(
            omega=self.state.omega,
            p=self.state.p,
            values=self.game.as_dict(),
            sharpes=self.sharpes,
            wta_active=self.state.wta_active,
            t=self.t,
        )


def ledger_update(ledger: ShapleyLedger, returns: Mapping[int, float]) -> ShapleyLedger:
    return ledger.update(returns)


def drift(
    weights: Sequence[float], cash: float, asset_returns: Sequence[float]
) -> Tuple[np.ndarray, float]:
    """Holdings after one period of price moves, as fractions of the new total

    >>> w, c = drift([0.5, 0.5], 0.0, [0.1, -0.1])
    >>> w.round(4).tolist(), c
    ([0.55, 0.45], 0.0)

    """
    growth = 1 + np.asarray(asset_returns, dtype=float)
    value = np.asarray(weights, dtype=float) * growth
    total = value.sum() + cash
    if total <= 0:
        raise ValueError(f"{total=}: portfolio wiped out")
    return value / total, cash / total


def turnover(target: PortfolioVector, held: np.ndarray, held_cash: float) -> float:
    """Σ|w - w̃| + |c - c̃| against drift-adjusted holdings

    >>> turnover(PortfolioVector([0.5, 0.5], 0.0), np.zeros(2), 1.0)
    2.0

    """
    return float(np.abs(target.weights - held).sum() + abs(target.cash - held_cash))


def replay(
    weights: np.ndarray,
    cash: Sequence[float],
    asset_returns: np.ndarray,
    bps: float = 0.0,
    index: Optional[pd.Index] = None,
) -> pd.DataFrame:
    """Net returns and costs of a fixed weight path, starting from all cash

    Row ``t`` holds the weights decided at ``t`` and the asset returns they
    earn over the following period.

    """
    weights = np.atleast_2d(np.asarray(weights, dtype=float))
    asset_returns = np.atleast_2d(np.asarray(asset_returns, dtype=float))
    cash = np.asarray(cash, dtype=float)
    if weights.shape != asset_returns.shape or cash.shape != (weights.shape[0],):
        raise ValueError(
            f"{weights.shape}, {cash.shape}, {asset_returns.shape}: "
            "weight path and returns differ in shape"
        )
    held, held_cash = np.zeros(weights.shape[1]), 1.0
    rows = []
    for w, c, r in zip(weights, cash, asset_returns):
        pf = PortfolioVector(w, c)
        traded = turnover(pf, held, held_cash)
        gross = float(pf.weights @ r)
        cost = bps * 1e-4 * traded
        rows.append((gross, traded, cost, gross - cost))
        held, held_cash = drift(pf.weights, pf.cash, r)
    return pd.DataFrame(rows, columns=["gross", "turnover", "cost", "net"], index=index)


class EquityTracker:
    """Net equity of the executed portfolio and its drawdown from the peak

    A positive `window` limits the peak to the last `window` periods.

    """

    def __init__(self, window: int = 0):
        self.window = window
        self.equity = [1.0]

    def update(self, ret: float):
        self.equity.append(self.equity[-1] * (1 + ret))

    @property
    def drawdown(self) -> float:
        curve = self.equity[-(self.window + 1) :] if self.window else self.equity
        return 1 - curve[-1] / max(curve)


@dataclass
class PeriodResult:
    t: int
    portfolio: PortfolioVector
    record: TraceRecord
    regime: RegimeState
    realized: Optional[Dict] = None
    coalition_returns: Optional[Dict[int, float]] = None


class CouncilBacktest:
    """Per-period council inference over a price table

    Parameters
    ----------
    prices : PriceTable
        Close prices; every row may serve as window history

    features : FeatureTable, optional
        On-chain and macro series, aligned to the price calendar

    conf : RunConfig
        Effective configuration

    policies : CouncilPolicies, optional
        Agent policies; by default the set named by ``agents.policy_set``

    """

    def __init__(
        self,
        prices: PriceTable,
        features: Optional[FeatureTable] = None,
        conf: Optional[RunConfig] = None,
        policies: Optional[CouncilPolicies] = None,
    ):
        self.conf = conf = RunConfig.from_layers() if conf is None else conf
        self.prices = prices
        self.features = (
            FeatureTable.empty(prices.dates)
            if features is None
            else features.align(prices.dates)
        )
        self.regime_params = RegimeParams.from_config(conf)
        self.blend = BlendConfig.from_config(conf)
        self.overlay_cfg = OverlayConfig.from_config(conf)
        self.roles = AssetRoles.resolve(prices.assets, conf.subset("roles"))
        if policies is None:
            params = AgentParams.from_config(conf)
            policies = policy_set(conf["agents.policy_set"], params)
        self.policies = policies
        self.ledger = ShapleyLedger(
            ShapleyParams.from_config(conf), MixtureConfig.from_config(conf)
        )
        self.tracker = EquityTracker(conf["drawdown_window"])
        self.bps = float(conf["bps"])
        self.previous: Optional[PortfolioVector] = None
        self.xi_prev: Optional[float] = None
        self.held = np.zeros(len(prices.assets))
        self.held_cash = 1.0

    def _snapshot(self, t: int):
        return snapshot(
            self.prices,
            self.features,
            t,
            window=self.conf["window"],
            btc=self.conf["roles.btc"],
            onchain_metrics=self.conf["onchain_metrics"],
            macro=list(self.conf["agents.macro_signals"]),
        )

    def step(self, t: int) -> PeriodResult:
        """Decide the portfolio at `t`, realise it over `t + 1`, update the ledger"""
        conf, ledger = self.conf, self.ledger
        w_max, c_max = conf["w_max"], conf["c_max"]
        snap = self._snapshot(t)
        regime = RegimeState.perceive(
            snap.r_30d, snap.sigma_30d, snap.r_7d, self.xi_prev, self.regime_params
        )

        report = ledger.report()
        stage1, stage2, grand = coalition_decisions(self.policies, snap, report)
        decisions: Dict[int, AgentDecision] = {
            **dict(zip(STAGE1_MASKS, stage1)),
            **dict(zip(STAGE2_MASKS, stage2)),
            GRAND_MASK: grand,
        }

        state, game = ledger.state, ledger.game
        votes = [d.vote for d in stage1]
        kappa = consensus_kappa(state.omega, votes)
        multipliers = psi(self.regime_params.anchors, regime.score)
        omega_t = apply_multiplier(
            state.omega, multipliers, kappa, votes, self.regime_params.consensus_gain
        )
        v_s1, v_s2 = ensemble_values(omega_t, state.p, game)
        beta_s1, beta_gc = blend_ratios(v_s1, v_s2, game.grand, self.blend)
        beta_final = divergence_discount(beta_gc, kappa)

        composed = compose_council(
            [d.portfolio for d in stage1],
            [d.portfolio for d in stage2],
            grand.portfolio,
            omega_t,
            state.p,
            beta_s1,
            beta_final,
        )
        if self.previous is None:
            smoothed = composed
        else:
            smoothed = ema_smooth(
                composed, self.previous, self.blend.ema_build, self.blend.ema_derisk
            )
        council = project_constraints(smoothed.weights, smoothed.cash, w_max, c_max)
        drawdown = self.tracker.drawdown
        final, steps = run_cascade(
            council, snap, regime, drawdown, self.roles, self.overlay_cfg, w_max, c_max
        )

        realized = coalition_returns = None
        close = self.prices.close
        if t + 1 < len(close):
            r_next = close[t + 1] / close[t] - 1
            traded = turnover(final, self.held, self.held_cash)
            gross = float(final.weights @ r_next)
            cost = self.bps * 1e-4 * traded
            realized = {
                "gross": gross,
                "turnover": traded,
                "cost": cost,
                "net": gross - cost,
                "drawdown": drawdown,
            }
            self.held, self.held_cash = drift(final.weights, final.cash, r_next)
            self.tracker.update(gross - cost)
            coalition_returns = {
                mask: float(d.portfolio.weights @ r_next)
                for mask, d in decisions.items()
            }
        else:
            logger.info(
                f"{snap.date:%Y-%m-%d}: no next-period prices, nothing realised"
            )

        assets = self.prices.assets
        record = TraceRecord(
            period=t,
            date=f"{snap.date:%Y-%m-%d}",
            signals=snap.signals(),
            coalitions={
                label(mask): decisions[mask].as_dict()
                for mask in canonical_order(ledger.n)
            },
            credit={
                "t": ledger.t,
                "values": game.as_dict(),
                "phi": ledger.credit.phi,
                "omega": state.omega,
                "omega_tilde": omega_t,
                "p": state.p,
                "alpha": state.alpha,
                "wta_active": state.wta_active,
                "dominant": None if state.dominant is None else AGENTS[state.dominant],
                "sharpes": ledger.sharpes,
                "multipliers": multipliers,
            },
            blend={
                "xi": regime.score,
                "xi_prev": regime.previous,
                "regime": str(regime.label),
                "attenuated": regime.attenuated,
                "votes": [str(v) for v in votes],
                "kappa": kappa,
                "amplification": amplification(
                    kappa, ledger.n, self.regime_params.consensus_gain
                ),
                "v_s1": v_s1,
                "v_s2": v_s2,
                "v_grand": game.grand,
                "beta_s1": beta_s1,
                "beta_gc": beta_gc,
                "beta_gc_final": beta_final,
                "composed": composed.as_dict(),
                "council": council.as_dict(),
            },
            overlays={
                "steps": steps.as_records(),
                "final": final.as_dict(),
                "realized": realized,
            },
        )
        if coalition_returns is not None:
            ledger.update(coalition_returns)
        self.previous = final
        self.xi_prev = regime.score
        return PeriodResult(t, final, record, regime, realized, coalition_returns)

    def periods(self, start: _date_t = None, end: _date_t = None) -> np.ndarray:
        dates = self.prices.dates
        mask = np.ones(len(dates), dtype=bool)
        if start is not None:
            mask &= dates >= pd.Timestamp(start)
        if end is not None:
            mask &= dates <= pd.Timestamp(end)
        idx = np.flatnonzero(mask)
        if idx.size == 0:
            raise ValueError(f"{start}..{end}: empty date range")
        return idx

    def run(
        self, start: _date_t = None, end: _date_t = None, progress: bool = False
    ) -> "BacktestResult":
        """Iterate `step` over the decision periods between `start` and `end`"""
        idx = self.periods(start, end)
        logger.info(
            f"{len(idx)} decision periods, {self.prices.dates[idx[0]]:%Y-%m-%d}"
            f"..{self.prices.dates[idx[-1]]:%Y-%m-%d}, {len(self.prices.assets)} assets"
        )
        periods = tqdm(idx, desc="periods", disable=not progress)
        results = [self.step(int(t)) for t in periods]
        return BacktestResult.from_periods(results, self.prices, self.conf)


def run(
    prices: PriceTable,
    features: Optional[FeatureTable] = None,
    conf: Optional[RunConfig] = None,
    start: _date_t = None,
    end: _date_t = None,
    progress: bool = False,
) -> "BacktestResult":
    return CouncilBacktest(prices, features, conf).run(start, end, progress)


@dataclass
class BacktestResult:
    """Executed path, coalition returns, benchmarks, and the trace of a run"""

    assets: Tuple[str, ...]
    equity: pd.DataFrame
    coalitions: pd.DataFrame
    benchmarks: pd.DataFrame
    records: List[TraceRecord]
    conf: RunConfig
    trace_path: Optional[Path] = field(default=None)

    @classmethod
    def from_periods(
        cls, results: Sequence[PeriodResult], prices: PriceTable, conf: RunConfig
    ) -> "BacktestResult":
        assets = prices.assets
        dates = prices.dates[[res.t for res in results]]
        weights = pd.DataFrame(
            [res.portfolio.weights for res in results], index=dates, columns=assets
        )
        realized = pd.DataFrame(
            [res.realized or {} for res in results],
            index=dates,
            columns=["gross", "net", "turnover", "cost"],
        ).astype(float)
        equity = (1 + realized["net"].fillna(0)).cumprod()
        equity_tbl = pd.concat(
            [
                weights,
                pd.DataFrame(
                    {
                        "cash": [res.portfolio.cash for res in results],
                        "xi": [res.regime.score for res in results],
                        "regime": [str(res.regime.label) for res in results],
                    },
                    index=dates,
                ),
                realized,
                pd.DataFrame(
                    {
                        "equity": equity,
                        "drawdown": 1 - equity / equity.cummax().clip(lower=1.0),
                    },
                    index=dates,
                ),
            ],
            axis=1,
        )
        equity_tbl.index.name = "date"

        done = [res for res in results if res.coalition_returns is not None]
        done_dates = prices.dates[[res.t for res in done]]
        coalitions = pd.DataFrame(
            [
                {f"v{label(m)}": r for m, r in res.coalition_returns.items()}
                for res in done
            ],
            index=done_dates,
            columns=[f"v{label(m)}" for m in canonical_order(len(AGENTS))],
        )
        benchmarks = market_benchmarks(
            prices, [res.t for res in done], conf["roles.benchmarks"]
        )
        records = [res.record for res in results]
        return cls(assets, equity_tbl, coalitions, benchmarks, records, conf)

    @property
    def returns(self) -> pd.Series:
        """Realised net returns"""
        return self.equity["net"].dropna()

    @property
    def weights(self) -> pd.DataFrame:
        return self.equity.loc[:, list(self.assets)]

    @property
    def cash(self) -> pd.Series:
        return self.equity["cash"]

    @property
    def burnin(self) -> int:
        return burnin_days(self.conf["burnin_alpha"], self.conf["lambda"])

    def metrics(self, skip: int = 0) -> Metrics:
        """Metrics of the executed path, IR against the EW basket"""
        rets = self.returns.to_numpy()[skip:]
        ew = self.benchmarks["EW"].to_numpy()[skip:]
        return metrics(rets, ew, self.conf["annualization"])

    def coalition_metrics(self) -> Dict[str, Metrics]:
        ew = self.benchmarks["EW"].to_numpy()
        return {
            col: metrics(
                self.coalitions[col].to_numpy(), ew, self.conf["annualization"]
            )
            for col in self.coalitions
        }

    def benchmark_metrics(self) -> Dict[str, Metrics]:
        ew = self.benchmarks["EW"].to_numpy()
        return {
            col: metrics(
                self.benchmarks[col].to_numpy(), ew, self.conf["annualization"]
            )
            for col in self.benchmarks
        }

    def digest(self) -> str:
        """sha256 of the equity curve, 12 significant digits per value"""
        text = ",".join(f"{v:.12e}" for v in self.equity["equity"])
        return hashlib.sha256(text.encode()).hexdigest()

    def cash_by_regime(self) -> Dict[str, float]:
        cash = self.equity.groupby("regime")["cash"].mean()
        return {str(k): float(v) for k, v in cash.items()}

    def regime_metrics(self) -> Dict[str, Dict]:
        """Metrics and mean cash over the realised periods of each regime

        A regime's returns are chained in date order even when its periods are
        not contiguous.

        """
        done = self.equity.loc[self.returns.index]
        ew = self.benchmarks["EW"].reindex(done.index)
        res = {}
        for regime, rows in done.groupby("regime", sort=False):
            m = metrics(
                rows["net"].to_numpy(),
                ew.loc[rows.index].to_numpy(),
                self.conf["annualization"],
            )
            res[str(regime)] = {**m.as_dict(), "cash": float(rows["cash"].mean())}
        return res

    def summary(self) -> Dict:
        """Structured result summary; raises when nothing was realised"""
        if self.returns.empty:
            raise ValueError("backtest: no realised returns to summarise")
        res = {
            "assets": list(self.assets),
            "periods": {
                "decisions": len(self.equity),
                "realized": len(self.returns),
                "first": f"{self.equity.index[0]:%Y-%m-%d}",
                "last": f"{self.equity.index[-1]:%Y-%m-%d}",
            },
            "bps": self.conf["bps"],
            "seed": self.conf["seed"],
            "metrics": self.metrics().as_dict(),
            "benchmarks": {k: v.as_dict() for k, v in self.benchmark_metrics().items()},
            "coalitions": {k: v.as_dict() for k, v in self.coalition_metrics().items()},
            "cash_by_regime": self.cash_by_regime(),
            "regimes": self.regime_metrics(),
        }
        skip = self.burnin
        if 0 < skip < len(self.returns):
            res["burnin"] = {
                "alpha": self.conf["burnin_alpha"],
                "days": skip,
                "metrics": self.metrics(skip).as_dict(),
            }
        return res


def market_benchmarks(
    prices: PriceTable, periods: Sequence[int], names: Sequence[str]
) -> pd.DataFrame:
    """Next-period returns of the daily rebalanced EW basket and single assets"""
    close = prices.close
    periods = np.asarray(periods, dtype=int)
    if periods.size:
        r_next = close[periods + 1] / close[periods] - 1
    else:
        r_next = np.empty((0, close.shape[1]))
    res = {"EW": r_next.mean(axis=1)}
    for name in names:
        if name in prices.assets:
            res[name] = r_next[:, prices.assets.index(name)]
        else:
            logger.warning(f"benchmark {name}: not in the asset universe")
    return pd.DataFrame(res, index=prices.dates[periods])
