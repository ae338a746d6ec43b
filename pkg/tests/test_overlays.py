import numpy as np
import pandas as pd
import pytest

from shapcouncil.config import RunConfig
from shapcouncil.council import PortfolioVector
from shapcouncil.market import MarketSnapshot
from shapcouncil.overlays import (
    AssetRoles,
    OverlayConfig,
    bear_onchain_tilt,
    btc_floor,
    cash_target,
    dominance_overlay,
    dominance_signal,
    drawdown_cash_cap,
    drawdown_protect,
    drawdown_scale,
    momentum_overlay,
    onchain_tilt_size,
    run_cascade,
    tilt_strength,
    transition_buffer,
    transition_scale,
    volatile_cash_target,
)
from shapcouncil.regime import Regime, RegimeState

ASSETS = ("BTC", "ETH", "ADA", "TRX", "ZEC")
BULL, VOLATILE, BEAR = Regime.BULL, Regime.VOLATILE, Regime.BEAR


@pytest.fixture
def roles():
    return AssetRoles.resolve(ASSETS, RunConfig.from_layers().subset("roles"))


def _snap(z=None, spread=0.0, delta_oc=None):
    k = len(ASSETS)
    zeros = np.zeros(k)
    return MarketSnapshot(
        t=40,
        date=pd.Timestamp("2024-01-01"),
        assets=ASSETS,
        partial=False,
        ret_1d=zeros,
        ret_7d=zeros,
        ret_30d=zeros,
        logret_1d=zeros,
        logret_7d=zeros,
        logret_30d=zeros,
        vol_30d=np.full(k, 0.02),
        z_30d=zeros if z is None else np.asarray(z, dtype=float),
        r_30d=0.0,
        sigma_30d=0.02,
        r_7d=0.0,
        btc_ew_spread=spread,
        delta_oc=delta_oc,
    )


def _state(xi, previous=None):
    lbl = BULL if xi > 0.3 else BEAR if xi < -0.3 else VOLATILE
    return RegimeState(score=xi, label=lbl, previous=previous)


def test_roles_resolve(roles):
    assert roles.btc == 0
    assert roles.alts.tolist() == [1, 2, 3, 4]
    assert roles.donors.tolist() == [1, 2]
    assert roles.recipients.tolist() == [0, 3, 4]
    assert roles.shares.tolist() == pytest.approx([0.6, 0.25, 0.15])


def test_roles_partial_universe():
    roles = AssetRoles.resolve(("ETH", "TRX"), RunConfig.from_layers().subset("roles"))
    assert roles.btc is None
    assert roles.shares.tolist() == pytest.approx([1.0])


def test_momentum():
    w = np.array([0.2, 0.2, 0.2, 0.2, 0.1])
    assert momentum_overlay(w, np.zeros(5), 0.5).tolist() == w.tolist()
    assert tilt_strength(-0.2) == pytest.approx(0.08)
    tilted = momentum_overlay(w, [1.5, 0, 0, 0, 0], 1.0)
    assert tilted[0] / w[0] == pytest.approx(1 + 0.43 * np.tanh(1), abs=1e-5)
    assert tilted[0] / w[0] == pytest.approx(1.32752, abs=1e-5)


def test_dominance_signal():
    assert dominance_signal(0.0) == 0.0
    assert dominance_signal(0.15) == pytest.approx(0.76159, abs=1e-5)


def test_dominance_btc_season(roles):
    w = np.array([0.1, 0.3, 0.3, 0.1, 0.1])
    spread = 0.15 * np.arctanh(0.5)
    res, c = dominance_overlay(w, 0.1, spread, VOLATILE, roles)
    assert res[1:3].sum() == pytest.approx(0.6 - 0.225)
    assert res[[0, 3, 4]].tolist() == pytest.approx([0.235, 0.15625, 0.13375])
    assert c == pytest.approx(0.1)
    # bull keeps BTC season off
    assert dominance_overlay(w, 0.1, spread, BULL, roles)[0].tolist() == w.tolist()


def test_dominance_recipient_cap(roles):
    w = np.array([0.28, 0.3, 0.3, 0.02, 0.0])
    res, c = dominance_overlay(w, 0.1, 1.0, BEAR, roles)
    assert res[0] == pytest.approx(0.3)
    assert res.max() <= 0.3 + 1e-12
    assert res.sum() + c == pytest.approx(w.sum() + 0.1)


def test_dominance_alt_season(roles):
    w = np.array([0.3, 0.2, 0.2, 0.1, 0.1])
    res, c = dominance_overlay(w, 0.1, -1.0, BULL, roles)
    assert res[0] < 0.3 and res[3] < 0.1
    assert res[1] > 0.2 and res[2] > 0.2
    assert res.sum() == pytest.approx(w.sum())
    assert c == 0.1


def test_btc_floor(roles):
    w = np.array([0.10, 0.3, 0.2, 0.2, 0.1])
    res, c = btc_floor(w, 0.1, VOLATILE, roles)
    assert res[0] == pytest.approx(0.18)
    assert w[1:].sum() - res[1:].sum() == pytest.approx(0.08)
    assert c == 0.1
    w = np.array([0.25, 0.3, 0.2, 0.1, 0.05])
    assert btc_floor(w, 0.1, VOLATILE, roles)[0].tolist() == w.tolist()
    w = np.array([0.10, 0.3, 0.2, 0.2, 0.1])
    assert btc_floor(w, 0.1, BULL, roles)[0].tolist() == w.tolist()


def test_btc_floor_from_cash(roles):
    w = np.array([0.1, 0.03, 0.02, 0.0, 0.0])
    res, c = btc_floor(w, 0.85, VOLATILE, roles)
    assert res[0] == pytest.approx(0.18)
    assert res[1:].sum() == pytest.approx(0.0)
    assert c == pytest.approx(0.82)


def test_bear_onchain_tilt(roles):
    assert onchain_tilt_size(1.5) == pytest.approx(0.06093, abs=1e-5)
    w = np.array([0.1, 0.3, 0.2, 0.2, 0.1])
    res = bear_onchain_tilt(w, 1.5, BEAR, roles)
    assert res[0] == pytest.approx(0.1 + 0.08 * np.tanh(1))
    assert res.sum() == pytest.approx(w.sum())
    assert bear_onchain_tilt(w, 0.05, BEAR, roles).tolist() == w.tolist()
    assert bear_onchain_tilt(w, None, BEAR, roles).tolist() == w.tolist()
    assert bear_onchain_tilt(w, 1.5, VOLATILE, roles).tolist() == w.tolist()


def test_cash_target():
    assert cash_target(0.0) == pytest.approx(0.25)
    assert cash_target(0.30) == pytest.approx(0.0940, abs=1e-4)
    w = np.array([0.2, 0.2, 0.2, 0.15, 0.1])
    res, c = volatile_cash_target(w, 0.15, 0.0, VOLATILE)
    assert c == pytest.approx(0.25)
    assert res.sum() + c == pytest.approx(1)
    res, c = volatile_cash_target(w, 0.15, 0.6, BULL)
    assert c == pytest.approx(0.08)
    assert res.sum() - w.sum() == pytest.approx(0.07)
    assert res / res.sum() == pytest.approx(w / w.sum())
    assert volatile_cash_target(w, 0.15, -0.6, BEAR)[1] == 0.15


def test_transition():
    assert transition_scale(0.0) == 1.0
    assert transition_scale(-0.5) == 1.0
    assert transition_scale(0.05) == pytest.approx(0.9309, abs=1e-4)
    assert transition_scale(0.60) == pytest.approx(0.6557, abs=1e-4)
    w = np.array([0.2, 0.2, 0.2, 0.2, 0.1])
    assert transition_buffer(w, 0.1, None, 0.2)[0] is w
    res, c = transition_buffer(w, 0.1, 0.65, 0.05)
    assert res.tolist() == pytest.approx((w * transition_scale(0.6)).tolist())
    assert res.sum() + c == pytest.approx(1)


def test_drawdown():
    assert drawdown_scale(0.15, -1.0) == pytest.approx(0.6953, abs=1e-4)
    assert drawdown_scale(0.15, 0.5) == 1.0
    assert drawdown_cash_cap(-1.0) == pytest.approx(0.30)
    w = np.array([0.2, 0.2, 0.2, 0.2, 0.1])
    assert drawdown_protect(w, 0.1, 0.3, 0.2)[0] is w
    res, c = drawdown_protect(w, 0.1, 0.15, -1.0)
    assert c <= 0.30 + 1e-12
    assert c > 0.1
    assert res.sum() + c == pytest.approx(1)
    with pytest.raises(ValueError, match="drawdown"):
        drawdown_protect(w, 0.1, 1.0, -0.5)


def test_drawdown_clips_incoming_cash():
    w = np.array([0.35, 0.35])
    res, c = drawdown_protect(w, 0.30, 0.0, -0.35)
    assert c == pytest.approx(0.157)
    assert res.tolist() == pytest.approx([0.4215, 0.4215])


def test_drawdown_cash_never_above_cap():
    rng = np.random.default_rng(3)
    for _ in range(200):
        c = rng.uniform(0, 0.6)
        w = rng.dirichlet(np.ones(5)) * (1 - c)
        dd, xi = rng.uniform(0, 0.5), rng.uniform(-1, -1e-3)
        res, cash = drawdown_protect(w, c, dd, xi)
        assert cash <= drawdown_cash_cap(xi) + 1e-12
        assert res.sum() + cash == pytest.approx(1)
        assert (res >= 0).all()


def test_config_validation():
    with pytest.raises(ValueError, match="bandwidth"):
        OverlayConfig(dd_tau=0.0)
    with pytest.raises(ValueError, match="coefficient"):
        OverlayConfig(btc_floor=1.5)


def test_cascade_neutral(roles):
    pf = PortfolioVector([0.25, 0.2, 0.2, 0.2, 0.1], 0.05)
    final, trace = run_cascade(pf, _snap(), _state(0.6, previous=0.6), 0.0, roles)
    assert final.allclose(pf)
    assert [step.name for step in trace] == [
        "momentum",
        "dominance",
        "btc_floor",
        "bear_onchain_tilt",
        "cash_target",
        "transition_buffer",
        "drawdown",
        "projection",
    ]
    assert not any(step.active for step in trace[:-1])
    assert trace.is_chained()


def test_cascade_deep_bear(roles):
    pf = PortfolioVector([0.2, 0.2, 0.2, 0.2, 0.1], 0.1)
    final, trace = run_cascade(pf, _snap(), _state(-0.8, previous=-0.8), 0.2, roles)
    assert final.cash > pf.cash
    assert final.is_feasible(0.4, 0.3)
    steps = {step.name: step for step in trace}
    assert steps["drawdown"].active
    assert steps["drawdown"].signals["gate"] == pytest.approx(0.8)


def test_cascade_chain(roles):
    rng = np.random.default_rng(9)
    pf = PortfolioVector([0.3, 0.1, 0.2, 0.15, 0.1], 0.15)
    snap = _snap(z=rng.normal(size=5), spread=0.05, delta_oc=0.8)
    for xi, prev, dd in ((0.1, 0.5, 0.05), (-0.5, -0.2, 0.1), (0.7, 0.2, 0.0)):
        final, trace = run_cascade(pf, snap, _state(xi, prev), dd, roles)
        assert trace.is_chained()
        assert trace[0].pre.allclose(pf, atol=0)
        assert trace[-1].post.allclose(final, atol=0)
        assert final.is_feasible(0.4, 0.3)
        records = trace.as_records(ASSETS)
        assert records[0]["pre"]["weights"]["BTC"] == pytest.approx(0.3)


@pytest.mark.parametrize(
    "fn, points",
    [
        (tilt_strength, [-0.5, 0.0, 0.4, 0.9]),
        (dominance_signal, [-0.3, -0.01, 0.0, 0.02, 0.4]),
        (onchain_tilt_size, [-2.0, 0.0, 0.5, 3.0]),
        (cash_target, [-0.6, -0.05, 0.0, 0.1, 0.8]),
        (transition_scale, [-0.1, 0.0, 0.05, 0.6]),
        (drawdown_cash_cap, [-1.0, -0.3, 0.0, 0.5]),
        (lambda dd: drawdown_scale(dd, -0.7), [0.0, 0.05, 0.3, 0.9]),
        (lambda xi: drawdown_scale(0.2, xi), [-1.0, -0.4, 0.0, 0.3]),
    ],
)
def test_overlay_signal_lipschitz(fn, points):
    cfg, eps = OverlayConfig(), 1e-6
    slope = 1 / cfg.dominance_tau
    for x in points:
        assert abs(fn(x + eps) - fn(x)) <= slope * eps * (1 + 1e-6)


def test_cascade_lipschitz(roles):
    rng = np.random.default_rng(12)
    pf = PortfolioVector([0.3, 0.1, 0.2, 0.15, 0.1], 0.15)
    z = rng.normal(size=5)
    eps, bound = 1e-6, 50.0
    for xi, prev, dd in ((0.1, 0.5, 0.05), (-0.5, -0.2, 0.1), (0.7, 0.2, 0.0)):
        base, _ = run_cascade(pf, _snap(z, 0.05, 0.8), _state(xi, prev), dd, roles)
        nudged = [
            run_cascade(pf, _snap(z + eps, 0.05, 0.8), _state(xi, prev), dd, roles),
            run_cascade(pf, _snap(z, 0.05 + eps, 0.8), _state(xi, prev), dd, roles),
            run_cascade(pf, _snap(z, 0.05, 0.8 + eps), _state(xi, prev), dd, roles),
            run_cascade(pf, _snap(z, 0.05, 0.8), _state(xi + eps, prev), dd, roles),
            run_cascade(pf, _snap(z, 0.05, 0.8), _state(xi, prev + eps), dd, roles),
            run_cascade(pf, _snap(z, 0.05, 0.8), _state(xi, prev), dd + eps, roles),
        ]
        for final, _ in nudged:
            gap = np.abs(final.as_array() - base.as_array()).max()
            assert gap <= bound * eps


def test_drawdown_scale_nonincreasing():
    dds = np.linspace(0, 0.99, 200)
    for xi in (-1.0, -0.5, -0.05, 0.0, 0.4):
        scales = np.array([drawdown_scale(dd, xi) for dd in dds])
        assert (np.diff(scales) <= 1e-15).all()
        assert (scales > 0).all()


def test_transition_scale_nonincreasing():
    drops = np.linspace(-0.5, 2.0, 300)
    scales = np.array([transition_scale(drop) for drop in drops])
    assert (np.diff(scales) <= 1e-15).all()
    assert scales[0] == 1.0
    assert scales[-1] >= 1 - OverlayConfig().transition_depth
