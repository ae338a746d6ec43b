import numpy as np
import pytest

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
from shapcouncil.shapley import CharacteristicGame


def test_portfolio_vector():
    pf = PortfolioVector.equal_weight(4, cash=0.2)
    assert pf.weights.tolist() == pytest.approx([0.2] * 4)
    assert pf.total == pytest.approx(1)
    assert pf.is_feasible(0.4, 0.3)
    assert not PortfolioVector([0.5, 0.5], 0.0).is_feasible(0.4, 0.3)
    assert PortfolioVector.all_cash(3).as_dict(["A", "B", "C"]) == {
        "weights": {"A": 0.0, "B": 0.0, "C": 0.0},
        "cash": 1.0,
    }
    with pytest.raises(ValueError):
        pf.weights[0] = 1.0


def test_ensemble_values():
    game = CharacteristicGame.from_sequence([0.7, 0.7, 0.7, 1, 2, 3, 0])
    v_s1, v_s2 = ensemble_values([0.2, 0.5, 0.3], [1 / 3] * 3, game)
    assert v_s1 == pytest.approx(0.7)
    assert v_s2 == pytest.approx(2.0)


def test_blend_center():
    beta_s1, beta_gc = blend_ratios(0.4, 0.4, 0.4)
    assert beta_s1 == pytest.approx(0.90)
    assert beta_gc == pytest.approx(0.15)


def test_blend_limits():
    assert blend_ratios(0.0, 1e6, 0.0)[0] == pytest.approx(0.81)
    assert blend_ratios(0.0, -1e6, 0.0)[0] == pytest.approx(0.99)
    assert blend_ratios(0.0, 0.0, 1e6)[1] == pytest.approx(0.35)
    assert blend_ratios(0.0, 0.0, -1e6)[1] == 0.0


def test_blend_config():
    conf = BlendConfig(beta_s1_tau=0.15)
    assert blend_ratios(0.0, 0.075, 0.0, conf)[0] > blend_ratios(0.0, 0.075, 0.0)[0]
    with pytest.raises(ValueError):
        BlendConfig(beta_s1_center=0.95)
    with pytest.raises(ValueError):
        BlendConfig(ema_build=0.0)


@pytest.mark.parametrize("kappa, expected", [(1.0, 0.15), (1 / 3, 0.1), (0.5, 0.1125)])
def test_divergence_discount(kappa, expected):
    assert divergence_discount(0.15, kappa) == pytest.approx(expected)
    assert divergence_discount(0.0, kappa) == 0.0


def test_blend_stays_in_range():
    rng = np.random.default_rng(11)
    values = rng.normal(0, 1, (500, 3)) * rng.choice([1e-3, 1.0, 1e3], (500, 1))
    for v_s1, v_s2, v_grand in values:
        beta_s1, beta_gc = blend_ratios(v_s1, v_s2, v_grand)
        assert 0.81 - 1e-12 <= beta_s1 <= 0.99 + 1e-12
        assert 0.0 <= beta_gc <= 0.35 + 1e-12


def test_blend_lipschitz():
    conf, eps = BlendConfig(), 1e-6
    for v_s1, v_s2, v_grand in ((0.1, 0.15, 0.2), (0.0, -0.05, 0.0), (1.0, 1.0, 0.95)):
        beta_s1, beta_gc = blend_ratios(v_s1, v_s2, v_grand)
        s1_slope = conf.beta_s1_scale / conf.beta_s1_tau
        assert abs(blend_ratios(v_s1, v_s2 + eps, v_grand)[0] - beta_s1) <= (
            s1_slope * eps * (1 + 1e-6)
        )
        gc_slope = conf.beta_gc_scale / conf.beta_gc_tau
        assert abs(blend_ratios(v_s1, v_s2, v_grand + eps)[1] - beta_gc) <= (
            gc_slope * eps * (1 + 1e-6)
        )


def test_divergence_discount_monotone():
    kappas = np.linspace(1 / 3, 1, 100)
    for beta_gc in (0.0, 0.05, 0.15, 0.35):
        discounted = [divergence_discount(beta_gc, kappa) for kappa in kappas]
        assert (np.diff(discounted) >= 0).all()
        assert discounted[-1] == pytest.approx(beta_gc)


def test_compose_toy():
    a = PortfolioVector([1.0, 0.0], 0.0)
    b = PortfolioVector([0.0, 1.0], 0.0)
    pf = compose_council(
        [a, b, b], [a, a, a], a, [0.5, 0.25, 0.25], [1 / 3] * 3, 1.0, 0.0
    )
    assert pf.weights.tolist() == pytest.approx([0.5, 0.5])
    assert pf.cash == pytest.approx(0.0)


def test_compose_fixed_point():
    pf = PortfolioVector([0.3, 0.3, 0.2], 0.2)
    res = compose_council(
        [pf] * 3, [pf] * 3, pf, [0.6, 0.3, 0.1], [0.2, 0.3, 0.5], 0.9, 0.15
    )
    assert res.allclose(pf)


def test_compose_convex_hull():
    rng = np.random.default_rng(3)
    pfs = [PortfolioVector.from_array(rng.dirichlet(np.ones(5))) for _ in range(7)]
    omega, p = rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(3))
    res = compose_council(pfs[:3], pfs[3:6], pfs[6], omega, p, 0.87, 0.12)
    stacked = np.array([pf.as_array() for pf in pfs])
    assert (res.as_array() >= stacked.min(axis=0) - 1e-12).all()
    assert (res.as_array() <= stacked.max(axis=0) + 1e-12).all()
    assert res.total == pytest.approx(1)


def test_compose_mismatch():
    pf = PortfolioVector.equal_weight(2)
    with pytest.raises(ValueError, match="counts differ"):
        compose_council([pf] * 2, [pf] * 3, pf, [1 / 3] * 3, [1 / 3] * 3, 0.9, 0.1)
    with pytest.raises(ValueError, match="asset count"):
        grand = PortfolioVector.equal_weight(3)
        compose_council([pf] * 3, [pf] * 3, grand, [1 / 3] * 3, [1 / 3] * 3, 0.9, 0.1)


def test_ema_fixed_point():
    pf = PortfolioVector([0.3, 0.4], 0.3)
    assert ema_smooth(pf, pf).allclose(pf)


def test_ema_asymmetric():
    target = PortfolioVector([0.2, 0.5], 0.3)
    previous = PortfolioVector([0.1, 0.6], 0.3)
    res = ema_smooth(target, previous)
    # pre-normalisation: 0.7 * 0.2 + 0.3 * 0.1 and 0.78 * 0.5 + 0.22 * 0.6
    raw = np.array([0.17, 0.522, 0.3])
    assert res.as_array().tolist() == pytest.approx((raw / raw.sum()).tolist())
    res = ema_smooth(previous, target)
    raw = np.array([0.122, 0.57, 0.3])
    assert res.as_array().tolist() == pytest.approx((raw / raw.sum()).tolist())


def test_projection_excess():
    pf = project_constraints([0.6, 0.2, 0.2], 0.0)
    assert pf.weights.tolist() == pytest.approx([0.4, 0.3, 0.3])
    assert pf.cash == 0.0


def test_projection_cash_cap():
    pf = project_constraints([0.2, 0.2, 0.1], 0.5)
    assert pf.cash == pytest.approx(0.3)
    assert pf.weights.tolist() == pytest.approx([0.28, 0.28, 0.14])


def test_projection_feasible_identity():
    pf = project_constraints([0.3, 0.3, 0.2], 0.2)
    assert pf.allclose(PortfolioVector([0.3, 0.3, 0.2], 0.2))


def test_projection_idempotent():
    rng = np.random.default_rng(5)
    for _ in range(50):
        arr = rng.dirichlet(np.full(6, 0.3))
        pf = project_constraints(arr[:-1], arr[-1])
        assert pf.is_feasible(0.4, 0.3)
        assert project_constraints(pf.weights, pf.cash).allclose(pf)


def test_projection_infeasible():
    with pytest.raises(ValueError, match="infeasible"):
        project_constraints([1.0], 0.0)
    with pytest.raises(ValueError, match="empty portfolio"):
        project_constraints([0.0, 0.0, 0.0], 0.0)
