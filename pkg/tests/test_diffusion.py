"""Two-state noise schedule: stationarity, composition, and sampling laws."""
import numpy as np
import pytest
from scipy import stats

from consolve import rng as rngmod
from consolve.diffusion import (
    NoiseSchedule,
    make_schedule,
    noise_marginal,
    noise_step,
    qbar_matrix,
    qbar_matrix_explicit,
    renoise,
    sample_state,
    uniform_prior,
)
from consolve.errors import ContractError
from consolve.state import BernoulliField, DecisionState


def test_terminal_beta_bar_frozen():
    # bisection pins the cumulative stay probability at the horizon to 0.5005
    for T in (64, 250, 1000):
        sched = make_schedule(T)
        assert sched.stay_bar(T) == pytest.approx(0.5005, abs=1e-9)
        assert sched.stay(1) == pytest.approx(0.9999)


def test_schedule_monotone():
    sched = make_schedule(1000)
    bbar = [sched.stay_bar(t) for t in range(1, 1001)]
    assert all(b1 > b2 for b1, b2 in zip(bbar, bbar[1:]))  # strictly decaying
    beta = [sched.stay(t) for t in range(1, 1001)]
    assert all(b1 >= b2 for b1, b2 in zip(beta, beta[1:]))  # linear decay
    assert min(beta) >= 0.5


def test_schedule_explicit_beta_end():
    sched = make_schedule(100, beta_start=0.999, beta_end=0.95)
    assert sched.stay(1) == pytest.approx(0.999)
    assert sched.stay(100) == pytest.approx(0.95)


def test_schedule_validation():
    with pytest.raises(ContractError):
        make_schedule(0)
    with pytest.raises(ContractError):
        NoiseSchedule(3, np.array([0.9, 0.9, 0.2]), np.array([0.9, 0.8, 0.7]))


def test_qbar_matches_explicit_product():
    sched = make_schedule(200)
    for t in (1, 7, 100, 200):
        assert np.allclose(qbar_matrix(sched, t), qbar_matrix_explicit(sched, t), atol=1e-12)


def test_qbar_doubly_stochastic():
    sched = make_schedule(1000)
    for t in range(1, 1001):
        q = qbar_matrix(sched, t)
        assert np.abs(q.sum(axis=0) - 1.0).max() < 1e-6
        assert np.abs(q.sum(axis=1) - 1.0).max() < 1e-6


def test_marginal_of_clean_state():
    sched = make_schedule(64)
    x0 = DecisionState("mis", 4, np.array([1, 0, 1, 0], dtype=np.uint8))
    m = noise_marginal(x0, 10, sched)
    b = sched.stay_bar(10)
    assert np.allclose(m.selected, [b, 1 - b, b, 1 - b])


def test_step_composition_matches_marginal_chi2():
    # walk the per-step kernel and compare endpoint frequencies to the
    # closed-form marginal at three noise levels
    T = 64
    sched = make_schedule(T)
    n = 4000
    x0 = DecisionState("mis", n, np.ones(n, dtype=np.uint8))
    for t in (1, T // 2, T):
        g = rngmod.stream(123, rngmod.VERIFY, t)
        x = x0
        for s in range(1, t + 1):
            x = noise_step(x, s, sched, g)
        stay = sched.stay_bar(t)
        observed = np.array([x.selected.sum(), n - x.selected.sum()], dtype=np.float64)
        expected = np.array([stay * n, (1 - stay) * n])
        chi2 = ((observed - expected) ** 2 / expected).sum()
        p = stats.chi2.sf(chi2, df=1)
        assert p > 0.01, f"t={t}: chi2={chi2:.2f} p={p:.4f}"


def test_renoise_matches_marginal_chi2():
    T = 64
    sched = make_schedule(T)
    n = 4000
    x0 = DecisionState("mis", n, np.zeros(n, dtype=np.uint8))
    t = 20
    g = rngmod.stream(7, rngmod.VERIFY, 99)
    x = renoise(x0, t, sched, g)
    flip = 1 - sched.stay_bar(t)
    observed = np.array([x.selected.sum(), n - x.selected.sum()], dtype=np.float64)
    expected = np.array([flip * n, (1 - flip) * n])
    chi2 = ((observed - expected) ** 2 / expected).sum()
    assert stats.chi2.sf(chi2, df=1) > 0.01


def test_sample_state_extremes():
    g = rngmod.stream(1, rngmod.VERIFY, 0)
    f = BernoulliField.from_selected("mis", 4, np.array([0.0, 1.0, 0.0, 1.0]))
    x = sample_state(f, g)
    assert np.array_equal(x.selected, [0, 1, 0, 1])


def test_uniform_prior_is_fair():
    g = rngmod.stream(5, rngmod.VERIFY, 1)
    n = 10000
    x = uniform_prior("mis", n, g)
    assert abs(x.selected.mean() - 0.5) < 0.02
    assert x.kind == "mis"


def test_schedule_t_bounds_checked():
    sched = make_schedule(10)
    with pytest.raises(ContractError):
        sched.stay(0)
    with pytest.raises(ContractError):
        sched.stay_bar(11)
