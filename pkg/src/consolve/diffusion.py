"""Discrete multinomial noising over binary decision entries.

Each entry flips independently under the 2x2 doubly stochastic transition

    Q_t = [[beta_t, 1 - beta_t], [1 - beta_t, beta_t]],

whose t-step product stays in the same family with stay-probability
beta_bar_t = (1 + prod_{s<=t}(2 beta_s - 1)) / 2. That closed form gives the
exact marginal q(x_t | x_0) in O(1) per entry, and beta_bar -> 1/2 means the
terminal distribution is uniform over states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .state import BernoulliField, DecisionState, num_entries


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step stay probabilities beta and cumulative beta_bar, 1-indexed
    by noise step t in [1, T] (stored at index t-1)."""

    T: int
    beta: np.ndarray
    beta_bar: np.ndarray

    def __post_init__(self):
        beta = np.ascontiguousarray(self.beta, dtype=np.float64)
        bbar = np.ascontiguousarray(self.beta_bar, dtype=np.float64)
        if self.T < 1:
            raise ContractError(f"T must be >= 1, got {self.T}")
        if beta.shape != (self.T,) or bbar.shape != (self.T,):
            raise ContractError("beta and beta_bar must have shape (T,)")
        if beta.min() < 0.5 or beta.max() > 1.0:
            raise ContractError("stay probabilities must lie in [0.5, 1]")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "beta_bar", bbar)

    def stay(self, t: int) -> float:
        """beta_t for t in [1, T]."""
        self._check_t(t)
        return float(self.beta[t - 1])

    def stay_bar(self, t: int) -> float:
        """beta_bar_t for t in [1, T]."""
        self._check_t(t)
        return float(self.beta_bar[t - 1])

    def _check_t(self, t: int) -> None:
        if not 1 <= t <= self.T:
            raise ContractError(f"t={t} outside [1, {self.T}]")


def _beta_bar_from_beta(beta: np.ndarray) -> np.ndarray:
    return (1.0 + np.cumprod(2.0 * beta - 1.0)) / 2.0


def _terminal_beta_bar(T: int, beta_start: float, beta_end: float) -> float:
    beta = np.linspace(beta_start, beta_end, T) if T > 1 else np.array([beta_end])
    return float(_beta_bar_from_beta(beta)[-1])


def make_schedule(T: int, beta_start: float = 0.9999, beta_end: float | None = None) -> NoiseSchedule:
    """Linear stay-probability schedule from beta_start down to beta_end.

    When beta_end is omitted it is solved by bisection so the terminal
    marginal is (near-)uniform: beta_bar_T = 0.5005 regardless of T. Explicit
    values must satisfy 0.5 <= beta_end <= beta_start <= 1.
    """
    if T < 1:
        raise ContractError(f"T must be >= 1, got {T}")
    if not 0.5 <= beta_start <= 1.0:
        raise ContractError(f"beta_start={beta_start} outside [0.5, 1]")
    if beta_end is None:
        target = 0.5005
        lo, hi = 0.5, beta_start
        if _terminal_beta_bar(T, beta_start, hi) <= target:
            beta_end = hi
        else:
            for _ in range(200):
                mid = (lo + hi) / 2.0
                if _terminal_beta_bar(T, beta_start, mid) > target:
                    hi = mid
                else:
                    lo = mid
            beta_end = (lo + hi) / 2.0
    if not 0.5 <= beta_end <= beta_start:
        raise ContractError(f"need 0.5 <= beta_end <= beta_start, got {beta_end}")
    beta = np.linspace(beta_start, beta_end, T) if T > 1 else np.array([float(beta_end)])
    return NoiseSchedule(T=T, beta=beta, beta_bar=_beta_bar_from_beta(beta))


def qbar_matrix(sched: NoiseSchedule, t: int) -> np.ndarray:
    """Cumulative 2x2 transition via the closed form."""
    b = sched.stay_bar(t)
    return np.array([[b, 1.0 - b], [1.0 - b, b]])


def qbar_matrix_explicit(sched: NoiseSchedule, t: int) -> np.ndarray:
    """Cumulative 2x2 transition by explicit matrix product (cross-check)."""
    sched._check_t(t)
    out = np.eye(2)
    for s in range(1, t + 1):
        b = sched.stay(s)
        out = out @ np.array([[b, 1.0 - b], [1.0 - b, b]])
    return out


def noise_marginal(x0: DecisionState, t: int, sched: NoiseSchedule) -> BernoulliField:
    """Exact marginal q(x_t | x_0): selected entries keep probability
    beta_bar_t of staying selected, unselected keep it of staying out."""
    b = sched.stay_bar(t)
    sel = x0.selected.astype(np.float64)
    p_sel = sel * b + (1.0 - sel) * (1.0 - b)
    return BernoulliField.from_selected(x0.kind, x0.n, p_sel)


def noise_step(x: DecisionState, t: int, sched: NoiseSchedule, rng: np.random.Generator) -> DecisionState:
    """Apply the single-step transition Q_t (flip with probability 1-beta_t)."""
    b = sched.stay(t)
    flip = rng.random(x.selected.shape) >= b
    return DecisionState(x.kind, x.n, np.where(flip, 1 - x.selected, x.selected))


def sample_state(field: BernoulliField, rng: np.random.Generator) -> DecisionState:
    """Draw a hard state from per-entry inclusion probabilities."""
    sel = (rng.random(field.selected.shape) < field.selected).astype(np.uint8)
    return DecisionState(field.kind, field.n, sel)


def renoise(x0: DecisionState, t: int, sched: NoiseSchedule, rng: np.random.Generator) -> DecisionState:
    """Draw x_t ~ q(x_t | x_0) in one shot via the closed-form marginal."""
    return sample_state(noise_marginal(x0, t, sched), rng)


def uniform_prior(kind: str, n: int, rng: np.random.Generator) -> DecisionState:
    """Stationary-distribution sample: each entry included w.p. 1/2."""
    N = num_entries(kind, n)
    return DecisionState(kind, n, (rng.random(N) < 0.5).astype(np.uint8))
