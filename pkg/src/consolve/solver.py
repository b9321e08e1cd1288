"""Inference: few-step consistency sampling and objective-guided search.

Sampling starts from the uniform prior over decision states and asks the
trained network for the solution field directly; optional extra steps
renoise the current guess to intermediate levels and re-predict, trading
forward passes for quality.  The gradient search then refines a solution
by differentiating a guidance loss (self-consistency toward the incumbent
plus the soft objective) through the network with respect to the *input*
field, applying multiplicative exponential updates, and keeping the best
decoded solution it has seen.

Forward-pass accounting: every network application goes through
``Model.forward_batch``, so ``model.forward_calls`` certifies claims such
as "one sampling step costs exactly one forward pass".
"""

from __future__ import annotations

import math
import time
import zlib
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import autodiff as ad
from . import rng as rngmod
from .decoding import greedy_decode
from .diffusion import noise_marginal, renoise, sample_state, uniform_prior
from .errors import ContractError
from .instances import Instance
from .network import Model
from .objectives import DEFAULT_PENALTY_BETA, FeasibleSolution
from .state import BernoulliField, DecisionState, num_entries, solution_to_state

# Guidance weight defaults per problem kind: (consistency term, objective term).
DEFAULT_GUIDANCE_WEIGHTS = {"tsp": (50.0, 50.0), "mis": (2.0, 2.0)}

_PROB_FLOOR = 1e-6


@dataclass(frozen=True)
class SamplerConfig:
    """Few-step sampling settings.

    steps: number of network predictions (1 = direct single-shot solve).
    points: explicit intermediate renoise levels, strictly decreasing in
        [1, T-1]; derived from the sine schedule when None.
    seed: base seed for the solve-time random streams.
    """

    steps: int = 1
    points: Optional[Tuple[int, ...]] = None
    seed: int = 0

    def __post_init__(self):
        if self.steps < 1:
            raise ContractError(f"sampling steps must be >= 1, got {self.steps}")
        if self.points is not None:
            object.__setattr__(self, "points", tuple(int(p) for p in self.points))


@dataclass(frozen=True)
class SearchConfig:
    """Gradient-search settings.

    steps: refinement iterations (0 disables the search).
    alpha_noise: fraction of the horizon used as the rewrite noise level;
        the search perturbs the incumbent to step round(alpha_noise * T).
    consistency_weight / objective_weight: guidance weights for the
        self-consistency and soft-objective terms; kind-specific defaults
        (50/50 for tours, 2/2 for independent sets) apply when None.
    grad_lr: step size multiplying the gradient inside the exponential
        update (the plain update uses 1.0).
    penalty_beta: conflict penalty weight of the soft set objective.
    """

    steps: int = 0
    alpha_noise: float = 0.2
    consistency_weight: Optional[float] = None
    objective_weight: Optional[float] = None
    grad_lr: float = 1.0
    penalty_beta: float = DEFAULT_PENALTY_BETA

    def __post_init__(self):
        if self.steps < 0:
            raise ContractError(f"search steps must be >= 0, got {self.steps}")
        if not 0.0 < self.alpha_noise < 1.0:
            raise ContractError(f"alpha_noise must lie in (0, 1), got {self.alpha_noise}")
        for name in ("consistency_weight", "objective_weight"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ContractError(f"{name} must be >= 0, got {v}")

    def resolved(self, kind: str) -> "SearchConfig":
        """Fill kind-specific weight defaults, leaving explicit values alone."""
        cw, ow = DEFAULT_GUIDANCE_WEIGHTS[kind]
        return replace(
            self,
            consistency_weight=cw if self.consistency_weight is None else self.consistency_weight,
            objective_weight=ow if self.objective_weight is None else self.objective_weight,
        )


def schedule_points(T: int, steps: int) -> List[int]:
    """Intermediate renoise levels for ``steps``-step sampling.

    Returns round(T * (1 - sin((i/steps) * pi/2))) for i = 1..steps-1,
    clamped to [1, T-1] and de-duplicated to a strictly decreasing list.
    If rounding collapses the points, falls back to evenly spaced levels.
    """
    if steps < 1:
        raise ContractError(f"steps must be >= 1, got {steps}")
    if steps > T:
        raise ContractError(f"{steps}-step sampling needs {steps - 1} distinct "
                            f"renoise levels in [1, {T - 1}]")
    if steps == 1:
        return []
    raw = [
        int(round(T * (1.0 - math.sin((i / steps) * math.pi / 2.0))))
        for i in range(1, steps)
    ]
    pts = _strictly_decreasing([min(max(t, 1), T - 1) for t in raw])
    if len(pts) < steps - 1:
        even = [int(round(T * (steps - i) / steps)) for i in range(1, steps)]
        fallback = _strictly_decreasing([min(max(t, 1), T - 1) for t in even])
        if len(fallback) > len(pts):
            pts = fallback
    return pts


def _strictly_decreasing(values: Sequence[int]) -> List[int]:
    out: List[int] = []
    for v in values:
        if not out or v < out[-1]:
            out.append(v)
    return out


def sample(
    model: Model,
    inst: Instance,
    rng: np.random.Generator,
    cfg: Optional[SamplerConfig] = None,
) -> Tuple[DecisionState, BernoulliField]:
    """Few-step consistency sampling.

    Draws the fully noised state from the uniform prior, predicts the
    solution field in one forward pass, and samples a hard state from it.
    Each additional step renoises that state to the next level in
    ``cfg.points`` and re-predicts.  Returns the final hard state and the
    final field (whose confidences feed greedy decoding).
    """
    cfg = cfg or SamplerConfig()
    if (model.config.kind) != inst.kind:
        raise ContractError(
            f"model solves {model.config.kind} instances, got {inst.kind}"
        )
    sched = model.schedule
    points = cfg.points if cfg.points is not None else schedule_points(sched.T, cfg.steps)
    _validate_points(points, sched.T)

    x = uniform_prior(inst.kind, inst.n, rng)
    field_arr = model.predict(x, sched.T, inst)
    field = BernoulliField(inst.kind, inst.n, field_arr.astype(np.float64))
    x0 = sample_state(field, rng)
    for tau in points:
        xt = renoise(x0, int(tau), sched, rng)
        field_arr = model.predict(xt, int(tau), inst)
        field = BernoulliField(inst.kind, inst.n, field_arr.astype(np.float64))
        x0 = sample_state(field, rng)
    return x0, field


def _validate_points(points: Sequence[int], T: int) -> None:
    prev = None
    for p in points:
        if not 1 <= p <= T - 1:
            raise ContractError(f"renoise level {p} outside [1, {T - 1}]")
        if prev is not None and p >= prev:
            raise ContractError("renoise levels must be strictly decreasing")
        prev = p


def soft_objective(field: ad.Tensor, inst: Instance, penalty_beta: float = DEFAULT_PENALTY_BETA) -> ad.Tensor:
    """Differentiable objective of a predicted field (batch of one).

    Tours: expected length, half the inclusion-weighted sum of the
    directed distance entries.  Independent sets: expected negative size
    plus ``penalty_beta`` times the expected number of conflicting edges.
    """
    N = num_entries(inst.kind, inst.n)
    p = ad.reshape(ad.col(field, 1), (1, N))
    if inst.kind == "tsp":
        weights = (inst.dist.reshape(-1) / 2.0)[None, :]
        return ad.reduce_sum(ad.mul(p, weights.astype(np.float32)))
    adj = inst.adjacency.astype(np.float32)
    quad = ad.reduce_sum(ad.mul(ad.matmul(p, adj), p))
    return ad.add(ad.neg(ad.reduce_sum(p)), ad.mul(0.5 * penalty_beta, quad))


def gradient_search(
    model: Model,
    inst: Instance,
    eta0: "DecisionState | FeasibleSolution | None",
    cfg: SearchConfig,
    rng: np.random.Generator,
    use_two_opt: bool = False,
    initial_best: Optional[FeasibleSolution] = None,
    trace: Optional[List[float]] = None,
) -> FeasibleSolution:
    """Refine a sampled state by guided multiplicative updates.

    Per iteration: (1) spread the incumbent state to the rewrite noise
    level, giving an input field p_x; (2) predict the solution field from
    the soft p_x; (3) update p_x multiplicatively by exp(-grad) of the
    guidance loss (consistency_weight * BCE(prediction, incumbent) +
    objective_weight * soft objective), renormalizing rows; (4) sample a
    hard state from the updated p_x and re-predict; (5) greedy-decode both
    predictions (2-opt inside the decode when requested) and adopt the
    cheaper solution as the next incumbent.  Returns the best solution
    seen, seeded with ``initial_best`` when given; appends the running
    best objective per iteration to ``trace`` when provided.
    """
    cfg = cfg.resolved(inst.kind)
    if isinstance(eta0, FeasibleSolution):
        if initial_best is None:
            initial_best = eta0  # the incumbent counts as "seen"
        eta0 = solution_to_state(inst, eta0)
    if cfg.steps == 0 and initial_best is None:
        raise ContractError("search with zero steps needs an incumbent solution")
    if cfg.steps > 0 and eta0 is None:
        raise ContractError("search needs an initial state to refine")
    sched = model.schedule
    t_star = max(1, int(round(cfg.alpha_noise * sched.T)))
    N = num_entries(inst.kind, inst.n)
    params_t = model.params_as_tensors()
    ts = np.array([t_star])

    eta = eta0
    best = initial_best
    for _ in range(cfg.steps):
        p_x = noise_marginal(eta, t_star, sched).probs

        leaf = ad.Tensor(p_x.astype(np.float32), requires_grad=True)
        state = ad.reshape(ad.col(leaf, 1), (1, N))
        field_t = model.forward_batch(state, ts, [inst], params_t)
        target = eta.selected.astype(np.float32)[None, :]
        loss = ad.add(
            ad.mul(cfg.consistency_weight, ad.reduce_mean(ad.bce(ad.col(field_t, 1), target))),
            ad.mul(cfg.objective_weight, soft_objective(field_t, inst, cfg.penalty_beta)),
        )
        ad.Tape(loss).backward()

        scaled = p_x * np.exp(-cfg.grad_lr * leaf.grad.astype(np.float64))
        scaled = np.clip(scaled, _PROB_FLOOR, None)
        updated = BernoulliField(inst.kind, inst.n, scaled / scaled.sum(axis=1, keepdims=True))

        x_t = sample_state(updated, rng)
        field2 = model.predict(x_t, t_star, inst)

        first = greedy_decode(field_t.data[0], inst, two_opt=use_two_opt)
        second = greedy_decode(field2, inst, two_opt=use_two_opt)
        winner = first if first.objective <= second.objective else second
        eta = solution_to_state(inst, winner)
        for sol in (first, second):
            if best is None or sol.objective < best.objective:
                best = sol
        if trace is not None:
            trace.append(best.objective)
    return best


@dataclass(frozen=True)
class SolveReport:
    """Outcome of solving one instance, including the winning solution."""

    instance_id: str
    objective: float
    reference: Optional[float]
    drop: Optional[float]
    time_ms: float
    sample_steps: int
    search_steps: int
    samples: int
    seed: int
    solution: FeasibleSolution

    def to_json(self) -> dict:
        """JSON form: {instance_id, objective, reference, drop, time_ms, Ts, Tg, samples, seed}."""
        return {
            "instance_id": self.instance_id,
            "objective": self.objective,
            "reference": self.reference,
            "drop": self.drop,
            "time_ms": self.time_ms,
            "Ts": self.sample_steps,
            "Tg": self.search_steps,
            "samples": self.samples,
            "seed": self.seed,
        }


def relative_drop(objective: Optional[float], reference: Optional[float]) -> Optional[float]:
    """Relative gap to the reference optimum, in the minimization convention.

    Tours: (length - optimal) / optimal.  Independent sets (objectives are
    negated sizes): (optimal_size - size) / optimal_size.  Both reduce to
    (objective - reference) / |reference|.  None when either side is missing.
    """
    if objective is None or reference is None:
        return None
    if reference == 0:
        raise ContractError("reference objective must be nonzero")
    return (objective - reference) / abs(reference)


def _chain_stream(seed: int, instance_id: str, chain: int) -> np.random.Generator:
    key = zlib.crc32(instance_id.encode("utf-8"))
    return rngmod.stream(seed, rngmod.SOLVE, key, chain)


def solve(
    model: Model,
    inst: Instance,
    sampler_cfg: Optional[SamplerConfig] = None,
    search_cfg: Optional[SearchConfig] = None,
    use_two_opt: bool = False,
    parallel_samples: int = 1,
    reference: Optional[float] = None,
) -> SolveReport:
    """Solve one instance: parallel sample(+search) chains, best-of reduction.

    Each chain owns an independent random stream derived from the sampler
    seed, the instance id, and the chain index, so reports are fully
    deterministic and chains stay paired across config sweeps.  Every
    chain's candidates include the greedy decode of the sampled field, so
    enabling the search can only improve the reported objective for a
    fixed seed.  Wall-clock time covers solving only (model loading and
    report assembly excluded).
    """
    if parallel_samples < 1:
        raise ContractError(f"parallel_samples must be >= 1, got {parallel_samples}")
    sampler_cfg = sampler_cfg or SamplerConfig()
    search_cfg = search_cfg or SearchConfig()

    start = time.perf_counter()
    best: Optional[FeasibleSolution] = None
    for chain in range(parallel_samples):
        rng = _chain_stream(sampler_cfg.seed, inst.id, chain)
        x0, field = sample(model, inst, rng, sampler_cfg)
        candidate = greedy_decode(field, inst, two_opt=use_two_opt)
        if search_cfg.steps > 0:
            candidate = gradient_search(
                model,
                inst,
                x0,
                search_cfg,
                rng,
                use_two_opt=use_two_opt,
                initial_best=candidate,
            )
        if best is None or candidate.objective < best.objective:
            best = candidate
    elapsed_ms = (time.perf_counter() - start) * 1000.0

    return SolveReport(
        instance_id=inst.id,
        objective=float(best.objective),
        reference=None if reference is None else float(reference),
        drop=relative_drop(float(best.objective), reference),
        time_ms=elapsed_ms,
        sample_steps=sampler_cfg.steps,
        search_steps=search_cfg.steps,
        samples=parallel_samples,
        seed=sampler_cfg.seed,
        solution=best,
    )
