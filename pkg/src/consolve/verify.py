"""Self-contained invariant suite: named checks, isolated execution.

Each check builds its own small fixtures and either returns a detail
string (pass) or raises (fail).  ``run_suite`` executes every requested
check in isolation, so one failure cannot mask or poison another; the
``faults`` mapping injects a fault hook into a named check (e.g. a file
corruptor for the checkpoint round-trip) to demonstrate that exactly
that check fails.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy import stats

from . import autodiff as ad
from . import rng as rngmod
from .checkpoint import load_model, save_model
from .decoding import greedy_decode, two_opt
from .errors import ContractError
from .diffusion import (
    make_schedule,
    noise_marginal,
    noise_step,
    qbar_matrix,
    qbar_matrix_explicit,
    uniform_prior,
)
from .instances import generate
from .network import GnnConfig, Model, init_params
from .objectives import objective, tour_length, tour_solution
from .oracles import (
    held_karp,
    label,
    mis_branch_and_bound,
    mis_enumerate,
    oracle_solve,
    tsp_brute_force,
)
from .solver import (
    SamplerConfig,
    SearchConfig,
    gradient_search,
    relative_drop,
    sample,
    schedule_points,
    soft_objective,
    solve,
)
from .state import BernoulliField, num_entries, solution_to_state
from .training import TrainConfig, consistency_loss


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    detail: str


def _tiny_model(kind: str, seed: int = 0, T: int = 64, dtype=np.float32) -> Model:
    cfg = GnnConfig(kind, n_layers=2, hidden_dim=8, time_dim=4)
    params = init_params(cfg, rngmod.stream(seed, rngmod.VERIFY, 0))
    if dtype is not np.float32:
        params = {k: v.astype(dtype) for k, v in params.items()}
    return Model(cfg, params, make_schedule(T))


def check_autodiff_gradients(fault=None) -> str:
    """Every primitive op's gradient matches float64 central differences."""
    rng = rngmod.stream(0, rngmod.VERIFY, 1)
    a0 = rng.normal(size=(3, 4))
    w0 = rng.normal(size=(4, 2))
    cases = {
        "matmul": lambda a: ad.reduce_sum(ad.matmul(a, w0)),
        "mul-add": lambda a: ad.reduce_sum(ad.mul(ad.add(a, 0.5), a)),
        "sigmoid": lambda a: ad.reduce_sum(ad.sigmoid(a)),
        "relu": lambda a: ad.reduce_sum(ad.relu(ad.add(a, 0.01))),
        "exp-log": lambda a: ad.reduce_sum(ad.log(ad.add(ad.exp(a), 1.0))),
        "softmax": lambda a: ad.reduce_sum(ad.mul(ad.softmax_rows(a), a)),
        "sin-cos": lambda a: ad.reduce_sum(ad.mul(ad.sin(a), ad.cos(a))),
        "bce": lambda a: ad.reduce_mean(ad.bce(ad.sigmoid(a), np.full(a.shape, 0.3))),
        "norm": lambda a: ad.reduce_sum(
            ad.channel_norm(a, ad.Tensor(np.ones(4), dtype=np.float64),
                            ad.Tensor(np.zeros(4), dtype=np.float64), axes=(0,))
        ),
    }
    worst = 0.0
    for name, fn in cases.items():
        def scalar(arr, fn=fn):
            return fn(ad.Tensor(arr, requires_grad=False, dtype=np.float64)).data.item()

        leaf = ad.Tensor(a0, requires_grad=True, dtype=np.float64)
        out = fn(leaf)
        ad.Tape(out).backward()
        fd = ad.fd_gradients(scalar, a0, eps=1e-5)
        err = ad.relative_gradient_error(leaf.grad, fd)
        if err > 1e-4:
            raise AssertionError(f"{name}: relative gradient error {err:.2e}")
        worst = max(worst, err)
    return f"{len(cases)} op pipelines, worst relative error {worst:.1e}"


def check_network_param_gradients(fault=None) -> str:
    """Every parameter's gradient in a small net matches finite differences."""
    inst = generate("tsp", 6, 1, seed=11)[0]
    model = _tiny_model("tsp", seed=2, dtype=np.float64)
    x_star = solution_to_state(inst, oracle_solve(inst))
    state = noise_marginal(x_star, 20, model.schedule).selected[None, :]
    target = x_star.selected.astype(np.float64)[None, :]
    ts = np.array([20])

    def loss_with(params_np: Dict[str, np.ndarray]):
        params_t = {k: ad.Tensor(v, requires_grad=True, dtype=np.float64) for k, v in params_np.items()}
        field = model.forward_batch(ad.Tensor(state, dtype=np.float64), ts, [inst], params_t)
        return ad.reduce_mean(ad.bce(ad.col(field, 1), target)), params_t

    loss, params_t = loss_with(model.params)
    ad.Tape(loss).backward()
    checked = 0
    worst = 0.0
    for name in model.params:
        def scalar(arr, name=name):
            trial = dict(model.params)
            trial[name] = arr
            return loss_with(trial)[0].data.item()

        fd = ad.fd_gradients(scalar, model.params[name], eps=1e-3)
        # a parameter with no path to the loss has an (implicit) zero gradient
        grad = params_t[name].grad
        if grad is None:
            grad = np.zeros_like(model.params[name])
        err = ad.relative_gradient_error(grad, fd)
        if not err <= 1e-2:
            raise AssertionError(f"{name}: relative gradient error {err:.2e}")
        worst = max(worst, err)
        checked += params_t[name].data.size
    return f"{checked} parameters across {len(model.params)} arrays, worst error {worst:.1e}"


def check_search_input_gradient(fault=None) -> str:
    """Gradient of the guidance loss w.r.t. the input field matches FD."""
    details = []
    for kind in ("tsp", "mis"):
        inst = generate(kind, 6, 1, seed=3)[0]
        model = _tiny_model(kind, seed=4, dtype=np.float64)
        eta = solution_to_state(inst, oracle_solve(inst))
        t_star = max(1, round(0.2 * model.schedule.T))
        p_x = noise_marginal(eta, t_star, model.schedule).probs
        target = eta.selected.astype(np.float64)[None, :]
        cw, ow = (50.0, 50.0) if kind == "tsp" else (2.0, 2.0)
        N = num_entries(kind, inst.n)

        def guidance(arr):
            leaf = ad.Tensor(arr, requires_grad=True, dtype=np.float64)
            field = model.forward_batch(
                ad.reshape(ad.col(leaf, 1), (1, N)), np.array([t_star]), [inst],
                model.params_as_tensors(dtype=np.float64),
            )
            loss = ad.add(
                ad.mul(cw, ad.reduce_mean(ad.bce(ad.col(field, 1), target))),
                ad.mul(ow, soft_objective(field, inst)),
            )
            return loss, leaf

        loss, leaf = guidance(p_x)
        ad.Tape(loss).backward()
        if np.abs(leaf.grad).max() < 1e-8:
            raise AssertionError(f"{kind}: input gradient vanished (dead network)")
        fd = ad.fd_gradients(lambda a: guidance(a)[0].data.item(), p_x, eps=1e-3)
        err = ad.relative_gradient_error(leaf.grad, fd)
        if err > 1e-2:
            raise AssertionError(f"{kind}: input gradient error {err:.2e}")
        details.append(f"{kind} {err:.1e}")
    return "relative errors " + ", ".join(details)


def check_schedule_terminal(fault=None) -> str:
    """Retention schedule hits the uniform-mixing target at the horizon."""
    sched = make_schedule(1000)
    final = sched.stay_bar(1000)
    if abs(final - 0.5005) > 1e-6:
        raise AssertionError(f"terminal retention {final} != 0.5005")
    bars = np.array([sched.stay_bar(t) for t in range(1, 1001)])
    if not np.all(np.diff(bars) < 0):
        raise AssertionError("cumulative retention must strictly decrease")
    if sched.beta.min() <= 0.5 or sched.beta.max() > 0.9999 + 1e-12:
        raise AssertionError("per-step retention outside (0.5, beta_start]")
    return f"T=1000: terminal retention {final:.6f}, monotone decrease"


def check_qbar_consistency(fault=None) -> str:
    """Closed-form cumulative transition equals the explicit matrix product."""
    sched = make_schedule(256)
    worst = 0.0
    for t in (1, 2, 64, 128, 256):
        closed = qbar_matrix(sched, t)
        explicit = qbar_matrix_explicit(sched, t)
        worst = max(worst, float(np.abs(closed - explicit).max()))
        if np.abs(closed.sum(axis=0) - 1).max() > 1e-6 or np.abs(closed.sum(axis=1) - 1).max() > 1e-6:
            raise AssertionError(f"t={t}: cumulative transition not doubly stochastic")
    if worst > 1e-9:
        raise AssertionError(f"closed form vs product differ by {worst:.2e}")
    return f"5 levels, max closed-vs-product gap {worst:.1e}"


def check_noising_marginal(fault=None) -> str:
    """Step-composed noising matches the one-shot marginal (chi-square)."""
    T = 128
    sched = make_schedule(T)
    inst = generate("mis", 10, 1, seed=5)[0]
    x0 = solution_to_state(inst, oracle_solve(inst))
    rng = rngmod.stream(1, rngmod.VERIFY, 2)
    n_samples = 4000
    worst_p = 1.0
    for t in (1, T // 2, T):
        counts = np.zeros(x0.selected.shape[0])
        for _ in range(n_samples):
            x = x0
            for s in range(1, t + 1):
                x = noise_step(x, s, sched, rng)
            counts += x.selected
        expected = noise_marginal(x0, t, sched).selected * n_samples
        mask = (expected > 1e-9) & (expected < n_samples - 1e-9)
        chi2 = np.sum((counts[mask] - expected[mask]) ** 2 / (expected[mask] * (1 - expected[mask] / n_samples)))
        pval = float(stats.chi2.sf(chi2, df=int(mask.sum())))
        worst_p = min(worst_p, pval)
        if pval < 0.01:
            raise AssertionError(f"t={t}: chi-square p={pval:.4f} < 0.01")
    return f"3 levels x {n_samples} samples, min p-value {worst_p:.3f}"


def check_sampling_forward_count(fault=None) -> str:
    """k-step sampling costs exactly k forward passes (k=1: a single one)."""
    model = _tiny_model("tsp", seed=6)
    inst = generate("tsp", 6, 1, seed=7)[0]
    for steps in (1, 2, 4):
        model.reset_counter()
        sample(model, inst, rngmod.stream(2, rngmod.VERIFY, 3), SamplerConfig(steps=steps))
        if model.forward_calls != steps:
            raise AssertionError(f"steps={steps}: {model.forward_calls} forwards")
    return "1/2/4 sampling steps -> 1/2/4 forward passes"


def check_sampling_determinism(fault=None) -> str:
    """Identical seeds reproduce identical samples, fields, and reports."""
    model = _tiny_model("mis", seed=8)
    inst = generate("mis", 10, 1, seed=9)[0]
    s1 = sample(model, inst, rngmod.stream(3, rngmod.VERIFY, 4), SamplerConfig(steps=3))
    s2 = sample(model, inst, rngmod.stream(3, rngmod.VERIFY, 4), SamplerConfig(steps=3))
    if s1[0] != s2[0] or not np.array_equal(s1[1].probs, s2[1].probs):
        raise AssertionError("sampling diverged under identical seeds")
    r1 = solve(model, inst, SamplerConfig(steps=2, seed=5), SearchConfig(steps=1))
    r2 = solve(model, inst, SamplerConfig(steps=2, seed=5), SearchConfig(steps=1))
    if r1.objective != r2.objective or r1.solution.members != r2.solution.members:
        raise AssertionError("solve reports diverged under identical seeds")
    return "sampling and full solve reports reproduce exactly"


def check_greedy_feasibility(fault=None) -> str:
    """Random-field greedy decodes are always feasible solutions."""
    rng = rngmod.stream(4, rngmod.VERIFY, 5)
    count = 0
    for kind, n in (("tsp", 9), ("mis", 14)):
        for i in range(150):
            inst = generate(kind, n, 1, seed=1000 + i)[0]
            heat = rng.uniform(0.0, 1.0, num_entries(kind, n))
            sol = greedy_decode(heat, inst)  # validates feasibility on build
            obj = objective(solution_to_state(inst, sol), inst)
            if abs(obj - sol.objective) > 1e-6:
                raise AssertionError(f"{inst.id}: objective mismatch")
            count += 1
    return f"{count} random-field decodes, all feasible"


def check_two_opt_monotone(fault=None) -> str:
    """Local tour improvement never increases length."""
    rng = rngmod.stream(5, rngmod.VERIFY, 6)
    for i in range(100):
        inst = generate("tsp", 10, 1, seed=2000 + i)[0]
        tour = list(rng.permutation(inst.n))
        before = tour_length(inst, tour)
        improved = two_opt(tour_solution(inst, tour), inst)
        if improved.objective > before + 1e-9:
            raise AssertionError(f"{inst.id}: 2-opt increased length")
    return "100 random tours, improvement always non-positive"


def check_oracle_cross(fault=None) -> str:
    """Exact solvers agree with exhaustive enumeration."""
    for i in range(15):
        inst = generate("tsp", 7, 1, seed=3000 + i)[0]
        if abs(held_karp(inst).objective - tsp_brute_force(inst).objective) > 1e-9:
            raise AssertionError(f"{inst.id}: dynamic program != brute force")
    for i in range(15):
        inst = generate("mis", 12, 1, seed=4000 + i)[0]
        if mis_branch_and_bound(inst).size != mis_enumerate(inst).size:
            raise AssertionError(f"{inst.id}: branch-and-bound != enumeration")
    return "15 tour + 15 set instances, exact agreement"


def check_search_monotonicity(fault=None) -> str:
    """The search's running best never worsens, and solve output is feasible."""
    for kind, n in (("tsp", 8), ("mis", 12)):
        model = _tiny_model(kind, seed=10)
        inst = generate(kind, n, 1, seed=12)[0]
        rng = rngmod.stream(6, rngmod.VERIFY, 7)
        x0, field = sample(model, inst, rng, SamplerConfig(steps=1))
        trace: List[float] = []
        best = gradient_search(
            model, inst, x0, SearchConfig(steps=3), rng,
            initial_best=greedy_decode(field, inst), trace=trace,
        )
        if any(b > a + 1e-12 for a, b in zip(trace, trace[1:])):
            raise AssertionError(f"{kind}: running best increased: {trace}")
        if best.objective != trace[-1]:
            raise AssertionError(f"{kind}: returned best != trace end")
    return "3-iteration traces monotone for both kinds"


def check_checkpoint_roundtrip(fault: Optional[Callable] = None) -> str:
    """Save/load reproduces parameters and forwards bit-for-bit.

    A fault hook, when given, may corrupt the file between save and load;
    the load (or the comparison) must then fail, and only this check.
    """
    model = _tiny_model("tsp", seed=13)
    model.meta["note"] = "round-trip probe"
    inst = generate("tsp", 6, 1, seed=14)[0]
    probe = uniform_prior("tsp", 6, rngmod.stream(7, rngmod.VERIFY, 8))
    before = model.predict(probe, model.schedule.T, inst)
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "model.ckpt")
        save_model(model, path)
        if fault is not None:
            fault(path)
        loaded = load_model(path)
        for name, arr in model.params.items():
            if not np.array_equal(arr, loaded.params[name]):
                raise AssertionError(f"parameter {name} changed across round-trip")
        after = loaded.predict(probe, loaded.schedule.T, inst)
    if not np.array_equal(before, after):
        raise AssertionError("forward outputs differ across round-trip")
    return "parameters and probe forward bit-identical"


def check_drop_formula(fault=None) -> str:
    """Reported drops follow the relative-gap formula for both conventions."""
    if abs(relative_drop(5.2, 5.0) - 0.04) > 1e-12:
        raise AssertionError("tour drop formula broken")
    if abs(relative_drop(-18.0, -20.0) - 0.1) > 1e-12:
        raise AssertionError("set drop formula broken")
    if relative_drop(3.0, None) is not None:
        raise AssertionError("missing reference must give absent drop")
    model = _tiny_model("mis", seed=15)
    inst = generate("mis", 10, 1, seed=16)[0]
    ref = oracle_solve(inst).objective
    rep = solve(model, inst, SamplerConfig(seed=1), reference=ref)
    if abs(rep.drop - (rep.objective - ref) / abs(ref)) > 1e-12:
        raise AssertionError("report drop not recomputable from raw records")
    keys = set(rep.to_json())
    expected = {"instance_id", "objective", "reference", "drop", "time_ms", "Ts", "Tg", "samples", "seed"}
    if keys != expected:
        raise AssertionError(f"report JSON keys {sorted(keys)}")
    return "formula, absent-reference, and JSON schema all hold"


def check_uniform_loss_level(fault=None) -> str:
    """Training loss at uniform predictions sits at its analytic level.

    Each of the two per-sample terms is binary cross entropy against a
    0/1 target at probability one half, i.e. ln 2; a freshly initialized
    model (near-uniform fields by construction) must start close to
    2 ln 2 ~ 1.386.
    """
    target = 2.0 * float(np.log(2.0))
    samples = label(generate("tsp", 6, 2, seed=17))
    model = _tiny_model("tsp", seed=18, T=64)
    cfg = TrainConfig(steps=1, batch_size=2, horizon=64, seed=0)
    loss = consistency_loss(
        model, model.params_as_tensors(requires_grad=True), samples, cfg,
        rngmod.stream(8, rngmod.VERIFY, 9),
    )
    got = float(loss.data)
    if abs(got - target) > 0.2:
        raise AssertionError(f"initial loss {got:.4f} far from 2 ln 2 = {target:.4f}")
    exact = -np.log(0.5)
    uniform = BernoulliField.from_selected("tsp", 6, np.full(36, 0.5))
    per_entry = ad.reduce_mean(ad.bce(uniform.probs[:, 1][None, :], np.zeros((1, 36)))).data
    if abs(float(per_entry) - exact) > 1e-6:
        raise AssertionError("uniform-field cross entropy != ln 2")
    return f"init loss {got:.4f} vs analytic 2 ln 2 = {target:.4f}"


def check_schedule_points_shape(fault=None) -> str:
    """Sampling schedules are strictly decreasing, in range, pinned at knowns."""
    if schedule_points(1000, 2) != [293]:
        raise AssertionError(f"two-step point {schedule_points(1000, 2)} != [293]")
    if schedule_points(1000, 3) != [500, 134]:
        raise AssertionError("three-step points wrong")
    for steps in range(1, 65):
        pts = schedule_points(1000, steps)
        if len(pts) != steps - 1 or any(a <= b for a, b in zip(pts, pts[1:])):
            raise AssertionError(f"steps={steps}: bad schedule {pts[:5]}...")
        if pts and (pts[0] > 999 or pts[-1] < 1):
            raise AssertionError(f"steps={steps}: out of range")
    return "steps 1..64 strictly decreasing in [1, T-1]; known points match"


ALL_CHECKS: Dict[str, Callable] = {
    "autodiff-gradients": check_autodiff_gradients,
    "network-param-gradients": check_network_param_gradients,
    "search-input-gradient": check_search_input_gradient,
    "schedule-terminal": check_schedule_terminal,
    "qbar-consistency": check_qbar_consistency,
    "noising-marginal": check_noising_marginal,
    "schedule-points": check_schedule_points_shape,
    "sampling-forward-count": check_sampling_forward_count,
    "sampling-determinism": check_sampling_determinism,
    "greedy-feasibility": check_greedy_feasibility,
    "two-opt-monotone": check_two_opt_monotone,
    "oracle-cross": check_oracle_cross,
    "search-monotonicity": check_search_monotonicity,
    "checkpoint-roundtrip": check_checkpoint_roundtrip,
    "drop-formula": check_drop_formula,
    "uniform-loss-level": check_uniform_loss_level,
}


def run_suite(
    names: Optional[Sequence[str]] = None,
    faults: Optional[Dict[str, Callable]] = None,
) -> List[CheckResult]:
    """Run the named checks (all by default), isolating failures.

    ``faults`` maps a check name to a hook passed into that check; checks
    with natural injection points (the checkpoint round-trip) use it to
    sabotage themselves, demonstrating failure isolation.
    """
    selected = list(ALL_CHECKS) if names is None else list(names)
    unknown = [n for n in selected if n not in ALL_CHECKS]
    if unknown:
        raise ContractError(f"unknown checks: {unknown}")
    faults = faults or {}
    results: List[CheckResult] = []
    for name in selected:
        try:
            detail = ALL_CHECKS[name](fault=faults.get(name))
            results.append(CheckResult(name, True, detail))
        except Exception as err:  # noqa: BLE001 - isolation requires catching everything
            results.append(CheckResult(name, False, f"{type(err).__name__}: {err}"))
    return results


def format_report(results: Sequence[CheckResult]) -> str:
    lines = []
    for r in results:
        lines.append(f"[{'PASS' if r.ok else 'FAIL'}] {r.name}: {r.detail}")
    failed = [r.name for r in results if not r.ok]
    lines.append(
        f"{len(results) - len(failed)}/{len(results)} checks passed"
        + (f"; failing: {', '.join(failed)}" if failed else "")
    )
    return "\n".join(lines)
