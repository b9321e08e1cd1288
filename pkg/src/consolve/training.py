"""Training loop: teach the network to map any noise level to the optimum.

Each step draws a batch of labeled instances, a noise-level pair (t1, t2)
per instance with t2 = ceil(alpha * t1), and two independently noised
states of the optimal solution. The loss is the sum of the two binary
cross entropies against the optimum, averaged over entries and batch:
both noise levels must map to the same target, which is what lets the
sampler jump from any t straight to a solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import autodiff as ad
from . import rng as rngmod
from .diffusion import NoiseSchedule, make_schedule, noise_marginal, sample_state
from .errors import ContractError, DivergenceError, NumericError
from .instances import LabeledSample
from .network import GnnConfig, Model, init_params
from .state import solution_to_state


@dataclass(frozen=True)
class TrainConfig:
    """Optimization hyperparameters (architecture lives in GnnConfig)."""

    steps: int = 2000
    batch_size: int = 32
    lr: float = 2e-4
    lr_final_frac: float = 1e-4  # cosine decays lr down to lr * lr_final_frac
    time_pair_alpha: float = 0.5  # t2 = ceil(alpha * t1)
    loss_weight: float = 1.0  # constant lambda(t)
    optimizer: str = "sgd"  # "sgd" | "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    pair_rule: str = "ratio"  # "ratio" (default) | "grid" (cosine grid pairs)
    grid_points: int = 8
    horizon: int = 1000
    beta_start: float = 0.9999
    beta_end: Optional[float] = None
    seed: int = 0
    stop_loss: Optional[float] = None  # early stop once loss drops below

    def __post_init__(self):
        if self.steps < 1 or self.batch_size < 1:
            raise ContractError("steps and batch_size must be positive")
        if not 0.0 < self.time_pair_alpha <= 1.0:
            raise ContractError("time_pair_alpha must be in (0, 1]")
        if self.optimizer not in ("sgd", "adam"):
            raise ContractError(f"unknown optimizer {self.optimizer!r}")
        if self.pair_rule not in ("ratio", "grid"):
            raise ContractError(f"unknown pair_rule {self.pair_rule!r}")
        if self.lr <= 0 or self.lr_final_frac <= 0:
            raise ContractError("lr and lr_final_frac must be positive")


def lr_at(step: int, cfg: TrainConfig) -> float:
    """Cosine decay from lr at step 0 to lr * lr_final_frac at the last step."""
    if not 0 <= step < cfg.steps:
        raise ContractError(f"step {step} outside [0, {cfg.steps})")
    lo = cfg.lr * cfg.lr_final_frac
    if cfg.steps == 1:
        return cfg.lr
    frac = step / (cfg.steps - 1)
    return lo + (cfg.lr - lo) * 0.5 * (1.0 + math.cos(math.pi * frac))


def time_grid(T: int, points: int) -> List[int]:
    """Descending noise levels T = g_0 > ... > g_points = 1 on a cosine arc."""
    grid = []
    for i in range(points + 1):
        t = int(round(T * (1.0 - math.sin(i * math.pi / (2.0 * points)))))
        grid.append(max(1, min(T, t)))
    out = [grid[0]]
    for t in grid[1:]:
        if t < out[-1]:
            out.append(t)
    if out[-1] != 1:
        out.append(1)
    return out


def sample_time_pair(cfg: TrainConfig, T: int, rng: np.random.Generator) -> Tuple[int, int]:
    """Draw (t1, t2) with 1 <= t2 <= t1 <= T.

    ratio: t1 uniform on [1, T], t2 = ceil(alpha * t1).
    grid: adjacent pair from the cosine time grid, uniform over segments.
    """
    if cfg.pair_rule == "ratio":
        t1 = int(rng.integers(1, T + 1))
        t2 = int(math.ceil(cfg.time_pair_alpha * t1))
        return t1, max(1, t2)
    grid = time_grid(T, cfg.grid_points)
    k = int(rng.integers(0, len(grid) - 1))
    return grid[k], grid[k + 1]


def _check_homogeneous(samples: Sequence[LabeledSample]) -> Tuple[str, int]:
    if not samples:
        raise ContractError("training needs at least one sample")
    kind = samples[0].instance.kind
    n = samples[0].instance.n
    for s in samples:
        if s.solution is None:
            raise ContractError(f"sample {s.instance.id} is unlabeled")
        if s.instance.kind != kind or s.instance.n != n:
            raise ContractError("training set must share problem kind and size")
    return kind, n


def consistency_loss(
    model: Model,
    params_t: Dict[str, ad.Tensor],
    batch: Sequence[LabeledSample],
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> ad.Tensor:
    """Two-noise-level consistency loss for one batch.

    Per sample: draw (t1, t2), noise the optimal state independently to both
    levels, and sum the per-entry-averaged BCE of both predictions against
    the optimum. Deterministic given the rng state.
    """
    sched = model.schedule
    insts = [s.instance for s in batch]
    targets = np.stack([solution_to_state(s.instance, s.solution).selected for s in batch]).astype(np.float32)
    z1 = np.empty_like(targets)
    z2 = np.empty_like(targets)
    ts1 = np.empty(len(batch), dtype=np.int64)
    ts2 = np.empty(len(batch), dtype=np.int64)
    for i, s in enumerate(batch):
        t1, t2 = sample_time_pair(cfg, sched.T, rng)
        x_star = solution_to_state(s.instance, s.solution)
        z1[i] = sample_state(noise_marginal(x_star, t1, sched), rng).selected
        z2[i] = sample_state(noise_marginal(x_star, t2, sched), rng).selected
        ts1[i], ts2[i] = t1, t2

    field1 = model.forward_batch(ad.Tensor(z1), ts1, insts, params_t=params_t)
    field2 = model.forward_batch(ad.Tensor(z2), ts2, insts, params_t=params_t)
    l1 = ad.reduce_mean(ad.bce(ad.col(field1, 1), targets))
    l2 = ad.reduce_mean(ad.bce(ad.col(field2, 1), targets))
    loss = ad.add(l1, l2)
    if cfg.loss_weight != 1.0:
        loss = ad.mul(loss, cfg.loss_weight)
    return loss


@dataclass
class _AdamState:
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def _apply_update(model: Model, grads: Dict[str, np.ndarray], lr: float, cfg: TrainConfig, adam: _AdamState) -> None:
    if cfg.optimizer == "sgd":
        for name, g in grads.items():
            model.params[name] -= np.float32(lr) * g
        return
    adam.t += 1
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    for name, g in grads.items():
        if name not in adam.m:
            adam.m[name] = np.zeros_like(g)
            adam.v[name] = np.zeros_like(g)
        adam.m[name] = b1 * adam.m[name] + (1 - b1) * g
        adam.v[name] = b2 * adam.v[name] + (1 - b2) * (g * g)
        mhat = adam.m[name] / (1 - b1 ** adam.t)
        vhat = adam.v[name] / (1 - b2 ** adam.t)
        model.params[name] -= (lr * mhat / (np.sqrt(vhat) + cfg.adam_eps)).astype(np.float32)


def train(
    samples: Sequence[LabeledSample],
    cfg: TrainConfig,
    gnn: Optional[GnnConfig] = None,
    loss_log_path=None,
) -> Tuple[Model, List[Tuple[int, float, float]]]:
    """Train a model on labeled samples.

    Returns (model, history) where history rows are (step, lr, loss). A
    non-finite loss aborts by raising DivergenceError carrying the model
    rolled back to the last finite step (model attribute on the error).
    Deterministic given (samples order, cfg.seed).
    """
    kind, _ = _check_homogeneous(samples)
    gnn = gnn or GnnConfig(kind=kind)
    if gnn.kind != kind:
        raise ContractError(f"gnn config kind {gnn.kind!r} != data kind {kind!r}")
    schedule = make_schedule(cfg.horizon, cfg.beta_start, cfg.beta_end)
    params = init_params(gnn, rngmod.stream(cfg.seed, rngmod.TRAIN, 0))
    model = Model(gnn, params, schedule, meta={"kind": kind, "seed": cfg.seed})
    order_rng = rngmod.stream(cfg.seed, rngmod.TRAIN, 1)
    draw_rng = rngmod.stream(cfg.seed, rngmod.TRAIN, 2)

    history: List[Tuple[int, float, float]] = []
    order: List[int] = []
    adam = _AdamState()
    prev_params: Optional[Dict[str, np.ndarray]] = None

    for step in range(cfg.steps):
        while len(order) < cfg.batch_size:
            order.extend(order_rng.permutation(len(samples)).tolist())
        batch = [samples[i] for i in order[: cfg.batch_size]]
        order = order[cfg.batch_size :]

        prev_params = {k: v.copy() for k, v in model.params.items()}
        params_t = model.params_as_tensors(requires_grad=True)
        try:
            loss = consistency_loss(model, params_t, batch, cfg, draw_rng)
        except NumericError as e:
            model.params = prev_params
            model.meta["diverged_at_step"] = step
            err = DivergenceError(f"non-finite loss at step {step}: {e}")
            err.model = model
            err.history = history
            raise err from e
        loss_val = float(loss.data)
        lr = lr_at(step, cfg)
        history.append((step, lr, loss_val))
        if not math.isfinite(loss_val):
            model.params = prev_params
            model.meta["diverged_at_step"] = step
            err = DivergenceError(f"non-finite loss at step {step}")
            err.model = model
            err.history = history
            raise err
        ad.Tape(loss).backward()
        grads = {
            name: (t.grad if t.grad is not None else np.zeros_like(t.data))
            for name, t in params_t.items()
        }
        _apply_update(model, grads, lr, cfg, adam)
        if cfg.stop_loss is not None and loss_val < cfg.stop_loss:
            break

    model.meta.update(
        {
            "trained_steps": len(history),
            "final_loss": history[-1][2] if history else None,
            "optimizer": cfg.optimizer,
            "batch_size": cfg.batch_size,
            "dataset_size": len(samples),
        }
    )
    if loss_log_path is not None:
        write_loss_log(loss_log_path, history)
    return model, history


def write_loss_log(path, history: Sequence[Tuple[int, float, float]]) -> None:
    """CSV with columns step,lr,loss; formatting is deterministic."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("step,lr,loss\n")
        for step, lr, loss in history:
            fh.write(f"{step},{lr!r},{loss!r}\n")
