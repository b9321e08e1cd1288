"""Anisotropic edge-gated graph network mapping (noisy state, noise level,
instance) to a per-entry Bernoulli field.

Tours read the state off edge features (distance embedding plus state
embedding); independent sets read it off node features with edge features
started at zero. Both variants share the residual conv layer

    x_i <- x_i + relu(norm(W1 x_i + sum_j eta_ij * (W2 x_j)))
    e_ij <- e_ij + relu(norm(W3 e_ij + W4 x_i + W5 x_j))
    eta_ij = sigmoid(e_ij) / (sum_j' sigmoid(e_ij') + 1e-6)

with the projected noise-level embedding added to the edge residual for
tours and the node residual for sets. The head is relu -> per-entry
normalization over the 2-vector -> softmax. All aggregations are symmetric
over the neighbor axis, so outputs are node-permutation equivariant.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .diffusion import NoiseSchedule
from .errors import ContractError, DimensionError, NumericError
from .instances import Instance
from .state import BernoulliField, DecisionState, num_entries

GATING_EPS = 1e-6
HEAD_NORM_INIT_GAIN = 0.1


@dataclass(frozen=True)
class GnnConfig:
    """Architecture hyperparameters.

    norm selects the normalization inside residual updates and the head:
    "entity" normalizes each channel over the decision entities of the
    graph (single-graph batch statistics), "feature" normalizes each entity
    over its channels. The choice is stored in checkpoints.
    """

    kind: str
    n_layers: int = 4
    hidden_dim: int = 64
    time_dim: int = 32
    sinusoid_base: float = 10000.0
    norm: str = "entity"

    def __post_init__(self):
        if self.kind not in ("tsp", "mis"):
            raise ContractError(f"unknown problem kind {self.kind!r}")
        if self.n_layers < 1 or self.hidden_dim < 2 or self.time_dim < 2:
            raise ContractError("n_layers >= 1 and dims >= 2 required")
        if self.hidden_dim % 2 or self.time_dim % 2:
            raise ContractError("hidden_dim and time_dim must be even")
        if self.norm not in ("entity", "feature"):
            raise ContractError(f"unknown norm {self.norm!r}")


def sinusoid_np(values: np.ndarray, dim: int, base: float = 10000.0, dtype=np.float32) -> np.ndarray:
    """Interleaved sin/cos features of arbitrary-shaped values.

    Output shape is values.shape + (dim,), laid out [sin f0, cos f0, sin f1,
    cos f1, ...] with frequencies base**(-2k/dim); value 0 maps to
    [0, 1, 0, 1, ...].
    """
    v = np.asarray(values, dtype=np.float64)
    k = np.arange(dim // 2, dtype=np.float64)
    inv_freq = base ** (-2.0 * k / dim)
    scaled = v[..., None] * inv_freq
    out = np.stack([np.sin(scaled), np.cos(scaled)], axis=-1)
    return out.reshape(v.shape + (dim,)).astype(dtype)


def sinusoid_graph(x: Tensor, dim: int, base: float = 10000.0) -> Tensor:
    """Differentiable version of sinusoid_np (same layout) for graph inputs."""
    k = np.arange(dim // 2, dtype=np.float64)
    inv_freq = (base ** (-2.0 * k / dim)).astype(x.dtype)
    scaled = ad.mul(ad.reshape(x, x.shape + (1,)), inv_freq)
    s = ad.reshape(ad.sin(scaled), scaled.shape + (1,))
    c = ad.reshape(ad.cos(scaled), scaled.shape + (1,))
    return ad.reshape(ad.concat([s, c], axis=-1), x.shape + (dim,))


def param_shapes(cfg: GnnConfig) -> Dict[str, tuple]:
    """Stable name -> shape map; iteration order is the storage order."""
    d, dt = cfg.hidden_dim, cfg.time_dim
    shapes: Dict[str, tuple] = {}
    if cfg.kind == "tsp":
        shapes["embed.node.w"] = (2 * d, d)
        shapes["embed.edge_dist.w"] = (d, d)
        shapes["embed.edge_state.w"] = (d, d)
    else:
        shapes["embed.node_state.w"] = (d, d)
    shapes["time.w1"] = (d, dt)
    shapes["time.w2"] = (dt, dt)
    for l in range(cfg.n_layers):
        p = f"layers.{l}."
        shapes[p + "node.w1"] = (d, d)
        shapes[p + "node.w2"] = (d, d)
        shapes[p + "edge.w3"] = (d, d)
        shapes[p + "edge.w4"] = (d, d)
        shapes[p + "edge.w5"] = (d, d)
        shapes[p + "time.w"] = (dt, d)
        shapes[p + "node_norm.gain"] = (d,)
        shapes[p + "node_norm.bias"] = (d,)
        shapes[p + "edge_norm.gain"] = (d,)
        shapes[p + "edge_norm.bias"] = (d,)
    shapes["head.w"] = (d, 2)
    shapes["head_norm.gain"] = (2,)
    shapes["head_norm.bias"] = (2,)
    return shapes


def init_params(cfg: GnnConfig, rng: np.random.Generator) -> Dict[str, np.ndarray]:
    """Uniform +-sqrt(6/(fan_in+fan_out)) weights; identity-ish norms.

    The head normalization gain starts at 0.1 so initial fields are close
    to uniform (predictions must not start saturated).  The two head
    columns start as exact negatives of each other: the head applies a
    relu before normalizing, and with independent columns there is a
    seed-dependent chance (~5% measured) that relu(entities @ head.w) is
    identically zero, leaving the whole trunk without gradient forever.
    Antisymmetric columns keep exactly one class channel live at every
    entity while preserving the per-entry weight distribution.
    """
    params: Dict[str, np.ndarray] = {}
    for name, shape in param_shapes(cfg).items():
        if name.endswith(".gain"):
            g = HEAD_NORM_INIT_GAIN if name == "head_norm.gain" else 1.0
            params[name] = np.full(shape, g, dtype=np.float32)
        elif name.endswith(".bias"):
            params[name] = np.zeros(shape, dtype=np.float32)
        elif name == "head.w":
            fan_in, fan_out = shape[0], shape[1]
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            column = rng.uniform(-bound, bound, size=(fan_in,)).astype(np.float32)
            params[name] = np.stack([-column, column], axis=1)
        else:
            fan_in, fan_out = shape[0], shape[1]
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            params[name] = rng.uniform(-bound, bound, size=shape).astype(np.float32)
    return params


class Model:
    """Trained (or initializing) network: config, weights, noise schedule.

    forward_calls counts network applications; samplers are certified
    against it (e.g. single-step sampling must cost exactly one call).
    """

    def __init__(
        self,
        config: GnnConfig,
        params: Dict[str, np.ndarray],
        schedule: NoiseSchedule,
        meta: Optional[dict] = None,
    ):
        expected = param_shapes(config)
        if list(params.keys()) != list(expected.keys()):
            raise ContractError("parameter names do not match the config")
        for name, shape in expected.items():
            if params[name].shape != shape:
                raise DimensionError(f"param {name} has shape {params[name].shape}, expected {shape}")
        self.config = config
        self.params = params
        self.schedule = schedule
        self.meta = dict(meta or {})
        self.forward_calls = 0

    def reset_counter(self) -> None:
        self.forward_calls = 0

    def params_as_tensors(self, requires_grad: bool = False, dtype=None) -> Dict[str, Tensor]:
        return {
            k: Tensor(v if dtype is None else v.astype(dtype), requires_grad=requires_grad,
                      dtype=dtype or v.dtype)
            for k, v in self.params.items()
        }

    def forward_batch(
        self,
        state: Tensor,
        ts: np.ndarray,
        insts: Sequence[Instance],
        params_t: Optional[Dict[str, Tensor]] = None,
    ) -> Tensor:
        """Field tensor (B, N, 2) for a batch of same-shape instances."""
        self.forward_calls += 1
        if params_t is None:
            params_t = self.params_as_tensors(requires_grad=False)
        return forward_graph(self.config, params_t, state, ts, insts)

    def predict(self, state_like, t: int, inst: Instance) -> np.ndarray:
        """Inference on one instance: returns the (N, 2) field as an array."""
        sel = _state_probs(state_like, inst)
        state = Tensor(sel[None, :], requires_grad=False)
        out = self.forward_batch(state, np.array([t]), [inst])
        return out.data[0]


def _state_probs(state_like, inst: Instance) -> np.ndarray:
    N = num_entries(inst.kind, inst.n)
    if isinstance(state_like, BernoulliField):
        if (state_like.kind, state_like.n) != (inst.kind, inst.n):
            raise ContractError("field does not match instance")
        return np.asarray(state_like.selected, dtype=np.float32)
    if isinstance(state_like, DecisionState):
        if (state_like.kind, state_like.n) != (inst.kind, inst.n):
            raise ContractError("state does not match instance")
        return state_like.selected.astype(np.float32)
    arr = np.asarray(state_like, dtype=np.float32)
    if arr.shape == (N, 2):
        arr = arr[:, 1]
    if arr.shape != (N,):
        raise DimensionError(f"state shape {arr.shape} invalid, expected ({N},)")
    return arr


def forward_graph(
    cfg: GnnConfig,
    params: Dict[str, Tensor],
    state: Tensor,
    ts: np.ndarray,
    insts: Sequence[Instance],
) -> Tensor:
    """Build the forward computation graph.

    state: (B, N) inclusion probabilities (hard states are 0/1 floats).
    ts: (B,) integer noise levels, one per batch element.
    insts: B instances sharing kind and n.
    """
    if not insts:
        raise ContractError("empty batch")
    n = insts[0].n
    B = len(insts)
    for inst in insts:
        if inst.kind != cfg.kind or inst.n != n:
            raise ContractError("batch instances must share kind and node count")
    N = num_entries(cfg.kind, n)
    if state.shape != (B, N):
        raise DimensionError(f"state shape {state.shape}, expected ({B}, {N})")
    ts = np.asarray(ts)
    if ts.shape != (B,):
        raise DimensionError(f"ts shape {ts.shape}, expected ({B},)")
    if ts.min() < 1:
        raise ContractError("noise levels must be >= 1")
    d = cfg.hidden_dim
    dtype = params["head.w"].dtype

    def norm(h: Tensor, gain: Tensor, bias: Tensor) -> Tensor:
        if cfg.norm == "feature":
            return ad.layer_norm(h, gain, bias)
        # entity axes: everything between the batch axis and the channels
        return ad.channel_norm(h, gain, bias, axes=tuple(range(1, h.data.ndim - 1)))

    # noise-level embedding: t0 = W2 relu(W1 t_sin)
    t_sin = Tensor(sinusoid_np(ts.astype(np.float64), d, cfg.sinusoid_base, dtype))
    t0 = ad.matmul(ad.relu(ad.matmul(t_sin, params["time.w1"])), params["time.w2"])
    t_relu = ad.relu(t0)  # (B, dt)

    if cfg.kind == "tsp":
        coords = np.stack([inst.coords for inst in insts])  # (B, n, 2)
        dists = np.stack([inst.dist for inst in insts])  # (B, n, n)
        coord_emb = sinusoid_np(coords, d, cfg.sinusoid_base, dtype).reshape(B, n, 2 * d)
        x = ad.matmul(Tensor(coord_emb), params["embed.node.w"])
        dist_emb = sinusoid_np(dists.reshape(B, N), d, cfg.sinusoid_base, dtype)
        e_dist = ad.matmul(Tensor(dist_emb), params["embed.edge_dist.w"])
        e_state = ad.matmul(sinusoid_graph(state, d, cfg.sinusoid_base), params["embed.edge_state.w"])
        e = ad.reshape(ad.add(e_dist, e_state), (B, n, n, d))
        mask = Tensor((1.0 - np.eye(n))[None, :, :, None].astype(dtype), dtype=dtype)
    else:
        x = ad.matmul(sinusoid_graph(state, d, cfg.sinusoid_base), params["embed.node_state.w"])
        e = Tensor(np.zeros((B, n, n, d), dtype=dtype), dtype=dtype)
        adj = np.stack([inst.adjacency for inst in insts])[..., None].astype(dtype)
        mask = Tensor(adj, dtype=dtype)

    for l in range(cfg.n_layers):
        p = f"layers.{l}."
        try:
            t_term = ad.matmul(t_relu, params[p + "time.w"])  # (B, d)
            sig = ad.mul(ad.sigmoid(e), mask)
            denom = ad.add(ad.reduce_sum(sig, axis=2, keepdims=True), GATING_EPS)
            eta = ad.div(sig, denom)
            w2x = ad.reshape(ad.matmul(x, params[p + "node.w2"]), (B, 1, n, d))
            agg = ad.reduce_sum(ad.mul(eta, w2x), axis=2)
            u = ad.add(ad.matmul(x, params[p + "node.w1"]), agg)
            u = norm(u, params[p + "node_norm.gain"], params[p + "node_norm.bias"])
            node_res = ad.relu(u)
            if cfg.kind == "mis":
                node_res = ad.add(node_res, ad.reshape(t_term, (B, 1, d)))

            v = ad.add(
                ad.add(
                    ad.matmul(e, params[p + "edge.w3"]),
                    ad.reshape(ad.matmul(x, params[p + "edge.w4"]), (B, n, 1, d)),
                ),
                ad.reshape(ad.matmul(x, params[p + "edge.w5"]), (B, 1, n, d)),
            )
            v = norm(v, params[p + "edge_norm.gain"], params[p + "edge_norm.bias"])
            edge_res = ad.relu(v)
            if cfg.kind == "tsp":
                edge_res = ad.add(edge_res, ad.reshape(t_term, (B, 1, 1, d)))

            x = ad.add(x, node_res)
            e = ad.add(e, edge_res)
        except NumericError as err:
            raise NumericError(f"layer {l}: {err}") from err

    try:
        entities = ad.reshape(e, (B, N, d)) if cfg.kind == "tsp" else x
        h = ad.relu(ad.matmul(entities, params["head.w"]))
        normed = norm(h, params["head_norm.gain"], params["head_norm.bias"])
        return ad.softmax_rows(normed)
    except NumericError as err:
        raise NumericError(f"output head: {err}") from err
