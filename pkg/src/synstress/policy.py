"""Gaussian-MLP policy: closed-form forward pass, log-probability, and
hand-derived reverse-mode gradients with respect to both the input state and
the parameters.

Parameter layout of the flat vector ``theta`` (fixed contract):
layer 0 weights (row-major, shape (out, in)), layer 0 biases, layer 1
weights, layer 1 biases, ..., output layer weights, output layer biases.
``log_std`` (one state-independent entry per action dimension) is stored
separately and is appended to the flat vector only when explicitly requested
via ``include_log_std``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from ._kernels import mlp_forward as _k_forward
from ._kernels import mlp_state_grad as _k_state_grad
from .numerics import RngStream, derive, gaussian_draw

LOG_2PI = 1.8378770664093453

# hidden sizes for the large preset and the fast desk-scale default
LARGE_HIDDEN = (512, 256, 128)
DESK_HIDDEN = (64, 64)


@dataclass(frozen=True)
class MlpSpec:
    """Architecture of a ReLU MLP head.

    The default hidden stack is the large preset; pass DESK_HIDDEN for the
    fast desk-scale variant.  ``hidden`` may be empty, giving a purely
    linear map (useful for toy networks with hand-computable gradients).
    """

    input_dim: int
    hidden: tuple[int, ...] = LARGE_HIDDEN
    output_dim: int = 1
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(w) for w in self.hidden))
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError("input_dim and output_dim must be >= 1")
        if any(w < 1 for w in self.hidden):
            raise ValueError(f"hidden widths must be >= 1, got {self.hidden}")
        if self.activation != "relu":
            raise ValueError(f"unsupported activation: {self.activation!r}")

    @property
    def layer_dims(self) -> tuple[tuple[int, int], ...]:
        """(in, out) per layer, hidden layers first, output layer last."""
        widths = (self.input_dim, *self.hidden, self.output_dim)
        return tuple(zip(widths[:-1], widths[1:]))

    @property
    def param_count(self) -> int:
        return sum(i * o + o for i, o in self.layer_dims)


class _Layout(NamedTuple):
    w_offs: np.ndarray
    b_offs: np.ndarray
    in_dims: np.ndarray
    out_dims: np.ndarray


_LAYOUTS: dict[MlpSpec, _Layout] = {}

# C long to match the compiled kernel's memoryview signature
_IDX_DTYPE = np.dtype("l")


def _layout(spec: MlpSpec) -> _Layout:
    cached = _LAYOUTS.get(spec)
    if cached is not None:
        return cached
    w_offs, b_offs, in_dims, out_dims = [], [], [], []
    off = 0
    for n_in, n_out in spec.layer_dims:
        w_offs.append(off)
        off += n_in * n_out
        b_offs.append(off)
        off += n_out
        in_dims.append(n_in)
        out_dims.append(n_out)
    layout = _Layout(
        np.array(w_offs, dtype=_IDX_DTYPE),
        np.array(b_offs, dtype=_IDX_DTYPE),
        np.array(in_dims, dtype=_IDX_DTYPE),
        np.array(out_dims, dtype=_IDX_DTYPE),
    )
    _LAYOUTS[spec] = layout
    return layout


@dataclass(frozen=True)
class PolicyParams:
    """Immutable policy parameters: flat theta plus per-dimension log_std."""

    spec: MlpSpec
    theta: np.ndarray
    log_std: np.ndarray

    def __post_init__(self):
        theta = np.ascontiguousarray(self.theta, dtype=np.float64)
        log_std = np.ascontiguousarray(self.log_std, dtype=np.float64)
        if theta.shape != (self.spec.param_count,):
            raise ValueError(
                f"theta length {theta.size} != expected {self.spec.param_count}"
            )
        if log_std.shape != (self.spec.output_dim,):
            raise ValueError(
                f"log_std length {log_std.size} != output_dim {self.spec.output_dim}"
            )
        if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(log_std))):
            raise ValueError("policy parameters must be finite")
        theta.flags.writeable = False
        log_std.flags.writeable = False
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "log_std", log_std)


@dataclass(frozen=True)
class GaussianAction:
    """A sampled action with the distribution moments that produced it."""

    mean: np.ndarray
    log_std: np.ndarray
    sampled: np.ndarray


def layer_views(p: PolicyParams) -> list[tuple[np.ndarray, np.ndarray]]:
    """(W, b) views into theta, W of shape (out, in)."""
    lay = _layout(p.spec)
    out = []
    for l in range(len(lay.in_dims)):
        n_in = int(lay.in_dims[l])
        n_out = int(lay.out_dims[l])
        w = p.theta[lay.w_offs[l] : lay.w_offs[l] + n_out * n_in].reshape(n_out, n_in)
        b = p.theta[lay.b_offs[l] : lay.b_offs[l] + n_out]
        out.append((w, b))
    return out


def with_theta(p: PolicyParams, theta: np.ndarray) -> PolicyParams:
    """Same spec and log_std, new flat parameter vector."""
    return replace(p, theta=theta)


def forward_mean(p: PolicyParams, s: np.ndarray) -> np.ndarray:
    """Deterministic action mean mu(s)."""
    s = np.ascontiguousarray(s, dtype=np.float64)
    if s.shape != (p.spec.input_dim,):
        raise ValueError(
            f"state length {s.size} != input_dim {p.spec.input_dim}"
        )
    lay = _layout(p.spec)
    return _k_forward(p.theta, lay.w_offs, lay.b_offs, lay.in_dims, lay.out_dims, s)


def sample_action(p: PolicyParams, s: np.ndarray, rng: RngStream) -> GaussianAction:
    """Draw a ~ N(mu(s), diag(exp(2 log_std))) from the given stream."""
    mean = forward_mean(p, s)
    z = gaussian_draw(rng, p.spec.output_dim)
    sampled = mean + np.exp(p.log_std) * z
    return GaussianAction(mean=mean, log_std=p.log_std, sampled=sampled)


def gaussian_log_prob(mean: np.ndarray, log_std: np.ndarray, a: np.ndarray) -> float:
    """Diagonal-Gaussian log density without recomputing the mean."""
    z = (a - mean) * np.exp(-log_std)
    return float(-0.5 * np.dot(z, z) - np.sum(log_std) - 0.5 * mean.size * LOG_2PI)


def log_prob(p: PolicyParams, s: np.ndarray, a: np.ndarray) -> float:
    """Diagonal-Gaussian log density of action a at state s."""
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (p.spec.output_dim,):
        raise ValueError(f"action length {a.size} != output_dim {p.spec.output_dim}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(s))):
        raise ValueError("non-finite inputs to log_prob")
    return gaussian_log_prob(forward_mean(p, s), p.log_std, a)


def grad_state_neglogprob(p: PolicyParams, s: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Exact gradient of -log pi(a|s) with respect to s (a, params held fixed)."""
    s = np.ascontiguousarray(s, dtype=np.float64)
    a = np.ascontiguousarray(a, dtype=np.float64)
    if s.shape != (p.spec.input_dim,):
        raise ValueError(f"state length {s.size} != input_dim {p.spec.input_dim}")
    if a.shape != (p.spec.output_dim,):
        raise ValueError(f"action length {a.size} != output_dim {p.spec.output_dim}")
    lay = _layout(p.spec)
    nll, grad = _k_state_grad(
        p.theta, lay.w_offs, lay.b_offs, lay.in_dims, lay.out_dims, p.log_std, s, a
    )
    if not np.isfinite(nll):
        raise ValueError("non-finite intermediate in state gradient")
    return grad


# ---------------------------------------------------------------------------
# batched paths used by PPO updates


class Minibatch(NamedTuple):
    """One update minibatch of rollout data."""

    states: np.ndarray      # (n, input_dim)
    actions: np.ndarray     # (n, output_dim)
    old_log_probs: np.ndarray  # (n,)
    advantages: np.ndarray  # (n,)


def forward_mean_batch(p: PolicyParams, states: np.ndarray) -> np.ndarray:
    """mu(s) for a batch of states, shape (n, output_dim)."""
    mu, _ = _forward_cache(p, states)
    return mu


def log_prob_batch(p: PolicyParams, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
    mu, _ = _forward_cache(p, states)
    z = (actions - mu) * np.exp(-p.log_std)
    return (
        -0.5 * np.sum(z * z, axis=1)
        - np.sum(p.log_std)
        - 0.5 * p.spec.output_dim * LOG_2PI
    )


def _forward_cache(p: PolicyParams, states: np.ndarray):
    """Batched forward pass keeping post-activations for backprop."""
    hs = [np.asarray(states, dtype=np.float64)]
    views = layer_views(p)
    last = len(views) - 1
    h = hs[0]
    for l, (w, b) in enumerate(views):
        z = h @ w.T + b
        h = np.maximum(z, 0.0) if l < last else z
        hs.append(h)
    return hs[-1], hs


def _backprop_params(p: PolicyParams, hs: list[np.ndarray], g_out: np.ndarray) -> np.ndarray:
    """Accumulate d(scalar)/d(theta) given d(scalar)/d(output) for a batch.

    hs are the cached per-layer post-activations (hs[0] = states), g_out has
    shape (n, output_dim).  Returns a flat gradient in theta layout.
    """
    views = layer_views(p)
    lay = _layout(p.spec)
    grad = np.zeros_like(p.theta)
    delta = g_out
    for l in range(len(views) - 1, -1, -1):
        w, _ = views[l]
        n_in = int(lay.in_dims[l])
        n_out = int(lay.out_dims[l])
        gw = delta.T @ hs[l]
        gb = delta.sum(axis=0)
        grad[lay.w_offs[l] : lay.w_offs[l] + n_out * n_in] = gw.reshape(-1)
        grad[lay.b_offs[l] : lay.b_offs[l] + n_out] = gb
        if l > 0:
            delta = (delta @ w) * (hs[l] > 0.0)
    return grad


class ObjectiveGrad(NamedTuple):
    """Ascent gradient of the clipped surrogate, in PolicyParams layout."""

    d_theta: np.ndarray
    d_log_std: np.ndarray
    objective: float
    mean_ratio: float
    clip_fraction: float
    entropy: float


def grad_params_objective(p: PolicyParams, batch: Minibatch, cfg) -> ObjectiveGrad:
    """Gradient of the PPO clipped surrogate plus entropy bonus.

    ``cfg`` supplies ``clip`` and ``entropy_coef``.  The returned gradient
    points in the ascent direction of

        mean_i min(r_i A_i, clip(r_i, 1-c, 1+c) A_i) + entropy_coef * H(pi)

    with r_i = exp(log pi(a_i|s_i) - old_log_prob_i).
    """
    n = batch.states.shape[0]
    if n == 0:
        raise ValueError("empty minibatch")
    clip = float(cfg.clip)
    entropy_coef = float(cfg.entropy_coef)

    mu, hs = _forward_cache(p, batch.states)
    inv_var = np.exp(-2.0 * p.log_std)
    resid = batch.actions - mu
    logp = (
        -0.5 * np.sum(resid * resid * inv_var, axis=1)
        - np.sum(p.log_std)
        - 0.5 * p.spec.output_dim * LOG_2PI
    )
    adv = batch.advantages
    with np.errstate(over="ignore", invalid="ignore"):
        # a diverged ratio yields inf/nan here; the caller's finite check
        # turns that into an abort rather than a warning storm
        ratio = np.exp(logp - batch.old_log_probs)
        unclipped = ratio * adv
        clipped = np.clip(ratio, 1.0 - clip, 1.0 + clip) * adv
        objective = float(np.mean(np.minimum(unclipped, clipped)))

        # gradient flows through the unclipped branch wherever it attains
        # the min (ties included: inside the trust region both coincide)
        active = unclipped <= clipped
        dobj_dlogp = np.where(active, ratio * adv, 0.0) / n

        # d logp / d mu = (a - mu) / sigma^2
        g_mu = dobj_dlogp[:, None] * resid * inv_var
        d_theta = _backprop_params(p, hs, g_mu)

        # d logp / d log_std = resid^2 / sigma^2 - 1; entropy adds +1 per dim
        d_log_std = np.sum(
            dobj_dlogp[:, None] * (resid * resid * inv_var - 1.0), axis=0
        ) + entropy_coef
    entropy = float(np.sum(p.log_std) + 0.5 * p.spec.output_dim * (1.0 + LOG_2PI))

    return ObjectiveGrad(
        d_theta=d_theta,
        d_log_std=np.asarray(d_log_std, dtype=np.float64),
        objective=objective + entropy_coef * entropy,
        mean_ratio=float(np.mean(ratio)),
        clip_fraction=float(np.mean(np.abs(ratio - 1.0) > clip)),
        entropy=entropy,
    )


# ---------------------------------------------------------------------------
# flat-vector round trip


def flatten(p: PolicyParams, include_log_std: bool = False) -> np.ndarray:
    """theta, optionally with log_std appended."""
    if include_log_std:
        return np.concatenate([p.theta, p.log_std])
    return p.theta.copy()


def unflatten(
    spec: MlpSpec,
    flat: np.ndarray,
    log_std: np.ndarray | None = None,
    include_log_std: bool = False,
) -> PolicyParams:
    """Inverse of flatten; rejects length mismatches."""
    flat = np.asarray(flat, dtype=np.float64)
    n = spec.param_count
    if include_log_std:
        if flat.size != n + spec.output_dim:
            raise ValueError(
                f"flat length {flat.size} != {n} + output_dim {spec.output_dim}"
            )
        return PolicyParams(spec=spec, theta=flat[:n], log_std=flat[n:])
    if flat.size != n:
        raise ValueError(f"flat length {flat.size} != expected {n}")
    if log_std is None:
        log_std = np.zeros(spec.output_dim)
    return PolicyParams(spec=spec, theta=flat, log_std=log_std)


# ---------------------------------------------------------------------------
# initialization


def _orthogonal(rng: RngStream, rows: int, cols: int, gain: float) -> np.ndarray:
    a = gaussian_draw(rng, rows * cols).reshape(rows, cols)
    if rows < cols:
        q, r = np.linalg.qr(a.T)
        q = (q * np.sign(np.diag(r))).T
    else:
        q, r = np.linalg.qr(a)
        q = q * np.sign(np.diag(r))
    return gain * q[:rows, :cols]


def init_policy_params(
    spec: MlpSpec, rng: RngStream, head_gain: float = 0.01
) -> PolicyParams:
    """Orthogonal weights (sqrt(2) gain on hidden layers), small nonzero
    Gaussian biases, log_std = 0.

    Biases are drawn from N(0, 0.01^2) rather than set to zero so every
    parameter has a well-defined magnitude for threshold analysis.
    """
    lay_dims = spec.layer_dims
    chunks = []
    last = len(lay_dims) - 1
    for l, (n_in, n_out) in enumerate(lay_dims):
        gain = head_gain if l == last else np.sqrt(2.0)
        w = _orthogonal(derive(rng, "w", l), n_out, n_in, gain)
        b = 0.01 * gaussian_draw(derive(rng, "b", l), n_out)
        chunks.append(w.reshape(-1))
        chunks.append(b)
    theta = np.concatenate(chunks)
    return PolicyParams(spec=spec, theta=theta, log_std=np.zeros(spec.output_dim))
