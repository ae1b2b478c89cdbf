"""PPO trainer (rollout collection, GAE, clipped-surrogate updates) and the
canonical evaluator that defines J(pi) for every downstream score.

Training is sequential and fully seeded: rollouts use stochastic actions,
evaluation always uses deterministic mean actions over a fixed seed list.
Episode ends (including horizon truncation) are treated as terminal for
advantage bootstrapping.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import policy as pol
from .envs import EnvSpec, ObsTransform, reset, rollout_return, step
from .numerics import RngStream, derive, permutation
from .policy import Minibatch, MlpSpec, PolicyParams

# value network parameters reuse PolicyParams with a scalar head; its
# log_std is unused
ValueParams = PolicyParams


class TrainingDiverged(RuntimeError):
    """Raised when an update produces a non-finite loss or parameter."""


@dataclass
class PpoConfig:
    learning_rate: float = 1e-4
    batch_size: int = 128
    clip: float = 0.2
    gamma: float = 0.99
    gae_lambda: float = 0.95
    rollout_len: int = 2048
    epochs_per_update: int = 10
    entropy_coef: float = 0.0
    value_coef: float = 0.5
    total_steps: int = 100_000
    normalize_advantage: bool = True

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise ValueError(f"gae_lambda must be in [0, 1], got {self.gae_lambda}")
        if self.clip <= 0.0:
            raise ValueError(f"clip must be > 0, got {self.clip}")
        if self.batch_size > self.rollout_len:
            raise ValueError(
                f"batch_size {self.batch_size} exceeds rollout_len {self.rollout_len}"
            )


@dataclass
class RolloutBuffer:
    """Per-step rollout records plus GAE outputs."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    log_probs: np.ndarray
    dones: np.ndarray
    last_value: float = 0.0
    last_done: bool = True
    advantages: Optional[np.ndarray] = None
    returns: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return self.states.shape[0]


def compute_gae(buffer: RolloutBuffer, gamma: float, lam: float):
    """Standard GAE(lambda) recursion; returns (advantages, returns).

    dones[t] marks that the episode ended at step t, so no value bootstraps
    across it.  The final step bootstraps from buffer.last_value unless
    buffer.last_done.
    """
    n = len(buffer)
    if n == 0:
        raise ValueError("empty rollout buffer")
    advantages = np.zeros(n)
    last_gae = 0.0
    for t in range(n - 1, -1, -1):
        nonterminal = 0.0 if buffer.dones[t] else 1.0
        next_value = buffer.last_value if t == n - 1 else buffer.values[t + 1]
        delta = buffer.rewards[t] + gamma * next_value * nonterminal - buffer.values[t]
        last_gae = delta + gamma * lam * nonterminal * last_gae
        advantages[t] = last_gae
    returns = advantages + buffer.values
    buffer.advantages = advantages
    buffer.returns = returns
    return advantages, returns


@dataclass
class AdamState:
    """Adam moment estimates for one flat parameter vector (minimizing)."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-5

    @classmethod
    def like(cls, x: np.ndarray) -> "AdamState":
        return cls(m=np.zeros_like(x), v=np.zeros_like(x))

    def update(self, grad: np.ndarray, lr: float) -> np.ndarray:
        """Step to subtract from the parameters for a descent gradient."""
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        return lr * m_hat / (np.sqrt(v_hat) + self.eps)


class UpdateDiagnostics(NamedTuple):
    mean_ratio: float
    clip_fraction: float
    policy_objective: float
    value_loss: float
    entropy: float
    n_minibatches: int


def _value_grad(v: ValueParams, states: np.ndarray, targets: np.ndarray):
    """Gradient of 0.5 * mean (V(s) - target)^2 and the loss value."""
    pred, hs = pol._forward_cache(v, states)
    err = pred[:, 0] - targets
    loss = 0.5 * float(np.mean(err * err))
    g_out = (err / err.size)[:, None]
    return pol._backprop_params(v, hs, g_out), loss


def ppo_update(
    p: PolicyParams,
    v: ValueParams,
    buffer: RolloutBuffer,
    cfg: PpoConfig,
    rng: RngStream,
    policy_opt: Optional[AdamState] = None,
    value_opt: Optional[AdamState] = None,
) -> tuple[PolicyParams, ValueParams, UpdateDiagnostics]:
    """epochs_per_update passes of minibatch ascent on the clipped surrogate
    and descent on the value MSE."""
    if buffer.advantages is None or buffer.returns is None:
        raise ValueError("buffer advantages must be computed before updating")
    n = len(buffer)
    theta = p.theta.copy()
    log_std = p.log_std.copy()
    v_theta = v.theta.copy()
    if policy_opt is None:
        policy_opt = AdamState.like(np.concatenate([theta, log_std]))
    if value_opt is None:
        value_opt = AdamState.like(v_theta)

    stats: list[tuple[float, float, float, float, float]] = []
    lr = cfg.learning_rate
    for epoch in range(cfg.epochs_per_update):
        order = permutation(derive(rng, "shuffle", epoch), n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            adv = buffer.advantages[idx]
            if cfg.normalize_advantage and idx.size > 1:
                adv = (adv - adv.mean()) / (adv.std() + 1e-8)
            mb = Minibatch(
                states=buffer.states[idx],
                actions=buffer.actions[idx],
                old_log_probs=buffer.log_probs[idx],
                advantages=adv,
            )
            cur = pol.PolicyParams(spec=p.spec, theta=theta, log_std=log_std)
            g = pol.grad_params_objective(cur, mb, cfg)
            vg, v_loss = _value_grad(
                pol.PolicyParams(spec=v.spec, theta=v_theta, log_std=v.log_std),
                mb.states,
                buffer.returns[idx],
            )
            if not (
                math.isfinite(g.objective)
                and math.isfinite(v_loss)
                and np.all(np.isfinite(g.d_theta))
                and np.all(np.isfinite(vg))
            ):
                raise TrainingDiverged(
                    f"non-finite loss in epoch {epoch}, minibatch at offset {start}"
                )
            # ascent on the surrogate: feed the negated gradient to Adam
            flat_g = np.concatenate([g.d_theta, g.d_log_std])
            step_vec = policy_opt.update(-flat_g, lr)
            theta = theta - step_vec[: theta.size]
            log_std = log_std - step_vec[theta.size :]
            v_theta = v_theta - value_opt.update(cfg.value_coef * vg, lr)
            stats.append(
                (g.mean_ratio, g.clip_fraction, g.objective, v_loss, g.entropy)
            )

    agg = np.array(stats)
    diag = UpdateDiagnostics(
        mean_ratio=float(agg[:, 0].mean()),
        clip_fraction=float(agg[:, 1].mean()),
        policy_objective=float(agg[:, 2].mean()),
        value_loss=float(agg[:, 3].mean()),
        entropy=float(agg[:, 4].mean()),
        n_minibatches=len(stats),
    )
    new_p = pol.PolicyParams(spec=p.spec, theta=theta, log_std=log_std)
    new_v = pol.PolicyParams(spec=v.spec, theta=v_theta, log_std=v.log_std)
    return new_p, new_v, diag


class CurvePoint(NamedTuple):
    iteration: int
    steps: int
    mean_return: float


@dataclass
class TrainResult:
    policy: PolicyParams
    value: ValueParams
    curve: list[CurvePoint] = field(default_factory=list)


def _value_forward(v: ValueParams, s: np.ndarray) -> float:
    return float(pol.forward_mean(v, s)[0])


def train(env_spec: EnvSpec, mlp_spec: MlpSpec, cfg: PpoConfig, seed: int) -> TrainResult:
    """Alternate rollout collection (stochastic actions) and PPO updates
    until total_steps environment steps have been collected."""
    if mlp_spec.input_dim != env_spec.state_dim or mlp_spec.output_dim != env_spec.action_dim:
        raise ValueError("mlp_spec dims do not match environment dims")
    root = RngStream(seed=seed)
    value_spec = MlpSpec(
        input_dim=mlp_spec.input_dim, hidden=mlp_spec.hidden, output_dim=1
    )
    p = pol.init_policy_params(mlp_spec, derive(root, "init", "policy"))
    v = pol.init_policy_params(value_spec, derive(root, "init", "value"), head_gain=1.0)
    policy_opt = AdamState.like(np.concatenate([p.theta, p.log_std]))
    value_opt = AdamState.like(v.theta)

    episode = 0
    st = reset(env_spec, derive(root, "reset", episode))
    ep_return = 0.0
    steps_done = 0
    iteration = 0
    last_mean_return = math.nan
    result = TrainResult(policy=p, value=v)

    while steps_done < cfg.total_steps:
        n = min(cfg.rollout_len, cfg.total_steps - steps_done)
        buf = RolloutBuffer(
            states=np.empty((n, env_spec.state_dim)),
            actions=np.empty((n, env_spec.action_dim)),
            rewards=np.empty(n),
            values=np.empty(n),
            log_probs=np.empty(n),
            dones=np.zeros(n, dtype=bool),
        )
        completed: list[float] = []
        for t in range(n):
            obs = st.observation
            act = pol.sample_action(p, obs, derive(root, "action", steps_done + t))
            tr = step(env_spec, st, act.sampled)
            buf.states[t] = obs
            buf.actions[t] = act.sampled
            buf.rewards[t] = tr.reward
            buf.values[t] = _value_forward(v, obs)
            buf.log_probs[t] = pol.gaussian_log_prob(act.mean, p.log_std, act.sampled)
            buf.dones[t] = tr.done
            ep_return += tr.reward
            if tr.done:
                completed.append(ep_return)
                ep_return = 0.0
                episode += 1
                st = reset(env_spec, derive(root, "reset", episode))
            else:
                st = tr.next_state
        buf.last_done = bool(buf.dones[n - 1])
        buf.last_value = 0.0 if buf.last_done else _value_forward(v, st.observation)

        compute_gae(buf, cfg.gamma, cfg.gae_lambda)
        p, v, _ = ppo_update(
            p, v, buf, cfg, derive(root, "update", iteration), policy_opt, value_opt
        )
        steps_done += n
        iteration += 1
        if completed:
            last_mean_return = float(np.mean(completed))
        result.curve.append(CurvePoint(iteration, steps_done, last_mean_return))

    result.policy = p
    result.value = v
    return result


def evaluate(
    p: PolicyParams,
    env_spec: EnvSpec,
    eval_seeds: list[int],
    obs_transform: Optional[ObsTransform] = None,
) -> float:
    """Mean cumulative reward over the seed list with deterministic mean
    actions; this single function defines every J(.) used by scoring."""
    if not eval_seeds:
        raise ValueError("eval_seeds must be nonempty")
    returns = [rollout_return(env_spec, p, s, obs_transform) for s in eval_seeds]
    return float(np.mean(returns))


def evaluate_per_seed(
    p: PolicyParams,
    env_spec: EnvSpec,
    eval_seeds: list[int],
    obs_transform: Optional[ObsTransform] = None,
) -> list[float]:
    """Per-seed returns in seed order (same rollouts as evaluate)."""
    if not eval_seeds:
        raise ValueError("eval_seeds must be nonempty")
    return [rollout_return(env_spec, p, s, obs_transform) for s in eval_seeds]
