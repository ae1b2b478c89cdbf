"""Self-contained deterministic continuous-control environments behind a
uniform functional interface: ``reset`` and ``step`` are pure functions of
their inputs, and all randomness lives in the reset draw.

Physics constants (fixed for reproducibility):

* pendulum swing-up: mass 1, length 1, g 10, dt 0.05, horizon 200,
  torque in [-2, 2], angular velocity clamped to [-8, 8];
  observation [cos phi, sin phi, phi_dot];
  reward -(phi^2 + 0.1 phi_dot^2 + 0.001 a^2) with phi wrapped to [-pi, pi].
* continuous cart-pole: cart mass 1, pole mass 0.1, half-length 0.5,
  g 9.8, force 10*a with a in [-1, 1], dt 0.02, horizon 500;
  observation [x, x_dot, phi, phi_dot];
  reward 1 - 0.01 a^2 per step while balanced; terminates when |x| > 2.4
  or |phi| > 0.21 rad.

Both integrate with semi-implicit Euler (velocity updated first, position
advanced with the new velocity).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .numerics import RngStream, derive, uniform_draw
from .policy import PolicyParams, forward_mean

ENV_IDS = ("pendulum", "cartpole")

ObsTransform = Callable[[np.ndarray, int], np.ndarray]


@dataclass(frozen=True)
class EnvSpec:
    id: str
    state_dim: int
    action_dim: int
    horizon: int
    action_low: np.ndarray
    action_high: np.ndarray
    dt: float

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        low = np.asarray(self.action_low, dtype=np.float64)
        high = np.asarray(self.action_high, dtype=np.float64)
        if not np.all(low < high):
            raise ValueError("action_low must be < action_high elementwise")
        object.__setattr__(self, "action_low", low)
        object.__setattr__(self, "action_high", high)


@dataclass(frozen=True)
class EnvState:
    observation: np.ndarray
    step_index: int
    done: bool


@dataclass(frozen=True)
class Transition:
    state: EnvState
    action: np.ndarray
    reward: float
    next_state: EnvState
    done: bool


# pendulum constants
_P_G = 10.0
_P_M = 1.0
_P_L = 1.0
_P_DT = 0.05
_P_HORIZON = 200
_P_MAX_TORQUE = 2.0
_P_MAX_SPEED = 8.0

# cart-pole constants
_C_G = 9.8
_C_MASS_CART = 1.0
_C_MASS_POLE = 0.1
_C_HALF_LEN = 0.5
_C_FORCE_MAG = 10.0
_C_DT = 0.02
_C_HORIZON = 500
_C_X_LIMIT = 2.4
_C_ANGLE_LIMIT = 0.21


def pendulum_spec() -> EnvSpec:
    return EnvSpec(
        id="pendulum",
        state_dim=3,
        action_dim=1,
        horizon=_P_HORIZON,
        action_low=np.array([-_P_MAX_TORQUE]),
        action_high=np.array([_P_MAX_TORQUE]),
        dt=_P_DT,
    )


def cartpole_spec() -> EnvSpec:
    return EnvSpec(
        id="cartpole",
        state_dim=4,
        action_dim=1,
        horizon=_C_HORIZON,
        action_low=np.array([-1.0]),
        action_high=np.array([1.0]),
        dt=_C_DT,
    )


def make_env(env_id: str) -> EnvSpec:
    if env_id == "pendulum":
        return pendulum_spec()
    if env_id == "cartpole":
        return cartpole_spec()
    raise ValueError(f"unknown environment id {env_id!r}; known: {ENV_IDS}")


def reset(spec: EnvSpec, rng: RngStream) -> EnvState:
    """Initial state drawn from the per-env start distribution."""
    if spec.id == "pendulum":
        u = uniform_draw(rng, 2)
        phi = -math.pi + 2.0 * math.pi * u[0]
        phi_dot = -1.0 + 2.0 * u[1]
        obs = np.array([math.cos(phi), math.sin(phi), phi_dot])
    elif spec.id == "cartpole":
        obs = uniform_draw(rng, 4, -0.05, 0.05)
    else:
        raise ValueError(f"unknown environment id {spec.id!r}")
    return EnvState(observation=obs, step_index=0, done=False)


def step(spec: EnvSpec, st: EnvState, a: np.ndarray) -> Transition:
    """One deterministic physics step; actions are clipped to bounds first."""
    if st.done:
        raise ValueError("cannot step a done state")
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    if a.size != spec.action_dim:
        raise ValueError(f"action length {a.size} != action_dim {spec.action_dim}")
    a = np.clip(a, spec.action_low, spec.action_high)

    if spec.id == "pendulum":
        obs, reward, terminated = _pendulum_step(st.observation, a)
    elif spec.id == "cartpole":
        obs, reward, terminated = _cartpole_step(st.observation, a)
    else:
        raise ValueError(f"unknown environment id {spec.id!r}")

    next_index = st.step_index + 1
    done = terminated or next_index >= spec.horizon
    nxt = EnvState(observation=obs, step_index=next_index, done=done)
    return Transition(state=st, action=a, reward=reward, next_state=nxt, done=done)


def _pendulum_step(obs: np.ndarray, a: np.ndarray):
    # phi recovered via atan2 is already wrapped to [-pi, pi]
    phi = math.atan2(obs[1], obs[0])
    phi_dot = float(obs[2])
    u = float(a[0])

    cost = phi * phi + 0.1 * phi_dot * phi_dot + 0.001 * u * u

    phi_dot_new = phi_dot + (
        3.0 * _P_G / (2.0 * _P_L) * math.sin(phi) + 3.0 / (_P_M * _P_L * _P_L) * u
    ) * _P_DT
    phi_dot_new = min(max(phi_dot_new, -_P_MAX_SPEED), _P_MAX_SPEED)
    phi_new = phi + phi_dot_new * _P_DT

    obs_new = np.array([math.cos(phi_new), math.sin(phi_new), phi_dot_new])
    return obs_new, -cost, False


def _cartpole_step(obs: np.ndarray, a: np.ndarray):
    x, x_dot, phi, phi_dot = (float(v) for v in obs)
    force = _C_FORCE_MAG * float(a[0])

    total_mass = _C_MASS_CART + _C_MASS_POLE
    pole_ml = _C_MASS_POLE * _C_HALF_LEN
    cos_phi = math.cos(phi)
    sin_phi = math.sin(phi)

    temp = (force + pole_ml * phi_dot * phi_dot * sin_phi) / total_mass
    phi_acc = (_C_G * sin_phi - cos_phi * temp) / (
        _C_HALF_LEN * (4.0 / 3.0 - _C_MASS_POLE * cos_phi * cos_phi / total_mass)
    )
    x_acc = temp - pole_ml * phi_acc * cos_phi / total_mass

    x_dot_new = x_dot + _C_DT * x_acc
    x_new = x + _C_DT * x_dot_new
    phi_dot_new = phi_dot + _C_DT * phi_acc
    phi_new = phi + _C_DT * phi_dot_new

    reward = 1.0 - 0.01 * float(a[0]) * float(a[0])
    terminated = abs(x_new) > _C_X_LIMIT or abs(phi_new) > _C_ANGLE_LIMIT
    obs_new = np.array([x_new, x_dot_new, phi_new, phi_dot_new])
    return obs_new, reward, terminated


def episode_stream(seed: int) -> RngStream:
    """Reset stream for one evaluation episode; depends only on the seed."""
    return derive(RngStream(seed=seed), "env-reset")


def rollout_return(
    spec: EnvSpec,
    p: PolicyParams,
    seed: int,
    obs_transform: Optional[ObsTransform] = None,
) -> float:
    """Cumulative reward of one episode under deterministic mean actions.

    ``obs_transform(obs, step_index)``, when given, is applied to each
    observation before the policy sees it; the environment itself always
    advances from the true state.
    """
    if p.spec.input_dim != spec.state_dim or p.spec.output_dim != spec.action_dim:
        raise ValueError(
            f"policy dims ({p.spec.input_dim}, {p.spec.output_dim}) do not match "
            f"env {spec.id!r} dims ({spec.state_dim}, {spec.action_dim})"
        )
    st = reset(spec, episode_stream(seed))
    total = 0.0
    while not st.done:
        obs = st.observation
        if obs_transform is not None:
            obs = obs_transform(obs, st.step_index)
        tr = step(spec, st, forward_mean(p, obs))
        total += tr.reward
        st = tr.next_state
    return total
