"""Gradient-based observation attacks (FGSM, BIM, PGD) and adversarial
evaluation over an epsilon grid.

The attack loss is the negative log-probability of the action the stochastic
policy draws at the current observation.  The action is *sampled* rather
than taken at the mean: at a = mu(s) the Gaussian score with respect to s
vanishes identically, so the deterministic choice would produce a zero
attack direction everywhere.

All perturbations live in the infinity-norm ball of radius epsilon around
the clean observation.  sign(0) is taken as 0, so no budget is spent on
coordinates with no gradient signal.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .envs import EnvSpec, rollout_return
from .numerics import RngStream, derive, gaussian_draw, uniform_draw
from .policy import PolicyParams, forward_mean, grad_state_neglogprob, log_prob

ATTACK_METHODS = ("fgsm", "bim", "pgd")


@dataclass(frozen=True)
class AttackSpec:
    """Attack method plus budget and iteration schedule.

    steps/step_size apply to the iterative methods only; step_size defaults
    to epsilon/steps so the budget is always reachable.
    """

    method: str
    epsilon: float
    steps: int = 10
    step_size: Optional[float] = None
    rng_seed: int = 0

    def __post_init__(self):
        if self.method not in ATTACK_METHODS:
            raise ValueError(
                f"unknown attack method {self.method!r}; known: {ATTACK_METHODS}"
            )
        if self.epsilon < 0.0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.step_size is None:
            object.__setattr__(
                self, "step_size", self.epsilon / self.steps if self.steps else 0.0
            )
        if self.method in ("bim", "pgd"):
            if self.step_size * self.steps < self.epsilon - 1e-12:
                raise ValueError(
                    f"step_size*steps = {self.step_size * self.steps} cannot reach "
                    f"epsilon = {self.epsilon}"
                )


@dataclass(frozen=True)
class EpsilonGrid:
    """Uniform ascending stress magnitudes from eps_min to eps_max."""

    eps_min: float
    eps_max: float
    delta_eps: float
    values: np.ndarray

    @classmethod
    def from_bounds(cls, eps_min: float, eps_max: float, delta_eps: float) -> "EpsilonGrid":
        if eps_min < 0 or eps_max < eps_min:
            raise ValueError(f"need 0 <= eps_min <= eps_max, got [{eps_min}, {eps_max}]")
        if eps_max == eps_min:
            values = np.array([eps_min])
            return cls(eps_min, eps_max, delta_eps=0.0, values=values)
        if delta_eps <= 0:
            raise ValueError(f"delta_eps must be > 0, got {delta_eps}")
        n = (eps_max - eps_min) / delta_eps
        n_round = round(n)
        if n_round < 1 or abs(n - n_round) > 1e-9:
            raise ValueError(
                f"eps range [{eps_min}, {eps_max}] is not a whole number of "
                f"delta_eps = {delta_eps} steps"
            )
        return cls(eps_min, eps_max, delta_eps, np.linspace(eps_min, eps_max, n_round + 1))


class PerturbationAudit:
    """Running maxima of observed perturbation magnitudes.

    max_linf is the largest infinity-norm of any applied perturbation;
    fgsm_max_offgrid is the largest distance of an FGSM delta component from
    the exact set {-eps, 0, +eps}.
    """

    __slots__ = ("max_linf", "fgsm_max_offgrid", "count")

    def __init__(self):
        self.max_linf = 0.0
        self.fgsm_max_offgrid = 0.0
        self.count = 0

    def record(self, delta: np.ndarray, epsilon: float, is_fgsm: bool):
        self.count += 1
        linf = float(np.max(np.abs(delta))) if delta.size else 0.0
        if linf > self.max_linf:
            self.max_linf = linf
        if is_fgsm:
            offgrid = float(
                np.max(
                    np.minimum(
                        np.abs(delta),
                        np.minimum(np.abs(delta - epsilon), np.abs(delta + epsilon)),
                    )
                )
            )
            if offgrid > self.fgsm_max_offgrid:
                self.fgsm_max_offgrid = offgrid

    def merge(self, other: "PerturbationAudit"):
        self.max_linf = max(self.max_linf, other.max_linf)
        self.fgsm_max_offgrid = max(self.fgsm_max_offgrid, other.fgsm_max_offgrid)
        self.count += other.count


def attack_loss(p: PolicyParams, s: np.ndarray, a: np.ndarray) -> float:
    """Loss the attacker ascends: -log pi(a|s)."""
    return -log_prob(p, s, a)


def _sampled_action(p: PolicyParams, s: np.ndarray, rng: RngStream) -> np.ndarray:
    mu = forward_mean(p, s)
    return mu + np.exp(p.log_std) * gaussian_draw(rng, p.spec.output_dim)


def fgsm(p: PolicyParams, s: np.ndarray, spec: AttackSpec, rng: RngStream) -> np.ndarray:
    """Single-step perturbation s + epsilon * sign(grad_s of the loss)."""
    return _fgsm_with_delta(p, s, spec, rng)[0]


def _fgsm_with_delta(p, s, spec, rng):
    if spec.method != "fgsm":
        raise ValueError(f"fgsm called with method {spec.method!r}")
    a = _sampled_action(p, s, derive(rng, "action", 0))
    g = grad_state_neglogprob(p, s, a)
    delta = spec.epsilon * np.sign(g)  # components exactly in {-eps, 0, +eps}
    return s + delta, delta


def iterative_attack(
    p: PolicyParams, s: np.ndarray, spec: AttackSpec, rng: RngStream
) -> np.ndarray:
    """BIM/PGD: repeated signed-gradient steps projected onto the eps-ball.

    PGD starts from a uniform random point in the ball, BIM from s itself;
    the loss action is re-sampled at each iterate.
    """
    if spec.method not in ("bim", "pgd"):
        raise ValueError(f"iterative_attack called with method {spec.method!r}")
    lo = s - spec.epsilon
    hi = s + spec.epsilon
    x = s
    if spec.method == "pgd":
        init = uniform_draw(derive(rng, "init"), s.size, -spec.epsilon, spec.epsilon)
        x = s + init
    for k in range(spec.steps):
        a = _sampled_action(p, x, derive(rng, "action", k))
        g = grad_state_neglogprob(p, x, a)
        x = np.clip(x + spec.step_size * np.sign(g), lo, hi)
    return x


def perturb_with_delta(
    p: PolicyParams, s: np.ndarray, spec: AttackSpec, rng: RngStream
) -> tuple[np.ndarray, np.ndarray]:
    """Perturbed state plus the applied perturbation (exact for fgsm)."""
    if spec.method == "fgsm":
        return _fgsm_with_delta(p, s, spec, rng)
    adv = iterative_attack(p, s, spec, rng)
    return adv, adv - s


def perturb(p: PolicyParams, s: np.ndarray, spec: AttackSpec, rng: RngStream) -> np.ndarray:
    return perturb_with_delta(p, s, spec, rng)[0]


def make_transform(
    p: PolicyParams,
    spec: AttackSpec,
    episode_seed: int,
    audit: Optional[PerturbationAudit] = None,
):
    """Per-episode observation transform for rollout_return.

    The stream for each step is derived from (attack rng_seed, episode seed,
    step index), so results are independent of evaluation order.  Gradients
    are taken through ``p`` itself: when a filtered policy is evaluated the
    attacker differentiates the filtered network.
    """
    root = derive(RngStream(seed=spec.rng_seed), "attack", episode_seed)

    def transform(obs: np.ndarray, t: int) -> np.ndarray:
        adv, delta = perturb_with_delta(p, obs, spec, derive(root, "step", t))
        if audit is not None:
            audit.record(delta, spec.epsilon, spec.method == "fgsm")
        return adv

    return transform


def adversarial_evaluate(
    p: PolicyParams,
    env_spec: EnvSpec,
    spec: AttackSpec,
    eval_seeds: list[int],
    audit: Optional[PerturbationAudit] = None,
) -> float:
    """Mean return when every observation is attacked before the policy
    sees it (the environment still advances from the true state)."""
    if not eval_seeds:
        raise ValueError("eval_seeds must be nonempty")
    returns = [
        rollout_return(env_spec, p, seed, make_transform(p, spec, seed, audit))
        for seed in eval_seeds
    ]
    return float(np.mean(returns))
