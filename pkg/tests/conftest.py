"""Shared fixtures; the expensive trained-policy and sweep fixtures are
session-scoped so the acceptance criteria can share one training run."""
from __future__ import annotations

import time
from types import SimpleNamespace

import numpy as np
import pytest

from synstress import envs, policy, ppo
from synstress.checkpoint import Checkpoint, TrainingMeta, save_checkpoint
from synstress.harness import run_combined_sweep
from synstress.numerics import RngStream
from synstress.sweepconfig import SweepConfig

EVAL_SEEDS = list(range(1, 11))


@pytest.fixture(scope="session")
def desk_pendulum():
    """Pendulum policy trained with the desk preset (64, 64) for 150k steps,
    plus a freshly initialized policy as the random baseline."""
    env_spec = envs.pendulum_spec()
    mlp_spec = policy.MlpSpec(input_dim=3, hidden=(64, 64), output_dim=1)
    cfg = ppo.PpoConfig(total_steps=150_000)
    t0 = time.perf_counter()
    result = ppo.train(env_spec, mlp_spec, cfg, seed=1)
    elapsed = time.perf_counter() - t0
    random_params = policy.init_policy_params(mlp_spec, RngStream(12345))
    return SimpleNamespace(
        env_spec=env_spec,
        mlp_spec=mlp_spec,
        cfg=cfg,
        result=result,
        elapsed=elapsed,
        random_params=random_params,
    )


@pytest.fixture(scope="session")
def desk_checkpoint(desk_pendulum, tmp_path_factory):
    path = tmp_path_factory.mktemp("ckpt") / "pendulum.ckpt"
    res = desk_pendulum.result
    save_checkpoint(
        path,
        Checkpoint(
            policy=res.policy,
            value=res.value,
            meta=TrainingMeta(
                env_id="pendulum",
                seed=1,
                total_steps=150_000,
                final_mean_return=res.curve[-1].mean_return,
            ),
        ),
    )
    return path


@pytest.fixture(scope="session")
def pendulum_sweep(desk_pendulum, desk_checkpoint):
    """The full desk sweep: 3 filters, N=20, eps 0..2 step 0.25, 10 seeds."""
    cfg = SweepConfig(
        checkpoint_path=str(desk_checkpoint),
        n_thresholds=20,
        include_identity=True,
        eps_min=0.0,
        eps_max=2.0,
        eps_step=0.25,
        eval_seeds=tuple(EVAL_SEEDS),
        workers=8,
    )
    t0 = time.perf_counter()
    result = run_combined_sweep(
        cfg, params=desk_pendulum.result.policy, env_spec=desk_pendulum.env_spec
    )
    elapsed = time.perf_counter() - t0
    return SimpleNamespace(cfg=cfg, result=result, elapsed=elapsed)


@pytest.fixture
def tiny_policy():
    spec = policy.MlpSpec(input_dim=3, hidden=(8, 6), output_dim=2)
    return policy.init_policy_params(spec, RngStream(7))


def random_params(seed: int, spec: policy.MlpSpec) -> policy.PolicyParams:
    """Dense random parameters (no orthogonal structure) for oracle tests."""
    from synstress.numerics import derive, gaussian_draw

    rng = RngStream(seed)
    theta = gaussian_draw(derive(rng, "theta"), spec.param_count) * 0.7
    log_std = 0.3 * gaussian_draw(derive(rng, "log_std"), spec.output_dim)
    return policy.PolicyParams(spec=spec, theta=theta, log_std=log_std)
