"""Experiment orchestration: baseline evaluations, threshold sweeps per
filter, attack-budget sweeps, and the combined threshold x budget grid.

Every unit of work (one cell) is a pure function of the checkpoint and the
config, so results are bit-identical for any worker count and any execution
order.  Completed cells are journaled to a sidecar file as they finish,
which makes an aborted sweep resumable.
"""
from __future__ import annotations

import json
from concurrent.futures import FIRST_EXCEPTION, ProcessPoolExecutor, wait
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from ._kernels import BACKEND
from .attacks import AttackSpec, PerturbationAudit, adversarial_evaluate
from .checkpoint import load_checkpoint
from .envs import EnvSpec, make_env
from .filters import (
    CompactnessRecord,
    ThresholdGrid,
    compactness,
    identity_alpha,
    make_grid,
    make_mask,
    apply_mask,
)
from .policy import PolicyParams, with_theta
from .ppo import evaluate
from .scoring import ScoreRecord
from .sweepconfig import ConfigError, SweepConfig


class SweepCellError(RuntimeError):
    """A sweep cell failed; carries the cell coordinates."""

    def __init__(self, key: str, cause: BaseException):
        super().__init__(f"sweep cell {key} failed: {cause}")
        self.key = key
        self.cause = cause


class FilterCurve(NamedTuple):
    """Clean-environment reward curve of one filter across its thresholds."""

    alphas: np.ndarray
    returns: np.ndarray
    compactness: np.ndarray
    removed_counts: np.ndarray


@dataclass
class SweepResult:
    config_hash: str
    env_id: str
    backend: str
    filters: tuple[str, ...]
    alphas: dict[str, np.ndarray]
    eps_values: np.ndarray
    eval_seeds: tuple[int, ...]
    tau: float
    j_clean_baseline: float
    j_adv_baseline: list[float]
    records: list[ScoreRecord]
    parameter_stats: dict[str, list[CompactnessRecord]]
    perturbation_log: dict[str, dict]
    started_at: str = ""
    finished_at: str = ""


def load_sweep_inputs(cfg: SweepConfig) -> tuple[PolicyParams, PolicyParams, EnvSpec]:
    """Load the checkpoint and reject env/checkpoint mismatches up front."""
    ckpt = load_checkpoint(cfg.checkpoint_path)
    if cfg.env_id is not None and cfg.env_id != ckpt.meta.env_id:
        raise ConfigError(
            f"config requests env {cfg.env_id!r} but checkpoint was trained on "
            f"{ckpt.meta.env_id!r}"
        )
    env_spec = make_env(ckpt.meta.env_id)
    p = ckpt.policy
    if p.spec.input_dim != env_spec.state_dim or p.spec.output_dim != env_spec.action_dim:
        raise ConfigError(
            f"checkpoint policy dims ({p.spec.input_dim}, {p.spec.output_dim}) do "
            f"not match env {env_spec.id!r}"
        )
    return p, ckpt.value, env_spec


def filter_alphas(kind: str, grid: ThresholdGrid, include_identity: bool) -> np.ndarray:
    """Ascending threshold list for one filter, identity point included
    below the grid for hpf and above it for lpf/pwf."""
    if not include_identity:
        return grid.values.copy()
    ident = identity_alpha(kind, grid)
    if ident < grid.values[0]:
        return np.concatenate([[ident], grid.values])
    return np.concatenate([grid.values, [ident]])


def run_parameter_statistics(
    theta: np.ndarray,
    grid: ThresholdGrid,
    kinds: tuple[str, ...] = ("hpf", "lpf", "pwf"),
    include_identity: bool = False,
) -> dict[str, list[CompactnessRecord]]:
    """Removed counts and retained fraction per filter per threshold."""
    stats: dict[str, list[CompactnessRecord]] = {}
    for kind in kinds:
        recs = []
        for alpha in filter_alphas(kind, grid, include_identity):
            m = make_mask(kind, theta, float(alpha), grid.delta_alpha)
            recs.append(compactness(m))
        stats[kind] = recs
    return stats


# ---------------------------------------------------------------------------
# parallel task execution
#
# Task keys (also the resume-journal keys):
#   base_clean            clean evaluation of the unfiltered policy
#   base_adv:<e>          attacked evaluation of the unfiltered policy
#   clean:<kind>:<a>      clean evaluation of one filtered policy
#   adv:<kind>:<a>:<e>    attacked evaluation of one filtered policy

_CTX: dict = {}


def _worker_init(payload: dict):
    _CTX.clear()
    _CTX.update(payload)


def _attack_spec(cfg_dict: dict, epsilon: float) -> AttackSpec:
    return AttackSpec(
        method=cfg_dict["method"],
        epsilon=epsilon,
        steps=cfg_dict["steps"],
        step_size=cfg_dict["step_size"],
        rng_seed=cfg_dict["rng_seed"],
    )


def _filtered_params(kind: str, a_idx: int) -> PolicyParams:
    params: PolicyParams = _CTX["params"]
    alpha = float(_CTX["alphas"][kind][a_idx])
    mask = make_mask(kind, params.theta, alpha, _CTX["delta_alpha"])
    return with_theta(params, apply_mask(params.theta, mask))


def _run_task(task: tuple) -> tuple[str, dict]:
    env_spec: EnvSpec = _CTX["env_spec"]
    seeds: list[int] = list(_CTX["eval_seeds"])
    eps_values = _CTX["eps_values"]
    if task[0] == "base_clean":
        j = evaluate(_CTX["params"], env_spec, seeds)
        return "base_clean", {"J": j}
    if task[0] == "base_adv":
        e_idx = task[1]
        audit = PerturbationAudit()
        spec = _attack_spec(_CTX["attack"], float(eps_values[e_idx]))
        j = adversarial_evaluate(_CTX["params"], env_spec, spec, seeds, audit)
        return f"base_adv:{e_idx}", {
            "J": j,
            "max_linf": audit.max_linf,
            "fgsm_offgrid": audit.fgsm_max_offgrid,
            "count": audit.count,
            "epsilon": float(eps_values[e_idx]),
        }
    if task[0] == "clean":
        _, kind, a_idx = task
        j = evaluate(_filtered_params(kind, a_idx), env_spec, seeds)
        return f"clean:{kind}:{a_idx}", {"J": j}
    if task[0] == "adv":
        _, kind, a_idx, e_idx = task
        audit = PerturbationAudit()
        spec = _attack_spec(_CTX["attack"], float(eps_values[e_idx]))
        j = adversarial_evaluate(_filtered_params(kind, a_idx), env_spec, spec, seeds, audit)
        return f"adv:{kind}:{a_idx}:{e_idx}", {
            "J": j,
            "max_linf": audit.max_linf,
            "fgsm_offgrid": audit.fgsm_max_offgrid,
            "count": audit.count,
            "epsilon": float(eps_values[e_idx]),
        }
    raise ValueError(f"unknown task {task!r}")


def _task_key(task: tuple) -> str:
    if task[0] == "base_clean":
        return "base_clean"
    if task[0] == "base_adv":
        return f"base_adv:{task[1]}"
    if task[0] == "clean":
        return f"clean:{task[1]}:{task[2]}"
    return f"adv:{task[1]}:{task[2]}:{task[3]}"


def _load_journal(path: Path, config_hash: str) -> dict[str, dict]:
    done: dict[str, dict] = {}
    if not path.exists():
        return done
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                entry = json.loads(line)
            except json.JSONDecodeError:
                continue  # torn tail write from an aborted run
            if entry.get("hash") == config_hash:
                done[entry["key"]] = entry["value"]
    return done


def _execute_tasks(
    tasks: list[tuple],
    payload: dict,
    workers: int,
    journal_path: Optional[Path] = None,
    config_hash: str = "",
    resume: bool = False,
) -> dict[str, dict]:
    results: dict[str, dict] = {}
    if journal_path is not None and resume:
        results.update(_load_journal(journal_path, config_hash))
    pending = [t for t in tasks if _task_key(t) not in results]

    journal = None
    if journal_path is not None:
        journal_path.parent.mkdir(parents=True, exist_ok=True)
        journal = open(journal_path, "a" if resume else "w", encoding="utf-8")

    def record(key: str, value: dict):
        results[key] = value
        if journal is not None:
            journal.write(
                json.dumps({"hash": config_hash, "key": key, "value": value}) + "\n"
            )
            journal.flush()

    try:
        if workers <= 1 or len(pending) <= 1:
            _worker_init(payload)
            for task in pending:
                try:
                    key, value = _run_task(task)
                except Exception as e:  # noqa: BLE001
                    raise SweepCellError(_task_key(task), e) from e
                record(key, value)
        else:
            with ProcessPoolExecutor(
                max_workers=workers, initializer=_worker_init, initargs=(payload,)
            ) as pool:
                futures = {pool.submit(_run_task, t): t for t in pending}
                not_done = set(futures)
                while not_done:
                    finished, not_done = wait(not_done, return_when=FIRST_EXCEPTION)
                    for fut in finished:
                        task = futures[fut]
                        exc = fut.exception()
                        if exc is not None:
                            for other in not_done:
                                other.cancel()
                            raise SweepCellError(_task_key(task), exc) from exc
                        key, value = fut.result()
                        record(key, value)
    finally:
        if journal is not None:
            journal.close()
    return results


def _payload(
    params: PolicyParams,
    env_spec: EnvSpec,
    cfg: SweepConfig,
    alphas: dict[str, np.ndarray],
    delta_alpha: float,
    eps_values: np.ndarray,
) -> dict:
    return {
        "params": params,
        "env_spec": env_spec,
        "eval_seeds": tuple(cfg.eval_seeds),
        "alphas": alphas,
        "delta_alpha": delta_alpha,
        "eps_values": eps_values,
        "attack": {
            "method": cfg.attack_method,
            "steps": cfg.attack_steps,
            "step_size": cfg.attack_step_size,
            "rng_seed": cfg.attack_rng_seed,
        },
    }


def run_filter_sweep(
    cfg: SweepConfig, params: Optional[PolicyParams] = None,
    env_spec: Optional[EnvSpec] = None,
) -> dict[str, FilterCurve]:
    """Clean-environment reward curve per filter kind."""
    if params is None or env_spec is None:
        params, _, env_spec = load_sweep_inputs(cfg)
    grid = make_grid(params.theta, cfg.n_thresholds)
    alphas = {k: filter_alphas(k, grid, cfg.include_identity) for k in cfg.filters}
    payload = _payload(params, env_spec, cfg, alphas, grid.delta_alpha, np.array([0.0]))
    tasks = [
        ("clean", kind, a_idx)
        for kind in cfg.filters
        for a_idx in range(len(alphas[kind]))
    ]
    results = _execute_tasks(tasks, payload, cfg.workers)
    curves: dict[str, FilterCurve] = {}
    for kind in cfg.filters:
        ret, comp, removed = [], [], []
        for a_idx, alpha in enumerate(alphas[kind]):
            ret.append(results[f"clean:{kind}:{a_idx}"]["J"])
            rec = compactness(make_mask(kind, params.theta, float(alpha), grid.delta_alpha))
            comp.append(rec.compactness)
            removed.append(rec.removed_count)
        curves[kind] = FilterCurve(
            alphas=alphas[kind],
            returns=np.array(ret),
            compactness=np.array(comp),
            removed_counts=np.array(removed, dtype=int),
        )
    return curves


def run_attack_sweep(
    cfg: SweepConfig, params: Optional[PolicyParams] = None,
    env_spec: Optional[EnvSpec] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """J of the unfiltered policy at each attack budget."""
    if params is None or env_spec is None:
        params, _, env_spec = load_sweep_inputs(cfg)
    eps_values = cfg.epsilon_grid().values
    payload = _payload(params, env_spec, cfg, {}, 1.0, eps_values)
    tasks = [("base_adv", e_idx) for e_idx in range(len(eps_values))]
    results = _execute_tasks(tasks, payload, cfg.workers)
    js = np.array([results[f"base_adv:{e}"]["J"] for e in range(len(eps_values))])
    return eps_values, js


def run_combined_sweep(
    cfg: SweepConfig,
    params: Optional[PolicyParams] = None,
    env_spec: Optional[EnvSpec] = None,
    journal_path: Optional[str | Path] = None,
    resume: bool = False,
) -> SweepResult:
    """The full (filter, threshold, budget) grid behind the score heatmaps."""
    started = datetime.now(timezone.utc).isoformat()
    if params is None or env_spec is None:
        params, _, env_spec = load_sweep_inputs(cfg)
    grid = make_grid(params.theta, cfg.n_thresholds)
    alphas = {k: filter_alphas(k, grid, cfg.include_identity) for k in cfg.filters}
    eps_values = cfg.epsilon_grid().values
    config_hash = cfg.config_hash()

    tasks: list[tuple] = [("base_clean",)]
    tasks += [("base_adv", e) for e in range(len(eps_values))]
    for kind in cfg.filters:
        for a_idx in range(len(alphas[kind])):
            tasks.append(("clean", kind, a_idx))
            tasks += [("adv", kind, a_idx, e) for e in range(len(eps_values))]

    payload = _payload(params, env_spec, cfg, alphas, grid.delta_alpha, eps_values)
    results = _execute_tasks(
        tasks,
        payload,
        cfg.workers,
        journal_path=Path(journal_path) if journal_path is not None else None,
        config_hash=config_hash,
        resume=resume,
    )

    j_clean_base = results["base_clean"]["J"]
    j_adv_base = [results[f"base_adv:{e}"]["J"] for e in range(len(eps_values))]
    tau = cfg.classification.resolve(j_clean_base)

    records: list[ScoreRecord] = []
    perturbation_log: dict[str, dict] = {
        f"base_adv:{e}": results[f"base_adv:{e}"] for e in range(len(eps_values))
    }
    for kind in cfg.filters:
        for a_idx, alpha in enumerate(alphas[kind]):
            comp = compactness(
                make_mask(kind, params.theta, float(alpha), grid.delta_alpha)
            ).compactness
            j_clean_filt = results[f"clean:{kind}:{a_idx}"]["J"]
            for e_idx, eps in enumerate(eps_values):
                key = f"adv:{kind}:{a_idx}:{e_idx}"
                cell = results[key]
                perturbation_log[key] = cell
                records.append(
                    ScoreRecord.from_evaluations(
                        filter_kind=kind,
                        alpha=float(alpha),
                        epsilon=float(eps),
                        j_clean_baseline=j_clean_base,
                        j_clean_filtered=j_clean_filt,
                        j_adv_baseline=j_adv_base[e_idx],
                        j_adv_filtered=cell["J"],
                        compactness=comp,
                        tau=tau,
                    )
                )

    stats = run_parameter_statistics(
        params.theta, grid, cfg.filters, cfg.include_identity
    )
    return SweepResult(
        config_hash=config_hash,
        env_id=env_spec.id,
        backend=BACKEND,
        filters=cfg.filters,
        alphas=alphas,
        eps_values=eps_values,
        eval_seeds=tuple(cfg.eval_seeds),
        tau=tau,
        j_clean_baseline=j_clean_base,
        j_adv_baseline=j_adv_base,
        records=records,
        parameter_stats=stats,
        perturbation_log=perturbation_log,
        started_at=started,
        finished_at=datetime.now(timezone.utc).isoformat(),
    )
