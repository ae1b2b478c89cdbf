"""Versioned binary checkpoint files.

Layout: one JSON header line (UTF-8, sorted keys, terminated by a single
newline) followed by the raw little-endian float64 payloads in a fixed
order: policy theta, policy log_std, value theta.  The header records the
exact element counts, so a load can validate lengths before touching the
numbers.  Saving the result of a load reproduces the file byte for byte.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .policy import MlpSpec, PolicyParams

FORMAT_VERSION = 1

_F8 = np.dtype("<f8")


class CheckpointError(Exception):
    """Raised for unreadable, truncated, or version-mismatched checkpoints."""


@dataclass(frozen=True)
class TrainingMeta:
    env_id: str
    seed: int
    total_steps: int
    final_mean_return: float


@dataclass(frozen=True)
class Checkpoint:
    policy: PolicyParams
    value: PolicyParams
    meta: TrainingMeta


def _spec_to_dict(spec: MlpSpec) -> dict:
    return {
        "input_dim": spec.input_dim,
        "hidden": list(spec.hidden),
        "output_dim": spec.output_dim,
        "activation": spec.activation,
    }


def _spec_from_dict(d: dict) -> MlpSpec:
    return MlpSpec(
        input_dim=int(d["input_dim"]),
        hidden=tuple(int(w) for w in d["hidden"]),
        output_dim=int(d["output_dim"]),
        activation=str(d["activation"]),
    )


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    header = {
        "format_version": FORMAT_VERSION,
        "env_id": ckpt.meta.env_id,
        "seed": ckpt.meta.seed,
        "total_steps": ckpt.meta.total_steps,
        "final_mean_return": ckpt.meta.final_mean_return,
        "policy_spec": _spec_to_dict(ckpt.policy.spec),
        "value_spec": _spec_to_dict(ckpt.value.spec),
        "theta_len": int(ckpt.policy.theta.size),
        "log_std_len": int(ckpt.policy.log_std.size),
        "value_theta_len": int(ckpt.value.theta.size),
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode() + b"\n"
    blob += ckpt.policy.theta.astype(_F8).tobytes()
    blob += ckpt.policy.log_std.astype(_F8).tobytes()
    blob += ckpt.value.theta.astype(_F8).tobytes()
    Path(path).write_bytes(blob)


def load_checkpoint(path: str | Path) -> Checkpoint:
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e
    nl = raw.find(b"\n")
    if nl < 0:
        raise CheckpointError(f"corrupt checkpoint {path}: missing header line")
    try:
        header = json.loads(raw[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"corrupt checkpoint {path}: bad header ({e})") from e
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"checkpoint {path} has format_version {version!r}, "
            f"expected {FORMAT_VERSION}"
        )
    try:
        policy_spec = _spec_from_dict(header["policy_spec"])
        value_spec = _spec_from_dict(header["value_spec"])
        n_theta = int(header["theta_len"])
        n_log_std = int(header["log_std_len"])
        n_value = int(header["value_theta_len"])
        meta = TrainingMeta(
            env_id=str(header["env_id"]),
            seed=int(header["seed"]),
            total_steps=int(header["total_steps"]),
            final_mean_return=float(header["final_mean_return"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"corrupt checkpoint {path}: bad header field ({e})") from e

    payload = raw[nl + 1 :]
    expected = 8 * (n_theta + n_log_std + n_value)
    if len(payload) != expected:
        raise CheckpointError(
            f"corrupt checkpoint {path}: payload has {len(payload)} bytes, "
            f"expected {expected}"
        )
    flat = np.frombuffer(payload, dtype=_F8)
    theta = flat[:n_theta]
    log_std = flat[n_theta : n_theta + n_log_std]
    value_theta = flat[n_theta + n_log_std :]
    try:
        policy = PolicyParams(spec=policy_spec, theta=theta, log_std=log_std)
        value = PolicyParams(
            spec=value_spec, theta=value_theta, log_std=np.zeros(value_spec.output_dim)
        )
    except ValueError as e:
        raise CheckpointError(f"corrupt checkpoint {path}: {e}") from e
    return Checkpoint(policy=policy, value=value, meta=meta)
