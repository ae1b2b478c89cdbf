"""Sweep configuration files: INI key/value sections, parsed and hashed.

Grammar (configparser syntax; see README for the full reference):

    [checkpoint]
    path = runs/pendulum.ckpt

    [sweep]
    env = pendulum            ; optional cross-check against the checkpoint
    mode = combined           ; combined | filters | attack
    filters = hpf, lpf, pwf
    thresholds = 20           ; grid step count N (N+1 thresholds)
    include_identity = true   ; append a provably no-op threshold per filter
    workers = 1

    [attack]
    method = fgsm             ; fgsm | bim | pgd
    eps_min = 0.0
    eps_max = 2.0
    eps_step = 0.25
    steps = 10                ; iterative methods only
    step_size =               ; optional; defaults to epsilon/steps
    rng_seed = 0

    [evaluation]
    seeds = 1, 2, 3, 4, 5, 6, 7, 8, 9, 10

    [classification]
    tau = 0.05
    mode = relative           ; relative (fraction of |J baseline|) | absolute

The config hash is a SHA-256 over the canonical parsed content; `workers`
is excluded because it cannot affect any result.
"""
from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .attacks import ATTACK_METHODS, EpsilonGrid
from .filters import FILTER_KINDS
from .scoring import ClassificationPolicy

SWEEP_MODES = ("combined", "filters", "attack")


class ConfigError(Exception):
    """Raised for unreadable or invalid sweep configuration files."""


@dataclass(frozen=True)
class SweepConfig:
    checkpoint_path: str
    env_id: str | None = None
    mode: str = "combined"
    filters: tuple[str, ...] = FILTER_KINDS
    n_thresholds: int = 20
    include_identity: bool = True
    workers: int = 1
    attack_method: str = "fgsm"
    eps_min: float = 0.0
    eps_max: float = 2.0
    eps_step: float = 0.25
    attack_steps: int = 10
    attack_step_size: float | None = None
    attack_rng_seed: int = 0
    eval_seeds: tuple[int, ...] = tuple(range(1, 11))
    classification: ClassificationPolicy = field(default_factory=ClassificationPolicy)

    def __post_init__(self):
        if self.mode not in SWEEP_MODES:
            raise ConfigError(f"unknown sweep mode {self.mode!r}; known: {SWEEP_MODES}")
        if not self.filters:
            raise ConfigError("at least one filter kind is required")
        for k in self.filters:
            if k not in FILTER_KINDS:
                raise ConfigError(f"unknown filter kind {k!r}; known: {FILTER_KINDS}")
        if self.attack_method not in ATTACK_METHODS:
            raise ConfigError(
                f"unknown attack method {self.attack_method!r}; known: {ATTACK_METHODS}"
            )
        if self.n_thresholds < 1:
            raise ConfigError(f"thresholds must be >= 1, got {self.n_thresholds}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if not self.eval_seeds:
            raise ConfigError("evaluation seed list must be nonempty")

    def epsilon_grid(self) -> EpsilonGrid:
        try:
            return EpsilonGrid.from_bounds(self.eps_min, self.eps_max, self.eps_step)
        except ValueError as e:
            raise ConfigError(str(e)) from e

    def canonical_dict(self) -> dict:
        """Result-affecting content only (workers excluded)."""
        return {
            "checkpoint_path": self.checkpoint_path,
            "env_id": self.env_id,
            "mode": self.mode,
            "filters": list(self.filters),
            "n_thresholds": self.n_thresholds,
            "include_identity": self.include_identity,
            "attack": {
                "method": self.attack_method,
                "eps_min": self.eps_min,
                "eps_max": self.eps_max,
                "eps_step": self.eps_step,
                "steps": self.attack_steps,
                "step_size": self.attack_step_size,
                "rng_seed": self.attack_rng_seed,
            },
            "eval_seeds": list(self.eval_seeds),
            "classification": {
                "tau": self.classification.tau,
                "relative": self.classification.relative,
            },
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _parse_int_list(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.replace(",", " ").split())


def _parse_str_list(text: str) -> tuple[str, ...]:
    return tuple(tok.strip().lower() for tok in text.split(",") if tok.strip())


def parse_config(path: str | Path) -> SweepConfig:
    """Parse and validate a sweep config file."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except configparser.Error as e:
        raise ConfigError(f"invalid config {path}: {e}") from e

    try:
        ckpt = parser.get("checkpoint", "path")
        sweep = parser["sweep"] if parser.has_section("sweep") else {}
        attack = parser["attack"] if parser.has_section("attack") else {}
        ev = parser["evaluation"] if parser.has_section("evaluation") else {}
        cls = parser["classification"] if parser.has_section("classification") else {}

        defaults = SweepConfig(checkpoint_path=ckpt)
        step_size_raw = attack.get("step_size", "").strip() if attack else ""
        cls_mode = cls.get("mode", "relative").strip().lower() if cls else "relative"
        if cls_mode not in ("relative", "absolute"):
            raise ConfigError(
                f"classification mode must be relative or absolute, got {cls_mode!r}"
            )
        return SweepConfig(
            checkpoint_path=ckpt,
            env_id=sweep.get("env", "").strip() or None if sweep else None,
            mode=sweep.get("mode", defaults.mode).strip().lower(),
            filters=_parse_str_list(sweep.get("filters", "hpf, lpf, pwf")),
            n_thresholds=int(sweep.get("thresholds", defaults.n_thresholds)),
            include_identity=_parse_bool(
                sweep.get("include_identity", "true") if sweep else "true"
            ),
            workers=int(sweep.get("workers", defaults.workers)),
            attack_method=attack.get("method", defaults.attack_method).strip().lower(),
            eps_min=float(attack.get("eps_min", defaults.eps_min)),
            eps_max=float(attack.get("eps_max", defaults.eps_max)),
            eps_step=float(attack.get("eps_step", defaults.eps_step)),
            attack_steps=int(attack.get("steps", defaults.attack_steps)),
            attack_step_size=float(step_size_raw) if step_size_raw else None,
            attack_rng_seed=int(attack.get("rng_seed", defaults.attack_rng_seed)),
            eval_seeds=_parse_int_list(ev.get("seeds", "1,2,3,4,5,6,7,8,9,10")),
            classification=ClassificationPolicy(
                tau=float(cls.get("tau", 0.05)), relative=cls_mode == "relative"
            ),
        )
    except ConfigError:
        raise
    except (configparser.Error, KeyError, ValueError) as e:
        raise ConfigError(f"invalid config {path}: {e}") from e


def _parse_bool(text: str) -> bool:
    val = text.strip().lower()
    if val in ("1", "true", "yes", "on"):
        return True
    if val in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"invalid boolean {text!r}")
