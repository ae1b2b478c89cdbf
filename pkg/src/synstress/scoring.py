"""Parameter scores and fragile/robust/antifragile classification.

All scores are differences of mean cumulative rewards:

* S_clean = J(filtered, clean) - J(baseline, clean)
* S_adv   = J(filtered, attacked) - J(baseline, attacked)   (same epsilon)
* S_delta = J(filtered, attacked) - J(filtered, clean)

which forces the identity
S_delta = S_adv - S_clean + (J_adv_baseline - J_clean_baseline).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LABELS = ("fragile", "robust", "antifragile")

SCORE_IDENTITY_TOL = 1e-9


def _check_finite(*values: float):
    for x in values:
        if not math.isfinite(x):
            raise ValueError(f"score inputs must be finite, got {x}")


def score_clean(j_filtered: float, j_baseline: float) -> float:
    """Performance shift caused by filtering alone."""
    _check_finite(j_filtered, j_baseline)
    return j_filtered - j_baseline


def score_adversarial(j_adv_filtered: float, j_adv_baseline: float) -> float:
    """Performance shift caused by filtering under a fixed attack budget."""
    _check_finite(j_adv_filtered, j_adv_baseline)
    return j_adv_filtered - j_adv_baseline


def score_combined(j_adv_filtered: float, j_clean_filtered: float) -> float:
    """Attack damage on the already-filtered network."""
    _check_finite(j_adv_filtered, j_clean_filtered)
    return j_adv_filtered - j_clean_filtered


def integrated_score(
    stress_values: np.ndarray, j_stressed: np.ndarray, j_baseline: np.ndarray
) -> float:
    """Trapezoidal integral of J_stressed - J_baseline over the stress axis.

    The stress variable is whichever sweep axis the caller integrates over
    (filter threshold or attack budget).
    """
    x = np.asarray(stress_values, dtype=np.float64)
    ys = np.asarray(j_stressed, dtype=np.float64)
    yb = np.asarray(j_baseline, dtype=np.float64)
    if not (x.size == ys.size == yb.size):
        raise ValueError(
            f"length mismatch: {x.size} stress values, {ys.size} stressed, "
            f"{yb.size} baseline"
        )
    if x.size < 2:
        raise ValueError("need at least 2 points to integrate")
    if np.any(np.diff(x) <= 0):
        raise ValueError("stress_values must be strictly ascending")
    diff = ys - yb
    return float(0.5 * np.sum((x[1:] - x[:-1]) * (diff[1:] + diff[:-1])))


@dataclass(frozen=True)
class ClassificationPolicy:
    """Robustness tolerance band; relative mode scales by |J_clean_baseline|."""

    tau: float = 0.05
    relative: bool = True

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError(f"tau must be >= 0, got {self.tau}")

    def resolve(self, j_clean_baseline: float) -> float:
        """Absolute tolerance in reward units."""
        if self.relative:
            return self.tau * abs(j_clean_baseline)
        return self.tau


def classify(s: float, tau: float) -> str:
    """fragile below -tau, antifragile above +tau, robust in between."""
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    if s < -tau:
        return "fragile"
    if s > tau:
        return "antifragile"
    return "robust"


@dataclass(frozen=True)
class ScoreRecord:
    """One sweep cell: the four J values, their scores, and the label."""

    filter_kind: str
    alpha: float
    epsilon: float
    j_clean_baseline: float
    j_clean_filtered: float
    j_adv_baseline: float
    j_adv_filtered: float
    s_clean: float
    s_adv: float
    s_delta: float
    compactness: float
    label: str

    @classmethod
    def from_evaluations(
        cls,
        filter_kind: str,
        alpha: float,
        epsilon: float,
        j_clean_baseline: float,
        j_clean_filtered: float,
        j_adv_baseline: float,
        j_adv_filtered: float,
        compactness: float,
        tau: float,
    ) -> "ScoreRecord":
        s_clean = score_clean(j_clean_filtered, j_clean_baseline)
        s_adv = score_adversarial(j_adv_filtered, j_adv_baseline)
        s_delta = score_combined(j_adv_filtered, j_clean_filtered)
        residual = s_delta - (s_adv - s_clean + (j_adv_baseline - j_clean_baseline))
        if abs(residual) > SCORE_IDENTITY_TOL:
            raise ValueError(f"score identity violated by {residual}")
        return cls(
            filter_kind=filter_kind,
            alpha=alpha,
            epsilon=epsilon,
            j_clean_baseline=j_clean_baseline,
            j_clean_filtered=j_clean_filtered,
            j_adv_baseline=j_adv_baseline,
            j_adv_filtered=j_adv_filtered,
            s_clean=s_clean,
            s_adv=s_adv,
            s_delta=s_delta,
            compactness=compactness,
            label=classify(s_adv, tau),
        )
