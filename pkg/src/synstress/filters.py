"""Magnitude-threshold masks over a flat parameter vector: threshold grids,
the three filter kinds, mask application, and retained-fraction accounting.

Boundary semantics are fixed so the three filters partition the magnitude
axis cleanly:

* hpf removes |theta| <= alpha        (high-pass keeps large magnitudes)
* lpf removes |theta| >= alpha        (low-pass keeps small magnitudes)
* pwf removes alpha - da/2 < |theta| <= alpha + da/2  (band, half-open low)

With these rules hpf and lpf are exact complements away from |theta| = alpha,
and pwf bands laid along a uniform grid tile the whole magnitude range.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FILTER_KINDS = ("hpf", "lpf", "pwf")


@dataclass(frozen=True)
class ThresholdGrid:
    """Uniform ladder of N+1 thresholds spanning [min|theta|, max|theta|]."""

    alpha_min: float
    alpha_max: float
    n_steps: int
    delta_alpha: float
    values: np.ndarray


@dataclass(frozen=True)
class FilterMask:
    bits: np.ndarray  # uint8 in {0, 1}
    filter_kind: str
    alpha: float
    source_len: int


@dataclass(frozen=True)
class CompactnessRecord:
    filter_kind: str
    alpha: float
    removed_count: int
    total: int
    compactness: float  # fraction of parameters retained


def make_grid(theta: np.ndarray, n_steps: int) -> ThresholdGrid:
    """Threshold grid from alpha_0 = min|theta| to alpha_N = max|theta|."""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.size == 0:
        raise ValueError("theta must be nonempty")
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    zeros = np.flatnonzero(theta == 0.0)
    if zeros.size:
        raise ValueError(
            f"theta contains a zero entry at index {int(zeros[0])}; "
            "magnitude thresholds require all parameters nonzero"
        )
    mags = np.abs(theta)
    lo = float(mags.min())
    hi = float(mags.max())
    if hi == lo:
        raise ValueError(
            f"degenerate grid: all parameter magnitudes equal {lo} (delta_alpha = 0)"
        )
    return ThresholdGrid(
        alpha_min=lo,
        alpha_max=hi,
        n_steps=n_steps,
        delta_alpha=(hi - lo) / n_steps,
        values=np.linspace(lo, hi, n_steps + 1),
    )


def hpf_mask(theta: np.ndarray, alpha: float) -> FilterMask:
    """Zero where |theta| <= alpha."""
    theta = np.asarray(theta, dtype=np.float64)
    bits = (np.abs(theta) > alpha).astype(np.uint8)
    return FilterMask(bits=bits, filter_kind="hpf", alpha=alpha, source_len=theta.size)


def lpf_mask(theta: np.ndarray, alpha: float) -> FilterMask:
    """Zero where |theta| >= alpha."""
    theta = np.asarray(theta, dtype=np.float64)
    bits = (np.abs(theta) < alpha).astype(np.uint8)
    return FilterMask(bits=bits, filter_kind="lpf", alpha=alpha, source_len=theta.size)


def pwf_mask(theta: np.ndarray, alpha: float, delta_alpha: float) -> FilterMask:
    """Zero inside the band alpha - da/2 < |theta| <= alpha + da/2."""
    if delta_alpha <= 0:
        raise ValueError(f"delta_alpha must be > 0, got {delta_alpha}")
    theta = np.asarray(theta, dtype=np.float64)
    mags = np.abs(theta)
    inside = (mags > alpha - delta_alpha / 2.0) & (mags <= alpha + delta_alpha / 2.0)
    return FilterMask(
        bits=(~inside).astype(np.uint8),
        filter_kind="pwf",
        alpha=alpha,
        source_len=theta.size,
    )


def make_mask(
    kind: str, theta: np.ndarray, alpha: float, delta_alpha: float | None = None
) -> FilterMask:
    if kind == "hpf":
        return hpf_mask(theta, alpha)
    if kind == "lpf":
        return lpf_mask(theta, alpha)
    if kind == "pwf":
        if delta_alpha is None:
            raise ValueError("pwf requires delta_alpha")
        return pwf_mask(theta, alpha, delta_alpha)
    raise ValueError(f"unknown filter kind {kind!r}; known: {FILTER_KINDS}")


def apply_mask(theta: np.ndarray, m: FilterMask) -> np.ndarray:
    """Elementwise product of theta with the mask bits."""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.size != m.source_len or theta.size != m.bits.size:
        raise ValueError(
            f"length mismatch: theta has {theta.size}, mask has {m.bits.size}"
        )
    return theta * m.bits


def compactness(m: FilterMask) -> CompactnessRecord:
    """Fraction of parameters the mask retains."""
    total = int(m.bits.size)
    removed = int(total - int(m.bits.sum()))
    return CompactnessRecord(
        filter_kind=m.filter_kind,
        alpha=m.alpha,
        removed_count=removed,
        total=total,
        compactness=1.0 - removed / total if total else 1.0,
    )


def mask_runs(m: FilterMask) -> str:
    """Compact run-length text for a mask, e.g. ``1x340 0x12 1x5``."""
    if m.bits.size == 0:
        return ""
    bits = m.bits
    boundaries = np.flatnonzero(np.diff(bits)) + 1
    starts = np.concatenate([[0], boundaries])
    ends = np.concatenate([boundaries, [bits.size]])
    return " ".join(f"{int(bits[s])}x{e - s}" for s, e in zip(starts, ends))


def identity_alpha(kind: str, grid: ThresholdGrid) -> float:
    """A threshold at which the filter provably removes nothing.

    hpf keeps everything below the smallest magnitude; lpf and pwf keep
    everything above the largest (the pwf band then lies wholly above every
    magnitude).
    """
    if kind == "hpf":
        return grid.alpha_min - grid.delta_alpha
    if kind in ("lpf", "pwf"):
        return grid.alpha_max + grid.delta_alpha
    raise ValueError(f"unknown filter kind {kind!r}; known: {FILTER_KINDS}")
