"""Dependency-free SVG heatmaps of sweep scores.

Cells are colored on a symmetric diverging scale centered at zero: red for
positive scores (performance improved under stress), blue for negative
(performance degraded), white at zero.  The cell holding the largest |score|
saturates to pure red or blue.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np


def diverging_color(value: float, vmax: float) -> str:
    """rgb() fill for a score on a scale symmetric around zero."""
    if vmax <= 0.0:
        return "rgb(255,255,255)"
    t = max(-1.0, min(1.0, value / vmax))
    if t >= 0.0:
        c = round(255 * (1.0 - t))
        return f"rgb(255,{c},{c})"
    c = round(255 * (1.0 + t))
    return f"rgb({c},{c},255)"


def _fmt(x: float) -> str:
    return format(x, ".4g")


def render_heatmap(
    alphas: Sequence[float],
    eps_values: Sequence[float],
    scores: np.ndarray,
    title: str,
    value_name: str = "s_adv",
) -> str:
    """SVG text for a score grid indexed by (threshold, budget).

    scores has shape (len(alphas), len(eps_values)); thresholds run along
    the x-axis, budgets up the y-axis.
    """
    alphas = list(alphas)
    eps_values = list(eps_values)
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != (len(alphas), len(eps_values)):
        raise ValueError(
            f"scores shape {scores.shape} != ({len(alphas)}, {len(eps_values)})"
        )
    cell = 28
    left, top, right, bottom = 90, 50, 110, 70
    width = left + cell * len(alphas) + right
    height = top + cell * len(eps_values) + bottom
    vmax = float(np.max(np.abs(scores))) if scores.size else 0.0

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{left}" y="24" font-family="monospace" font-size="14">{title}</text>',
    ]
    for i, alpha in enumerate(alphas):
        for j, eps in enumerate(eps_values):
            v = float(scores[i, j])
            x = left + i * cell
            # largest budget on top
            y = top + (len(eps_values) - 1 - j) * cell
            parts.append(
                f'<rect class="cell" x="{x}" y="{y}" width="{cell}" height="{cell}" '
                f'fill="{diverging_color(v, vmax)}" stroke="#ccc" stroke-width="0.5" '
                f'data-alpha="{alpha!r}" data-epsilon="{eps!r}" data-score="{v!r}"/>'
            )
    # x-axis labels (thresholds), thinned to at most ~12 ticks
    stride = max(1, len(alphas) // 12)
    for i, alpha in enumerate(alphas):
        if i % stride and i != len(alphas) - 1:
            continue
        x = left + i * cell + cell / 2
        y = top + cell * len(eps_values) + 14
        parts.append(
            f'<text x="{x}" y="{y}" font-family="monospace" font-size="9" '
            f'text-anchor="middle">{_fmt(alpha)}</text>'
        )
    parts.append(
        f'<text x="{left + cell * len(alphas) / 2}" y="{height - 28}" '
        f'font-family="monospace" font-size="12" text-anchor="middle">'
        f"filter threshold</text>"
    )
    # y-axis labels (budgets)
    for j, eps in enumerate(eps_values):
        x = left - 8
        y = top + (len(eps_values) - 1 - j) * cell + cell / 2 + 3
        parts.append(
            f'<text x="{x}" y="{y}" font-family="monospace" font-size="9" '
            f'text-anchor="end">{_fmt(eps)}</text>'
        )
    parts.append(
        f'<text x="20" y="{top + cell * len(eps_values) / 2}" font-family="monospace" '
        f'font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 20 {top + cell * len(eps_values) / 2})">'
        f"attack budget</text>"
    )
    # legend: blue -> white -> red
    lx = left + cell * len(alphas) + 20
    ly = top
    lh = cell * len(eps_values)
    steps = 32
    for k in range(steps):
        v = vmax * (1.0 - 2.0 * k / (steps - 1))
        parts.append(
            f'<rect x="{lx}" y="{ly + lh * k / steps}" width="16" '
            f'height="{lh / steps + 0.5}" fill="{diverging_color(v, vmax)}"/>'
        )
    for frac, val in ((0.0, vmax), (0.5, 0.0), (1.0, -vmax)):
        parts.append(
            f'<text x="{lx + 22}" y="{ly + lh * frac + 4}" font-family="monospace" '
            f'font-size="9">{_fmt(val)}</text>'
        )
    parts.append(
        f'<text x="{lx}" y="{ly - 8}" font-family="monospace" font-size="10">'
        f"{value_name}</text>"
    )
    parts.append("</svg>")
    return "\n".join(parts)
