"""Results CSV schema: one row per sweep cell.

Reals are rendered with 17 significant digits so parse(render(x)) == x
exactly for every float64.
"""
from __future__ import annotations

import csv
from pathlib import Path

from .scoring import ScoreRecord

CSV_HEADER = (
    "filter",
    "alpha",
    "epsilon",
    "J_clean_base",
    "J_clean_filt",
    "J_adv_base",
    "J_adv_filt",
    "S_clean",
    "S_adv",
    "S_delta",
    "compactness",
    "label",
)


def render_real(x: float) -> str:
    return format(float(x), ".17g")


def record_row(r: ScoreRecord) -> list[str]:
    return [
        r.filter_kind,
        render_real(r.alpha),
        render_real(r.epsilon),
        render_real(r.j_clean_baseline),
        render_real(r.j_clean_filtered),
        render_real(r.j_adv_baseline),
        render_real(r.j_adv_filtered),
        render_real(r.s_clean),
        render_real(r.s_adv),
        render_real(r.s_delta),
        render_real(r.compactness),
        r.label,
    ]


def write_results_csv(path: str | Path, records: list[ScoreRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in records:
            writer.writerow(record_row(r))


def read_results_csv(path: str | Path) -> list[ScoreRecord]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_HEADER:
            raise ValueError(
                f"unexpected results CSV header in {path}: {header!r}"
            )
        records = []
        for row in reader:
            if len(row) != len(CSV_HEADER):
                raise ValueError(f"malformed results row in {path}: {row!r}")
            records.append(
                ScoreRecord(
                    filter_kind=row[0],
                    alpha=float(row[1]),
                    epsilon=float(row[2]),
                    j_clean_baseline=float(row[3]),
                    j_clean_filtered=float(row[4]),
                    j_adv_baseline=float(row[5]),
                    j_adv_filtered=float(row[6]),
                    s_clean=float(row[7]),
                    s_adv=float(row[8]),
                    s_delta=float(row[9]),
                    compactness=float(row[10]),
                    label=row[11],
                )
            )
    return records
