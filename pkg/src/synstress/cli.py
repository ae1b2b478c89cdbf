"""Command-line surface: train, eval, sweep, heatmap, classify.

Exit codes: 0 success, 2 usage or config error, 3 training divergence,
4 corrupt checkpoint, 5 sweep cell failure, 6 heatmap input error.
All outputs are byte-deterministic for fixed inputs and seeds.
"""
from __future__ import annotations

import argparse
import csv
import json
import platform
import sys
from collections import Counter
from pathlib import Path

import numpy as np

from . import __version__
from .attacks import AttackSpec, adversarial_evaluate
from .checkpoint import (
    Checkpoint,
    CheckpointError,
    TrainingMeta,
    load_checkpoint,
    save_checkpoint,
)
from .envs import ENV_IDS, make_env
from .harness import (
    SweepCellError,
    run_attack_sweep,
    run_combined_sweep,
    run_filter_sweep,
)
from .heatmap import render_heatmap
from .policy import DESK_HIDDEN, MlpSpec
from .ppo import PpoConfig, TrainingDiverged, evaluate_per_seed, train
from .results import read_results_csv, render_real, write_results_csv
from .scoring import ClassificationPolicy, classify, integrated_score
from .sweepconfig import ConfigError, parse_config

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DIVERGED = 3
EXIT_BAD_CHECKPOINT = 4
EXIT_SWEEP_CELL = 5
EXIT_HEATMAP_INPUT = 6


class HeatmapInputError(Exception):
    pass


def _parse_hidden(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.replace(",", " ").split())


def _parse_seeds(text: str) -> list[int]:
    return [int(tok) for tok in text.replace(",", " ").split()]


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def cmd_train(args) -> int:
    env_spec = make_env(args.env)
    mlp_spec = MlpSpec(
        input_dim=env_spec.state_dim,
        hidden=_parse_hidden(args.hidden),
        output_dim=env_spec.action_dim,
    )
    cfg = PpoConfig(
        learning_rate=args.lr,
        batch_size=args.batch_size,
        clip=args.clip,
        gamma=args.gamma,
        gae_lambda=args.gae_lambda,
        rollout_len=args.rollout_len,
        epochs_per_update=args.epochs,
        entropy_coef=args.entropy_coef,
        value_coef=args.value_coef,
        total_steps=args.total_steps,
    )
    result = train(env_spec, mlp_spec, cfg, args.seed)
    final_return = result.curve[-1].mean_return if result.curve else float("nan")
    meta = TrainingMeta(
        env_id=env_spec.id,
        seed=args.seed,
        total_steps=args.total_steps,
        final_mean_return=final_return,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out, Checkpoint(policy=result.policy, value=result.value, meta=meta))
    curve_path = Path(args.curve) if args.curve else out.with_suffix(out.suffix + ".curve.csv")
    with open(curve_path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["iteration", "steps", "mean_return"])
        for pt in result.curve:
            w.writerow([pt.iteration, pt.steps, render_real(pt.mean_return)])
    print(f"checkpoint: {out}")
    print(f"training curve: {curve_path}")
    print(f"final mean return: {render_real(final_return)}")
    return EXIT_OK


def cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    env_spec = make_env(ckpt.meta.env_id)
    seeds = _parse_seeds(args.seeds)
    if not seeds:
        raise ConfigError("at least one evaluation seed is required")
    if args.attack:
        spec = AttackSpec(
            method=args.attack,
            epsilon=args.eps,
            steps=args.attack_steps,
            step_size=args.attack_step_size,
            rng_seed=args.attack_seed,
        )
        returns = [
            adversarial_evaluate(ckpt.policy, env_spec, spec, [s]) for s in seeds
        ]
    else:
        returns = evaluate_per_seed(ckpt.policy, env_spec, seeds)
    for seed, ret in zip(seeds, returns):
        print(f"seed {seed}: {render_real(ret)}")
    mean = float(np.mean(returns))
    print(f"mean ({len(seeds)} seeds): {render_real(mean)}")
    if args.log:
        log = Path(args.log)
        new = not log.exists()
        with open(log, "a", encoding="utf-8", newline="") as fh:
            w = _writer(fh)
            if new:
                w.writerow(["checkpoint", "env", "attack", "epsilon", "seed", "return"])
            for seed, ret in zip(seeds, returns):
                w.writerow(
                    [
                        args.checkpoint,
                        env_spec.id,
                        args.attack or "none",
                        render_real(args.eps if args.attack else 0.0),
                        seed,
                        render_real(ret),
                    ]
                )
    return EXIT_OK


def _write_provenance(path: Path, result) -> None:
    doc = {
        "config_hash": result.config_hash,
        "env": result.env_id,
        "backend": result.backend,
        "versions": {
            "synstress": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
        "eval_seeds": list(result.eval_seeds),
        "tau": result.tau,
        "baselines": {
            "clean": result.j_clean_baseline,
            "adversarial": list(result.j_adv_baseline),
        },
        "alphas": {k: [float(a) for a in v] for k, v in result.alphas.items()},
        "epsilon_values": [float(e) for e in result.eps_values],
        "parameter_stats": {
            kind: [
                {
                    "alpha": rec.alpha,
                    "removed": rec.removed_count,
                    "compactness": rec.compactness,
                }
                for rec in recs
            ]
            for kind, recs in result.parameter_stats.items()
        },
        "perturbation_log": result.perturbation_log,
    }
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def cmd_sweep(args) -> int:
    cfg = parse_config(args.config)
    if args.workers is not None:
        cfg = type(cfg)(**{**cfg.__dict__, "workers": args.workers})
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)

    if cfg.mode == "filters":
        curves = run_filter_sweep(cfg)
        with open(out, "w", encoding="utf-8", newline="") as fh:
            w = _writer(fh)
            w.writerow(["filter", "alpha", "J_clean_filt", "compactness", "removed"])
            for kind, curve in curves.items():
                for a, j, c, r in zip(
                    curve.alphas, curve.returns, curve.compactness, curve.removed_counts
                ):
                    w.writerow([kind, render_real(a), render_real(j), render_real(c), r])
        print(f"filter sweep results: {out}")
        return EXIT_OK

    if cfg.mode == "attack":
        eps_values, js = run_attack_sweep(cfg)
        with open(out, "w", encoding="utf-8", newline="") as fh:
            w = _writer(fh)
            w.writerow(["epsilon", "J_adv_base"])
            for e, j in zip(eps_values, js):
                w.writerow([render_real(e), render_real(j)])
        print(f"attack sweep results: {out}")
        return EXIT_OK

    journal = out.with_suffix(out.suffix + ".partial.jsonl")
    result = run_combined_sweep(cfg, journal_path=journal, resume=args.resume)
    write_results_csv(out, result.records)
    _write_provenance(out.with_suffix(out.suffix + ".provenance.json"), result)
    journal.unlink(missing_ok=True)
    print(f"sweep results: {out} ({len(result.records)} cells)")
    return EXIT_OK


def cmd_heatmap(args) -> int:
    records = [r for r in read_results_csv(args.results) if r.filter_kind == args.filter]
    if not records:
        raise HeatmapInputError(
            f"no rows for filter {args.filter!r} in {args.results}"
        )
    alphas = sorted({r.alpha for r in records})
    eps_values = sorted({r.epsilon for r in records})
    by_cell = {(r.alpha, r.epsilon): r for r in records}
    if len(by_cell) != len(alphas) * len(eps_values):
        raise HeatmapInputError(
            f"incomplete grid for filter {args.filter!r}: {len(by_cell)} cells, "
            f"expected {len(alphas) * len(eps_values)}"
        )
    field = {"s_adv": "s_adv", "s_clean": "s_clean", "s_delta": "s_delta"}[args.value]
    scores = np.array(
        [[getattr(by_cell[(a, e)], field) for e in eps_values] for a in alphas]
    )
    svg = render_heatmap(
        alphas,
        eps_values,
        scores,
        title=f"{args.filter} parameter scores ({args.value})",
        value_name=args.value,
    )
    Path(args.out).write_text(svg + "\n", encoding="utf-8")
    print(f"heatmap: {args.out}")
    return EXIT_OK


def cmd_classify(args) -> int:
    records = read_results_csv(args.results)
    if not records:
        raise HeatmapInputError(f"no rows in {args.results}")
    if args.tau is not None:
        policy = ClassificationPolicy(tau=args.tau, relative=not args.absolute)
        records = [
            type(r)(
                **{
                    **r.__dict__,
                    "label": classify(r.s_adv, policy.resolve(r.j_clean_baseline)),
                }
            )
            for r in records
        ]
    groups: dict[tuple[str, float], list] = {}
    for r in records:
        groups.setdefault((r.filter_kind, r.alpha), []).append(r)

    print("filter,alpha,majority_label,n_fragile,n_robust,n_antifragile,S_integrated")
    for (kind, alpha), rows in sorted(groups.items()):
        rows = sorted(rows, key=lambda r: r.epsilon)
        counts = Counter(r.label for r in rows)
        majority = max(
            ("fragile", "robust", "antifragile"), key=lambda lbl: (counts[lbl], lbl)
        )
        eps = [r.epsilon for r in rows]
        if len(eps) >= 2:
            s_int = integrated_score(
                np.array(eps),
                np.array([r.j_adv_filtered for r in rows]),
                np.array([r.j_adv_baseline for r in rows]),
            )
        else:
            s_int = rows[0].s_adv
        print(
            f"{kind},{render_real(alpha)},{majority},{counts['fragile']},"
            f"{counts['robust']},{counts['antifragile']},{render_real(s_int)}"
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="synstress",
        description="Train PPO control policies and stress-test them with "
        "synaptic filtering and adversarial observation attacks.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a PPO policy and write a checkpoint")
    t.add_argument("--env", choices=ENV_IDS, required=True)
    t.add_argument("--hidden", default=",".join(str(w) for w in DESK_HIDDEN))
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--total-steps", type=int, required=True)
    t.add_argument("--lr", type=float, default=1e-4)
    t.add_argument("--batch-size", type=int, default=128)
    t.add_argument("--clip", type=float, default=0.2)
    t.add_argument("--gamma", type=float, default=0.99)
    t.add_argument("--gae-lambda", type=float, default=0.95)
    t.add_argument("--rollout-len", type=int, default=2048)
    t.add_argument("--epochs", type=int, default=10)
    t.add_argument("--entropy-coef", type=float, default=0.0)
    t.add_argument("--value-coef", type=float, default=0.5)
    t.add_argument("--out", required=True)
    t.add_argument("--curve", default=None)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint, optionally under attack")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--seeds", default="1,2,3,4,5,6,7,8,9,10")
    e.add_argument("--attack", choices=("fgsm", "bim", "pgd"), default=None)
    e.add_argument("--eps", type=float, default=0.0)
    e.add_argument("--attack-steps", type=int, default=10)
    e.add_argument("--attack-step-size", type=float, default=None)
    e.add_argument("--attack-seed", type=int, default=0)
    e.add_argument("--log", default=None, help="append per-seed returns to this CSV")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="run a sweep described by a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--out", default="results.csv")
    s.add_argument("--resume", action="store_true")
    s.add_argument("--workers", type=int, default=None, help="override config workers")
    s.set_defaults(func=cmd_sweep)

    h = sub.add_parser("heatmap", help="render a score heatmap SVG from results")
    h.add_argument("--results", required=True)
    h.add_argument("--filter", required=True, choices=("hpf", "lpf", "pwf"))
    h.add_argument("--value", choices=("s_adv", "s_clean", "s_delta"), default="s_adv")
    h.add_argument("--out", required=True)
    h.set_defaults(func=cmd_heatmap)

    c = sub.add_parser("classify", help="summarize labels per (filter, threshold)")
    c.add_argument("--results", required=True)
    c.add_argument("--tau", type=float, default=None, help="override tolerance")
    c.add_argument(
        "--absolute",
        action="store_true",
        help="treat --tau as absolute reward units instead of a fraction",
    )
    c.set_defaults(func=cmd_classify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TrainingDiverged as e:
        print(f"error: training diverged: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    except CheckpointError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BAD_CHECKPOINT
    except SweepCellError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SWEEP_CELL
    except HeatmapInputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_HEATMAP_INPUT
    except (ConfigError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
