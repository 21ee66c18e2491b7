"""Command line front end.

``slpc run``     stream a synthetic or CSV dataset through the greedy
                 learner, write report.json / rounds.csv / SVG plots.
``slpc oracle``  desk-scale exact mode: enumerate the curve classes, run
                 the perturbed leader and report regret against the best
                 curve in hindsight.

Exit codes: 0 ok, 1 runtime failure, 2 configuration error, 3 I/O error,
4 enumeration cap exceeded.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .datagen import gen_cubic, gen_param6, read_points_csv
from .geometry import loss
from .greedy import GreedyParams, run_stream
from .lattice import (GridSizeError, LatticeGrid, ModelConfig,
                      enumerate_classes, sleeping_bandit_params)
from .metrics import best_in_hindsight, r_squared
from .perturbed import ExactLearner
from .plotting import write_curve_plot

__all__ = ["main"]

_PLOT_PAIRS_6D = ((0, 1), (2, 4), (3, 5))


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slpc",
        description="sequential learning of principal curves from streams")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the greedy learner on a stream")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--synthetic", choices=("cubic", "param6"))
    src.add_argument("--input", help="CSV file, one point per row")
    run.add_argument("--n", type=int, default=None,
                     help="synthetic stream length (cubic: 100, param6: 200)")
    run.add_argument("--noise", type=float, default=0.0)
    run.add_argument("--uniform-x", action="store_true",
                     help="cubic only: sample the abscissa uniformly "
                          "instead of the arc length")
    run.add_argument("--trials", type=int, default=1)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", default="slpc_out", help="output directory")
    run.add_argument("--p", type=int, default=20)
    run.add_argument("--R", type=float, default=None)
    run.add_argument("--delta", type=float, default=None)
    run.add_argument("--L", type=float, default=None)
    run.add_argument("--t0", type=int, default=3)
    run.add_argument("--epsilon", type=float, default=None)
    run.add_argument("--alpha", type=float, default=None)
    run.add_argument("--beta", type=float, default=None)
    run.add_argument("--eta", type=float, default=None)
    run.add_argument("--horizon", type=int, default=None,
                     help="known horizon for the default schedule")
    run.add_argument("--max-local-grid", type=int, default=24)
    run.add_argument("--max-neighborhood", type=int, default=400)
    run.add_argument("--cheap-backfill", action="store_true",
                     help="credit alpha per elapsed round to newcomers "
                          "instead of replaying past rounds")
    run.add_argument("--length-cap", type=float, default=None,
                     help="enforce this length bound on neighbourhood "
                          "candidates (off by default)")
    run.add_argument("--plot-rounds", default="",
                     help="comma-separated absolute round indices to "
                          "snapshot from trial 0")

    orc = sub.add_parser("oracle", help="exact enumerated mode (desk scale)")
    osrc = orc.add_mutually_exclusive_group(required=True)
    osrc.add_argument("--input", help="CSV file, one point per row")
    osrc.add_argument("--n", type=int, help="uniform stream length")
    orc.add_argument("--d", type=int, default=1)
    orc.add_argument("--R", type=float, default=2.0)
    orc.add_argument("--delta", type=float, default=1.0)
    orc.add_argument("--p", type=int, default=2)
    orc.add_argument("--L", type=float, default=None)
    orc.add_argument("--seed", type=int, default=0)
    orc.add_argument("--cap", type=int, default=200_000)
    orc.add_argument("--out", default=None, help="JSON output path (stdout "
                                                 "when omitted)")
    return parser


def _load_run_points(args) -> np.ndarray:
    if args.input:
        return read_points_csv(args.input)
    n = args.n
    if args.synthetic == "cubic":
        return gen_cubic(n or 100, seed=args.seed, noise=args.noise,
                         arc_uniform=not args.uniform_x)
    return gen_param6(n or 200, seed=args.seed, noise=args.noise)


def _resolve_run_config(args, X) -> tuple:
    cfg = ModelConfig.from_points(X, p=args.p, delta=args.delta, t0=args.t0,
                                  L=args.L)
    if args.R is not None:
        cfg = ModelConfig(
            d=cfg.d, R=args.R,
            delta=args.delta if args.delta is not None else args.R / 10.0,
            p=args.p,
            L=args.L if args.L is not None
            else 0.01 * args.p * float(np.sqrt(cfg.d)) * args.R,
            t0=args.t0)
    horizon = args.horizon if args.horizon is not None else len(X)
    base = sleeping_bandit_params(1, max(horizon, 2), cfg)
    # eta defaults to the desk-scale heuristic c1/delta^2 (see README);
    # pass --eta to pin anything else, e.g. the schedule value
    params = GreedyParams(
        epsilon=args.epsilon if args.epsilon is not None else base.epsilon,
        alpha=args.alpha if args.alpha is not None else base.alpha,
        beta=args.beta if args.beta is not None else base.beta,
        eta=args.eta if args.eta is not None else cfg.c1 / cfg.delta ** 2,
        max_local_grid=args.max_local_grid,
        max_neighborhood=args.max_neighborhood,
        full_backfill=not args.cheap_backfill,
        length_cap=args.length_cap,
    )
    return cfg, params


def _run_one_trial(X, cfg, grid, params, seed_seq):
    learner, records = run_stream(X, cfg, grid, params, seed=seed_seq)
    return learner, records


def _cmd_run(args) -> int:
    X = _load_run_points(args)
    cfg, params = _resolve_run_config(args, X)
    grid = LatticeGrid(cfg.d, cfg.R, cfg.delta)
    trials = args.trials
    if trials < 1:
        raise ValueError("--trials must be >= 1")
    seeds = np.random.SeedSequence(args.seed).spawn(trials)

    workers = int(os.environ.get("SLPC_THREADS", "1") or "1")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(
                lambda s: _run_one_trial(X, cfg, grid, params, s), seeds))
    else:
        results = [_run_one_trial(X, cfg, grid, params, s) for s in seeds]

    os.makedirs(args.out, exist_ok=True)
    per_trial = []
    for learner, records in results:
        per_trial.append({
            "cumulative_loss": float(sum(r.loss for r in records)),
            "regret": None,
            "r_squared": r_squared(X, learner.current),
        })
    losses = np.array([t["cumulative_loss"] for t in per_trial])
    report = {
        "config": {
            "d": cfg.d, "R": cfg.R, "delta": cfg.delta, "p": cfg.p,
            "L": cfg.L, "t0": cfg.t0, "c0": cfg.c0,
            "epsilon": params.epsilon, "alpha": params.alpha,
            "beta": params.beta, "eta": params.eta,
            "max_local_grid": params.max_local_grid,
            "max_neighborhood": params.max_neighborhood,
            "full_backfill": params.full_backfill,
            "length_cap": params.length_cap,
            "n": len(X), "trials": trials, "seed": args.seed,
            "source": args.input or args.synthetic, "noise": args.noise,
        },
        "per_trial": per_trial,
        "mean": float(np.mean(losses)),
        "std": float(np.std(losses, ddof=1)) if trials > 1 else 0.0,
    }
    with open(os.path.join(args.out, "report.json"), "w",
              encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")

    with open(os.path.join(args.out, "rounds.csv"), "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial", "t", "phase", "k", "loss", "reward",
                         "win_prob"])
        for trial, (_, records) in enumerate(results):
            for r in records:
                writer.writerow([
                    trial, r.t, r.phase, r.chosen.segment_count,
                    f"{r.loss:.17g}", f"{r.reward:.17g}",
                    "" if r.win_probability is None
                    else f"{r.win_probability:.17g}",
                ])

    _write_plots(args, X, results[0])
    return 0


def _plot_pairs(d: int):
    if d == 2:
        return ((0, 1),)
    if d == 6:
        return _PLOT_PAIRS_6D
    return tuple((i, i + 1) for i in range(0, d - 1, 2))


def _write_plots(args, X, trial0):
    learner, records = trial0
    pairs = _plot_pairs(X.shape[1])

    def dump(tag, curve):
        for (i, j) in pairs:
            name = f"plot_{tag}_c{i + 1}c{j + 1}.svg" if len(pairs) > 1 \
                else f"plot_{tag}.svg"
            write_curve_plot(os.path.join(args.out, name), X,
                             [curve.vertices], coord_pair=(i, j),
                             title=f"{tag} (coords {i + 1},{j + 1})")

    dump("final", learner.current)
    wanted = {int(s) for s in args.plot_rounds.split(",") if s.strip()}
    for r in records:
        if r.t in wanted:
            dump(f"round_{r.t}", r.chosen)


def _load_oracle_stream(args) -> np.ndarray:
    if args.input:
        return read_points_csv(args.input)
    rng = np.random.default_rng(args.seed)
    radius = float(np.sqrt(args.d)) * args.R
    pts = rng.uniform(-radius, radius, size=(args.n, args.d))
    norms = np.linalg.norm(pts, axis=1)
    outside = norms > radius
    if np.any(outside):  # fold the corners back into the ball
        pts[outside] *= (radius / norms[outside])[:, None] * 0.99
    return pts


def _cmd_oracle(args) -> int:
    X = _load_oracle_stream(args)
    d = X.shape[1]
    L = args.L if args.L is not None else 2.0 * float(np.sqrt(d)) * args.R
    cfg = ModelConfig(d=d, R=args.R, delta=args.delta, p=args.p, L=L)
    grid = LatticeGrid(d, args.R, args.delta, max_points=args.cap)
    classes = enumerate_classes(grid, args.p, L, cap=args.cap)
    candidates = [f for k in sorted(classes) for f in classes[k]]
    if not candidates:
        raise ValueError("no candidate lines on this grid; raise L or p")
    learner = ExactLearner(candidates, cfg, seed=args.seed)
    choices = learner.run(X)
    losses = [loss(c, x) for c, x in zip(choices, X)]
    best_line, best_loss = best_in_hindsight(X, grid, args.p, L, cap=args.cap)
    payload = {
        "n_candidates": len(candidates),
        "choices": [[list(map(float, v)) for v in c.vertices]
                    for c in choices],
        "per_round_losses": losses,
        "cumulative_loss": float(np.sum(losses)),
        "best_in_hindsight_loss": best_loss,
        "best_in_hindsight": [list(map(float, v))
                              for v in best_line.vertices],
        "regret": float(np.sum(losses)) - best_loss,
    }
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_oracle(args)
    except GridSizeError as exc:
        print(f"slpc: enumeration cap exceeded: {exc}", file=sys.stderr)
        return 4
    except (ValueError, argparse.ArgumentTypeError) as exc:
        print(f"slpc: configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"slpc: I/O error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # pragma: no cover - defensive
        print(f"slpc: failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
