"""Command-line front end.

Subcommands: ``simulate`` (write a benchmark dataset), ``truth`` (population
bounds by quadrature), ``estimate`` (cross-fit bound report with Wald CIs),
and ``figure1`` (the pure-vs-maximal bound grid over tilt strengths).  Grid
and dataset outputs are CSV with a leading ``#`` comment embedding the
resolved configuration and library version; reports are JSON.  Numeric grid
columns use fixed 12-significant-digit formatting so reruns reproduce bytes.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from . import __version__
from .bounds import (BoundedOutcome, OddsRatio, OutcomeGap, OutcomeGapHolder)
from .coupling import PolicyKind
from .data import TreatmentKind, load_csv, write_csv
from .errors import ConfigError, DataError, GpsensError, NumericError
from .estimators import estimate_bounds
from .nuisance import RegressorSpec
from .oracle import DgpSpec, figure_grid, simulate, truth_bounds

_EXIT_CODES = {ConfigError: 2, DataError: 3, NumericError: 4}

_MODELS = ("bounded", "outcome-gap", "outcome-gap-holder", "odds-ratio")
_POLICIES = {"pure": PolicyKind.PURE, "monotone": PolicyKind.MONOTONE,
             "maximal": PolicyKind.MAXIMAL}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved invocation; echoed into every output file."""

    command: str
    options: Mapping = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"command": self.command, **dict(self.options)},
                          sort_keys=True)


def _fmt(v: float) -> str:
    return f"{float(v):.12g}"


def parse_delta_grid(text: str) -> list[float]:
    """start:stop:step, endpoints inclusive within half a step."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError("delta grid must be start:stop:step")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"bad delta grid {text!r}") from exc
    if step <= 0 or stop < start:
        raise ConfigError("delta grid needs step > 0 and stop >= start")
    out, i = [], 0
    while True:
        v = start + i * step
        if v > stop + 0.5 * step:
            break
        out.append(round(v, 12))
        i += 1
    if not out:
        raise ConfigError("empty delta grid")
    return out


def _build_model(name: str, gamma: float, p: float):
    if name == "bounded":
        return BoundedOutcome()
    if name == "outcome-gap":
        return OutcomeGap(gamma)
    if name == "outcome-gap-holder":
        return OutcomeGapHolder(gamma, p)
    if name == "odds-ratio":
        return OddsRatio(gamma)
    raise ConfigError(f"unknown model {name!r}")


def _write_grid_csv(path: Path, config: RunConfig, header: list[str],
                    rows: list[list]) -> None:
    with path.open("w", encoding="utf-8") as fh:
        fh.write(f"# gpsens {__version__} config={config.to_json()}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(c if isinstance(c, str) else _fmt(c)
                              for c in row) + "\n")


def _cmd_simulate(args) -> int:
    params = {}
    if args.pi is not None:
        params["pi"] = args.pi
    spec = DgpSpec(args.dgp, n=args.n, seed=args.seed, params=params)
    dataset = simulate(spec)
    config = RunConfig("simulate", {"dgp": spec.name, "n": spec.n,
                                    "seed": spec.seed, "params": spec.params,
                                    "kind": dataset.kind.value})
    write_csv(dataset, args.out,
              comments=[f"gpsens {__version__} config={config.to_json()}"])
    return 0


def _cmd_truth(args) -> int:
    deltas = parse_delta_grid(args.delta_grid) if args.delta_grid else [args.delta]
    if deltas == [None]:
        raise ConfigError("truth needs --delta or --delta-grid")
    policy = _POLICIES[args.policy]
    dgp = DgpSpec("motivating", n=1, seed=0)
    config = RunConfig("truth", {"model": args.model, "policy": args.policy,
                                 "gamma": args.gamma, "deltas": deltas})
    rows = []
    for d in deltas:
        lo, hi, tau = truth_bounds(dgp, args.model, policy, d, args.gamma)
        rows.append([d, args.gamma, lo, hi, tau])
    out = Path(args.out)
    _write_grid_csv(out, config, ["delta", "gamma", "lower", "upper", "tau"],
                    rows)
    if not args.no_plot:
        from .plotting import render_bound_grid
        grid = [{"delta": r[0], "gamma": r[1], "policy": args.policy,
                 "lower": r[2], "upper": r[3], "tau": r[4]} for r in rows]
        render_bound_grid(grid, out.with_suffix(".png"),
                          title=f"{args.model} / {args.policy} population bounds")
    return 0


def _cmd_estimate(args) -> int:
    kind = TreatmentKind(args.kind)
    data = load_csv(args.data, kind)
    model = _build_model(args.model, args.gamma, args.p)
    policy = _POLICIES[args.policy]
    regressor = RegressorSpec(k=args.knn_k) if args.knn_k else RegressorSpec()
    report = estimate_bounds(data, args.delta, model, policy,
                             folds=args.folds, seed=args.seed,
                             level=args.level, regressor=regressor)
    config = RunConfig("estimate", {
        "data": str(args.data), "kind": args.kind, "model": args.model,
        "policy": args.policy, "delta": args.delta, "gamma": args.gamma,
        "p": args.p, "folds": args.folds, "seed": args.seed,
        "level": args.level, "knn_k": args.knn_k,
    })
    payload = report.to_dict()
    payload["meta"]["config"] = json.loads(config.to_json())
    payload["meta"]["version"] = __version__
    payload = _round_floats(payload)
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return 0


def _cmd_figure1(args) -> int:
    deltas = parse_delta_grid("0:3:0.05")
    gammas = (0.5, 2.0)
    rows = figure_grid(deltas, gammas)
    config = RunConfig("figure1", {"deltas": "0:3:0.05", "gammas": list(gammas)})
    out = Path(args.out)
    _write_grid_csv(out, config,
                    ["delta", "gamma", "policy", "lower", "upper", "tau"],
                    [[r["delta"], r["gamma"], r["policy"], r["lower"],
                      r["upper"], r["tau"]] for r in rows])
    if not args.no_plot:
        from .plotting import render_bound_grid
        render_bound_grid(rows, out.with_suffix(".png"),
                          title="Pure vs maximal policy bounds")
    return 0


def _round_floats(obj):
    if isinstance(obj, float):
        return float(_fmt(obj))
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gpsens",
        description="Generalized treatment policies with sensitivity bounds")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="write a benchmark dataset CSV")
    p_sim.add_argument("--dgp", default="motivating",
                       choices=("motivating", "binary-custom",
                                "continuous-custom"))
    p_sim.add_argument("--n", type=int, required=True)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--pi", type=float, default=None,
                       help="constant propensity (binary-custom only)")
    p_sim.add_argument("--out", required=True)
    p_sim.set_defaults(func=_cmd_simulate)

    p_truth = sub.add_parser("truth", help="population bounds by quadrature")
    p_truth.add_argument("--model", default="outcome-gap", choices=_MODELS)
    p_truth.add_argument("--policy", default="maximal",
                         choices=tuple(_POLICIES))
    p_truth.add_argument("--delta", type=float, default=None)
    p_truth.add_argument("--delta-grid", default=None,
                         help="start:stop:step, endpoints inclusive")
    p_truth.add_argument("--gamma", type=float, default=1.0)
    p_truth.add_argument("--p", type=float, default=1.0)
    p_truth.add_argument("--out", required=True)
    p_truth.add_argument("--no-plot", action="store_true")
    p_truth.set_defaults(func=_cmd_truth)

    p_est = sub.add_parser("estimate", help="cross-fit bound report (JSON)")
    p_est.add_argument("--data", required=True)
    p_est.add_argument("--kind", required=True, choices=("binary", "continuous"))
    p_est.add_argument("--model", required=True, choices=_MODELS)
    p_est.add_argument("--policy", required=True, choices=tuple(_POLICIES))
    p_est.add_argument("--delta", type=float, required=True)
    p_est.add_argument("--gamma", type=float, default=1.0)
    p_est.add_argument("--p", type=float, default=1.0)
    p_est.add_argument("--folds", type=int, default=5)
    p_est.add_argument("--seed", type=int, default=0)
    p_est.add_argument("--level", type=float, default=0.95)
    p_est.add_argument("--knn-k", type=int, default=None)
    p_est.add_argument("--out", default=None)
    p_est.set_defaults(func=_cmd_estimate)

    p_fig = sub.add_parser("figure1",
                           help="pure vs maximal bound grid (CSV + PNG)")
    p_fig.add_argument("--out", required=True)
    p_fig.add_argument("--no-plot", action="store_true")
    p_fig.set_defaults(func=_cmd_figure1)
    return parser


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except GpsensError as exc:
        code = next((c for t, c in _EXIT_CODES.items() if isinstance(exc, t)), 4)
        print(json.dumps({"error": {"type": type(exc).__name__,
                                    "message": str(exc)},
                          "exit_code": code}), file=sys.stderr)
        return code


def main() -> None:
    sys.exit(run())
