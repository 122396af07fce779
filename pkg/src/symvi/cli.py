"""Command-line entry point: ``symvi <fit|diagnose|reproduce> [flags]``.

Every command writes its numeric outputs (CSV/JSON) plus a run manifest
into the output directory.  Numeric outputs are byte-identical across
reruns with the same seed; the manifest additionally records wall-clock
timestamps and is the one file excluded from that guarantee.

Exit codes: 0 success, 2 usage error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import sys
import warnings
from dataclasses import fields as dataclass_fields
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import accuracy, asymmetry
from .divergences import parse_divergence
from .errors import MissingSampler, NumericError, UsageError
from .experiments import FIGURES, run_figure
from .families import LocationScaleParams, standard_normal
from .optimize import GridAxis, GridSpec, OptimizerConfig, fit_grid, fit_stochastic
from .output import write_csv, write_json
from .targets import from_spec

CONFIG_KEYS = {f.name for f in dataclass_fields(OptimizerConfig)} - {"seed"}
EXTRA_CONFIG_KEYS = {"n", "grid_lo", "grid_hi", "grid_points"}


def _coerce(raw: str):
    text = raw.strip()
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("none", "null"):
        return None
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def load_config(path) -> dict:
    """Parse the flat ``key = value`` config format (``#`` comments)."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        if key not in CONFIG_KEYS | EXTRA_CONFIG_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = _coerce(raw)
    return values


def merge_config(args) -> dict:
    merged = dict(load_config(args.config)) if args.config else {}
    if getattr(args, "n", None) is not None:
        merged["n"] = args.n
    merged["seed"] = args.seed
    return merged


def _optimizer_config(merged: dict) -> OptimizerConfig:
    kwargs = {k: v for k, v in merged.items() if k in CONFIG_KEYS or k == "seed"}
    return OptimizerConfig(**kwargs)


def write_manifest(out_dir, args, merged_config, outputs, warning_messages=()):
    config_blob = json.dumps(merged_config, sort_keys=True, default=str)
    manifest = {
        "command": list(args.argv_echo),
        "config": merged_config,
        "config_hash": hashlib.sha256(config_blob.encode()).hexdigest(),
        "seed": args.seed,
        "target": getattr(args, "target", None),
        "divergence": getattr(args, "divergence", None),
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "outputs": [str(Path(p).name) for p in outputs],
        "version": __version__,
        "warnings": list(warning_messages),
    }
    return write_json(Path(out_dir) / "manifest.json", manifest)


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------


def cmd_fit(args) -> int:
    target = from_spec(args.target)
    phi = parse_divergence(args.divergence)
    merged = merge_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    captured: list[str] = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if args.method == "sgd":
            cfg = _optimizer_config(merged)
            init = LocationScaleParams(
                np.zeros(target.dim), np.eye(target.dim), standard_normal(target.dim)
            )
            fit = fit_stochastic(phi, target, init, cfg)
            payload = {
                "method": "sgd",
                "target": args.target,
                "divergence": phi.label(),
                **fit.to_dict(),
            }
            trace_rows = list(fit.objective_trace)
            trace_header = ("iteration", "smoothed_objective")
            params = fit.params
            fit_obj = fit
        else:
            lo = merged.get("grid_lo", -5.0)
            hi = merged.get("grid_hi", 5.0)
            n_points = merged.get("grid_points", 41)
            axes = tuple(
                GridAxis(f"nu{i + 1}", lo, hi, n_points) for i in range(target.dim)
            )
            grid = GridSpec(axes)
            base = standard_normal(target.dim)

            def build(point):
                return LocationScaleParams(np.asarray(point), np.eye(target.dim), base)

            mc_n = merged.get("n", 2000)
            res = fit_grid(phi, target, build, grid, mc_n=mc_n, mc_seed=args.seed)
            payload = {
                "method": "grid",
                "target": args.target,
                "divergence": phi.label(),
                "params": res.params.to_dict(),
                "best_point": list(res.point),
                "best_value": res.value,
                "grid_axes": [[ax.name, ax.lo, ax.hi, ax.n] for ax in grid.axes],
                "seed": args.seed,
            }
            names = [ax.name for ax in grid.axes]
            trace_rows = [
                tuple(pt) + (val,)
                for pt, val in zip(grid.points(), res.surface.ravel())
            ]
            trace_header = tuple(names) + ("objective",)
            params = res.params
            fit_obj = res
        captured.extend(str(w.message) for w in caught)

    outputs = [
        write_json(out_dir / "fit_result.json", payload),
        write_csv(out_dir / "trace.csv", trace_header, trace_rows),
    ]
    if target.benchmark is not None:
        report = accuracy(params, target)
        rows = [("scaled_mean_error", i, "", g, e) for i, g, e in report.mean_rows]
        rows += [("correlation_error", i, j, g, e) for i, j, g, e in report.corr_rows]
        outputs.append(
            write_csv(out_dir / "accuracy.csv", ("metric", "i", "j", "group", "value"), rows)
        )
    write_manifest(out_dir, args, merged, outputs, captured)
    return 0


# ---------------------------------------------------------------------------
# diagnose
# ---------------------------------------------------------------------------


def cmd_diagnose(args) -> int:
    if args.n < 100:
        raise UsageError(f"--n must be at least 100, got {args.n}")
    target = from_spec(args.target)
    if target.sampler is None:
        raise MissingSampler(f"target {args.target!r} has no benchmark sampler")
    merged = merge_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(args.seed)
    samples = target.sampler(rng, args.n)
    report = asymmetry(
        target, samples, target.benchmark.mean, reflection=args.reflection
    )
    outputs = [
        write_csv(
            out_dir / "asymmetry.csv",
            ("sample", "alpha"),
            list(enumerate(report.alpha_values)),
        ),
        write_json(
            out_dir / "summary.json",
            {"target": args.target, "seed": args.seed, **report.summary_dict()},
        ),
    ]
    write_manifest(out_dir, args, merged, outputs)
    return 0


# ---------------------------------------------------------------------------
# reproduce
# ---------------------------------------------------------------------------


def cmd_reproduce(args) -> int:
    manifest_path = Path(args.figure)
    if manifest_path.is_file():
        # Replay: re-run the command recorded in an existing manifest.
        manifest = json.loads(manifest_path.read_text())
        return main(manifest["command"])
    if args.figure not in FIGURES:
        raise UsageError(
            f"unknown figure {args.figure!r}; expected one of "
            f"{', '.join(sorted(FIGURES))} or a manifest path"
        )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = run_figure(args.figure, out_dir, seed=args.seed, budget=args.budget)
    write_manifest(
        out_dir,
        args,
        {"seed": args.seed, "budget": args.budget},
        result["files"],
        [str(w.message) for w in caught],
    )
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="symvi",
        description="Variational inference with phi-divergences over location-scale families.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit a variational approximation to a target")
    fit.add_argument("--target", required=True, help="target spec, e.g. student:5:0.7")
    fit.add_argument("--divergence", required=True, help="e.g. reverse_kl or renyi:0.5")
    fit.add_argument("--method", choices=("sgd", "grid"), default="sgd")
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--n", type=int, default=None, help="Monte Carlo samples for grid objectives")
    fit.add_argument("--config", default=None, help="flat key = value config file")
    fit.add_argument("--out", default="symvi-fit")
    fit.set_defaults(func=cmd_fit)

    diag = sub.add_parser("diagnose", help="reflection-asymmetry diagnostics")
    diag.add_argument("--target", required=True)
    diag.add_argument("--n", type=int, default=20000)
    diag.add_argument("--seed", type=int, default=0)
    diag.add_argument("--reflection", choices=("point", "literal"), default="point")
    diag.add_argument("--config", default=None)
    diag.add_argument("--out", default="symvi-diagnose")
    diag.set_defaults(func=cmd_diagnose)

    rep = sub.add_parser("reproduce", help="rebuild a figure/table dataset, or replay a manifest")
    rep.add_argument("figure", help="fig1|fig2|fig3|fig4|table2, or a manifest.json path")
    rep.add_argument("--seed", type=int, default=0)
    rep.add_argument("--budget", type=float, default=1.0, help="scale factor on run sizes")
    rep.add_argument("--out", default=None)
    rep.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    argv = list(argv) if argv is not None else sys.argv[1:]
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv_echo = argv
    if args.command == "reproduce" and args.out is None:
        args.out = f"symvi-{args.figure}" if args.figure in FIGURES else "symvi-replay"
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"symvi {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"symvi {args.command}: numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
