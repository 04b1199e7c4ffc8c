"""Command line entry point.

Every subcommand writes ``report.json`` (schema ``rangelens-report-v1``) and,
where relevant, CSV files into ``--out``.  Output depends only on the inputs
and ``--seed``.  Exit codes: 0 success, 1 a check failed, 2 bad usage or input.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import _rng, kernels, models, recover, report, verify
from .config import (ConfigError, load_config, model_from_config, network_from_config,
                     report_section, verification_config)
from .errors import CloudParseError, InvalidModelError, UnsupportedModelError
from .netsim import RandomNetwork, forward

SCHEMA = "rangelens-report-v1"
THEOREMS = {
    "1": ("hamming_isometry", "activation_generality"),
    "3": ("distance_kernel",),
    "4": ("cosine_map",),
    "5": ("covering_propagation",),
    "props": ("norm_halving", "concentration"),
}


class UsageError(Exception):
    pass


def _clean(v):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v) if math.isfinite(v) else None
    return v


def dump_report(command: str, seed, result: dict) -> str:
    doc = {"schema": SCHEMA, "command": command, "seed": seed, "result": result}
    return json.dumps(_clean(doc), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _out_paths(out):
    """``--out`` may name a directory or a .json file."""
    if out is None:
        return None, None
    p = Path(out)
    if p.suffix == ".json":
        p.parent.mkdir(parents=True, exist_ok=True)
        return p.parent, p
    p.mkdir(parents=True, exist_ok=True)
    return p, p / "report.json"


def _emit(args, command, result, extra_files=None):
    text = dump_report(command, args.seed, result)
    out_dir, out_file = _out_paths(args.out)
    if out_file is None:
        sys.stdout.write(text)
    else:
        out_file.write_text(text, encoding="utf-8")
    return out_dir


def _config(args):
    if getattr(args, "config", None) is None:
        return None
    return load_config(args.config)


def _model(args, cfg):
    if getattr(args, "cloud", None):
        pts, labels = report.load_cloud(args.cloud)
        return models.ModelSet.cloud(pts, labels)
    if cfg is None:
        raise UsageError("a model is required: pass --config with a [model] section or --cloud")
    return model_from_config(cfg)


# subcommands

def cmd_simulate(args):
    cfg = _config(args)
    model = _model(args, cfg)
    if cfg is None:
        raise UsageError("simulate needs --config with [[network.layers]]")
    net = network_from_config(cfg, args.seed)
    pts, labels = models.sample_points(model, args.points, seed=_rng.derive_seed(args.seed, "simulate"))
    outs = forward(net, pts, workers=args.workers)
    layers = []
    for i, o in enumerate(outs, start=1):
        nrm = np.linalg.norm(o, axis=1)
        layers.append({"depth": i, "width": o.shape[1], "mean_norm": float(nrm.mean()),
                       "zero_outputs": int(np.sum(nrm == 0))})
    result = {"points": args.points, "input_dim": model.n,
              "network": [l.to_dict() for l in net.layers], "layers": layers}
    out_dir, _ = _out_paths(args.out)
    if out_dir is not None:
        report.save_cloud(out_dir / "cloud_input.txt", pts, labels)
        files = ["cloud_input.txt"]
        if args.export_layers:
            for i, o in enumerate(outs, start=1):
                report.save_cloud(out_dir / f"cloud_layer{i}.txt", o, labels)
                files.append(f"cloud_layer{i}.txt")
        result["files"] = files
    _emit(args, "simulate", result)
    return 0


def cmd_kernel_table(args):
    rows = kernels.kernel_table(args.grid)
    cols = list(rows[0])
    lines = [",".join(cols)] + [",".join(f"{r[c]:.17g}" for c in cols) for r in rows]
    csv_text = "\n".join(lines) + "\n"
    out_dir, _ = _out_paths(args.out)
    if out_dir is None:
        sys.stdout.write(csv_text)
        return 0
    (out_dir / "kernel_table.csv").write_text(csv_text, encoding="utf-8")
    _emit(args, "kernel-table", {"grid": args.grid, "files": ["kernel_table.csv"]})
    return 0


def _sample_for(args, model):
    if model.kind == models.CLOUD:
        return model.points
    pts, _ = models.sample_points(model, args.points, seed=_rng.derive_seed(args.seed, "sample"))
    return pts


def cmd_mean_width(args):
    cfg = _config(args)
    model = _model(args, cfg)
    pts = _sample_for(args, model)
    est = models.estimate_mean_width(pts, args.trials, seed=args.seed)
    result = {"estimate": est.value, "std_error": est.std_error, "trials": est.trials,
              "sample_size": est.sample_size, "kind": "lower estimate (sup over sample)",
              "C": args.C}
    if model.kind != models.CLOUD:
        result["closed_form_bound"] = models.mean_width_bound(model, args.C)
    _emit(args, "mean-width", result)
    return 0


def cmd_covering(args):
    cfg = _config(args)
    model = _model(args, cfg)
    pts = _sample_for(args, model)
    eps = sorted(args.eps)
    rows = []
    for e in eps:
        rec = models.greedy_epsilon_net(pts, e)
        row = {"epsilon": e, "greedy_net_size": rec.net_size_greedy}
        if model.kind != models.CLOUD:
            row["closed_form_bound"] = models.covering_bound(model, e)
            if model.kind == models.SPARSE:
                row["stirling_bound"] = models.covering_bound_stirling(model, e)
        rows.append(row)
    sizes = {e: r["greedy_net_size"] for e, r in zip(eps, rows)}
    dudley = models.dudley_bound(lambda e: min(sizes[v] for v in sizes if v <= e), eps, args.C)
    _emit(args, "covering", {"nets": rows, "dudley_integral_greedy": dudley,
                             "sample_size": len(pts), "C": args.C})
    return 0


def _selected_checks(theorem):
    if theorem == "all":
        keys = ["1", "3", "4", "5", "props"]
    else:
        keys = [theorem]
    return [name for k in keys for name in THEOREMS[k]]


def cmd_verify(args):
    cfg = _config(args)
    vc = verification_config(cfg, args.seed)
    if args.workers is not None:
        vc.workers = args.workers
    reports = []
    for name in _selected_checks(args.theorem):
        if name == "activation_generality":
            for act in ({"kind": "capped_relu", "cap": 0.5}, "hard_tanh"):
                reports.append(verify.check_activation_generality(vc, act))
        else:
            reports.append(verify.CHECKS[name](vc))
    passed = all(r.passed for r in reports)
    _emit(args, "verify", {"theorem": args.theorem, "config": vc.to_dict(), "passed": passed,
                           "reports": [r.to_dict() for r in reports]})
    for r in reports:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.theorem_id}", file=sys.stderr)
    return 0 if passed else 1


def _read_vector(path):
    vals = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].replace(",", " ").split()
            try:
                vals.extend(float(t) for t in text)
            except ValueError:
                raise CloudParseError(path, lineno, "non-numeric value") from None
    v = np.array(vals)
    if not np.all(np.isfinite(v)):
        raise CloudParseError(path, 1, "NaN or infinite value")
    return v


def cmd_recover(args):
    cfg = load_config(args.model)
    model = model_from_config(cfg)
    if args.x == "sample":
        x, _ = models.sample_points(model, 1, seed=_rng.derive_seed(args.seed, "recover-x"))
        x = x[0]
    else:
        x = _read_vector(args.x)
        if x.shape != (model.n,):
            raise UsageError(f"--x must hold {model.n} numbers, found {x.size}")
    from .netsim import make_layer
    layer = make_layer(model.n, args.m, "relu", args.layer_seed)
    y = layer(x)
    res = recover.back_project(layer, y, model, truth=x)
    if args.method == "pg":
        res = recover.refine_projected_gradient(layer, y, res.estimate, model, args.iters, truth=x)
    result = {"relative_error": res.relative_error, "iterations": res.iterations,
              "method": res.method, "objective": res.objective, "m": args.m,
              "layer_seed": args.layer_seed}
    out_dir, _ = _out_paths(args.out)
    if out_dir is not None:
        with open(out_dir / "estimate.txt", "w", encoding="utf-8") as fh:
            fh.write(",".join(f"{v:.17g}" for v in res.estimate) + "\n")
        result["estimate_file"] = "estimate.txt"
    else:
        result["estimate"] = res.estimate.tolist()
    _emit(args, "recover", result)
    return 0


def _write_hists(args, histograms):
    out_dir, _ = _out_paths(args.out)
    if out_dir is None:
        return []
    return report.write_histograms(histograms, out_dir)


def cmd_boundary_report(args):
    cfg = _config(args)
    rep_cfg = report_section(cfg)
    if args.input and args.output:
        x, labels = report.load_cloud(args.input)
        y, labels_out = report.load_cloud(args.output)
        if len(x) != len(y) or not np.array_equal(labels, labels_out):
            raise UsageError("input and output clouds must be aligned row by row with equal labels")
    elif args.input or args.output:
        raise UsageError("--input and --output must be given together")
    else:
        if cfg is None:
            raise UsageError("pass --input/--output clouds or --config with a model and network")
        model = model_from_config(cfg)
        net = network_from_config(cfg, args.seed)
        x, labels = models.sample_points(model, args.points, seed=_rng.derive_seed(args.seed, "boundary"))
        y = forward(net, x, workers=args.workers)[-1]
    bins = args.bins or int(rep_cfg.get("bins", 50))
    rep = report.boundary_pair_stats(x, y, labels, bins=bins, workers=args.workers, seed=args.seed)
    files = _write_hists(args, rep.histograms)
    result = rep.to_dict()
    result["files"] = files
    result["points"] = len(x)
    _emit(args, "boundary-report", result)
    return 0


def _parse_bin(text):
    try:
        lo, hi = (float(eval_angle(t)) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bin must look like lo,hi (radians), got {text!r}")
    return lo, hi


def eval_angle(text: str) -> float:
    """A number, optionally written with ``pi`` (e.g. ``pi/4``, ``3*pi/4``)."""
    t = text.strip().lower().replace(" ", "")
    if "pi" not in t:
        return float(t)
    num, _, den = t.partition("/")
    coef = num.replace("pi", "").rstrip("*") or "1"
    val = float(coef) * math.pi
    return val / float(den) if den else val


def cmd_angle_report(args):
    cfg = _config(args)
    rep_cfg = report_section(cfg)
    if cfg is not None and "network" in cfg:
        net = network_from_config(cfg, args.seed)
    else:
        widths = [args.n] + [args.width] * args.depth
        net = RandomNetwork.stack(widths, seed=args.seed)
    bins = args.bin or [tuple(b) for b in rep_cfg.get("angle_bins", [(0.0, math.pi / 4)])]
    pairs = args.pairs or int(rep_cfg.get("pairs", 1000))
    depths = args.depths or rep_cfg.get("depths")
    rep = report.angle_bin_propagation(None, net, bins, pairs=pairs, depths=depths,
                                       seed=args.seed, workers=args.workers)
    # reference lines from the iterated expected-angle map
    reference = {}
    for lo, hi in rep.bins:
        key = report.bin_key(lo, hi)
        grid = np.linspace(lo, hi, 2001) if hi > lo else np.array([lo])
        grid = grid[grid > 0]
        reference[key] = [float(np.mean(kernels.angle_map(grid, d) / grid)) if grid.size else None
                          for d in rep.depths]
    files = _write_hists(args, rep.histograms)
    result = rep.to_dict()
    result["expected_mean_ratio"] = reference
    result["files"] = files
    _emit(args, "angle-report", result)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rangelens",
                                description="Random ReLU layer geometry: kernels, checks, analytics.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default=None, help="output directory or report .json path")
        if config:
            sp.add_argument("--config", default=None, help="TOML config file")

    sp = sub.add_parser("simulate", help="sample a model and push it through a network")
    common(sp)
    sp.add_argument("--points", type=int, default=1000)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--export-layers", action="store_true")
    sp.add_argument("--cloud", default=None)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("kernel-table", help="kernel values on an angle grid (CSV)")
    common(sp, config=False)
    sp.add_argument("--grid", type=int, default=64)
    sp.set_defaults(func=cmd_kernel_table)

    sp = sub.add_parser("mean-width", help="Monte Carlo Gaussian mean width")
    common(sp)
    sp.add_argument("--cloud", default=None)
    sp.add_argument("--points", type=int, default=1000)
    sp.add_argument("--trials", type=int, default=200)
    sp.add_argument("--C", type=float, default=1.0)
    sp.set_defaults(func=cmd_mean_width)

    sp = sub.add_parser("covering", help="greedy epsilon-nets and covering bounds")
    common(sp)
    sp.add_argument("--cloud", default=None)
    sp.add_argument("--points", type=int, default=1000)
    sp.add_argument("--eps", type=float, nargs="+", default=[0.3, 0.5])
    sp.add_argument("--C", type=float, default=1.0)
    sp.set_defaults(func=cmd_covering)

    sp = sub.add_parser("verify", help="Monte Carlo checks; exit 1 if any fails")
    common(sp)
    sp.add_argument("--theorem", choices=["1", "3", "4", "5", "props", "all"], default="all")
    sp.add_argument("--workers", type=int, default=None)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("recover", help="recover a layer input from its ReLU output")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default=None)
    sp.add_argument("--model", required=True, help="TOML config with a [model] section")
    sp.add_argument("--layer-seed", type=int, default=0)
    sp.add_argument("--m", type=int, default=2000)
    sp.add_argument("--x", default="sample", help="vector file, or 'sample'")
    sp.add_argument("--method", choices=["bp", "pg"], default="bp")
    sp.add_argument("--iters", type=int, default=100)
    sp.set_defaults(func=cmd_recover)

    sp = sub.add_parser("boundary-report", help="boundary-pair distortion histograms")
    common(sp)
    sp.add_argument("--input", default=None, help="input cloud file")
    sp.add_argument("--output", default=None, help="aligned output cloud file")
    sp.add_argument("--points", type=int, default=1000)
    sp.add_argument("--bins", type=int, default=None)
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_boundary_report)

    sp = sub.add_parser("angle-report", help="angle histograms per input-angle bin and depth")
    common(sp)
    sp.add_argument("--bin", type=_parse_bin, action="append", default=None,
                    help="lo,hi in radians; 'pi' allowed (repeatable)")
    sp.add_argument("--pairs", type=int, default=None)
    sp.add_argument("--depths", type=int, nargs="+", default=None)
    sp.add_argument("--n", type=int, default=100)
    sp.add_argument("--width", type=int, default=1000)
    sp.add_argument("--depth", type=int, default=1)
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_angle_report)
    return p


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (UsageError, ConfigError, CloudParseError, InvalidModelError,
            UnsupportedModelError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli())
