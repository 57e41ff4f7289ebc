"""Command-line interface: ``posmaps {check,scan,decompose,witness}``.

Exit codes: 0 when every verdict passes, 1 when any verdict is violated,
2 on invalid input.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import criteria as cr
from . import scan as sc
from .linalg import ContractViolation

EXIT_PASS, EXIT_VIOLATED, EXIT_ERROR = 0, 1, 2

_LIST_KEYS = {"criteria", "alpha", "beta", "param", "map_param"}
_DEFAULTS = {
    "family": None,
    "param": [],
    "map": None,
    "map_param": [],
    "dec": "builtin",
    "side": "B",
    "criteria": [],
    "alpha": [],
    "beta": [],
    "grid": "200",
    "tol": cr.VERDICT_TOL,
    "seed": 0,
    "workers": 1,
    "reference": "positive_map",
    "out": None,
    "format": "csv",
    "regions": None,
}


def read_config(path) -> dict:
    """Flat ``key = value`` file; list-valued keys take whitespace-separated items."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key = key.strip().replace("-", "_")
        value = value.strip()
        out[key] = value.split() if key in _LIST_KEYS else value
    return out


def _kv(items) -> dict:
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"expected key=value, got {item!r}")
        out[key] = value
    return out


def _family_params(raw: dict) -> dict:
    out = {}
    for key, value in raw.items():
        try:
            out[key] = int(value)
        except ValueError:
            try:
                out[key] = float(value)
            except ValueError:
                out[key] = value
    return out


def _add_common(p: argparse.ArgumentParser, with_scan: bool = False) -> None:
    p.add_argument("--config", help="key = value file; command-line flags override it")
    p.add_argument("--family", choices=sc.FAMILIES)
    p.add_argument("--param", action="append", metavar="KEY=VALUE", help="family parameter (repeatable)")
    p.add_argument("--state", help="state matrix file (shortcut for --family file)")
    p.add_argument("--map", choices=sorted(sc.mp.BUILTINS))
    p.add_argument("--map-param", action="append", metavar="KEY=VALUE", help="map parameter, e.g. k=1")
    p.add_argument("--dec", help="builtin | canonical | minimal | shifted:K | preset:1|2|3")
    p.add_argument("--side", choices=("A", "B"))
    p.add_argument("--criteria", nargs="+", metavar="SPEC", help="e.g. ppt moment:alpha=2 theorem2:alpha=1,beta=2")
    p.add_argument("--alpha", nargs="+", type=float, help="alpha values for criteria that lack one")
    p.add_argument("--beta", nargs="+", type=float, help="beta values for criteria that lack one")
    p.add_argument("--tol", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--out", help="output file (default stdout)")
    if with_scan:
        p.add_argument("--grid", help="divisions per axis, sample count, or LO:HI:STEP for 1-d sweeps")
        p.add_argument("--workers", type=int)
        p.add_argument("--reference", help="criterion used for reference fractions")
        p.add_argument(
            "--regions", nargs="+", metavar="LETTER=SPEC",
            help="also write region labels, strongest first, e.g. S=ppt R=theorem2:alpha=1,beta=2",
        )


def _merge(args: argparse.Namespace) -> dict:
    opts = dict(_DEFAULTS)
    if getattr(args, "config", None):
        opts.update(read_config(args.config))
    for key, value in vars(args).items():
        if value is not None and key != "config":
            opts[key] = value
    if opts.get("state"):
        opts["family"] = "file"
        opts["param"] = list(opts["param"]) + [f"path={opts['state']}"]
    return opts


def _grid_fields(grid: str) -> dict:
    grid = str(grid)
    if ":" in grid:
        lo, hi, step = (float(x) for x in grid.split(":"))
        return {"span": (lo, hi), "step": step}
    return {"grid": int(grid)}


def config_from_options(opts: dict) -> sc.ScanConfig:
    if not opts.get("family"):
        raise ValueError("no state family given (use --family or --state)")
    criteria = sc.expand_criteria(
        opts["criteria"] or ["positive_map"],
        [float(a) for a in opts["alpha"]],
        [float(b) for b in opts["beta"]],
    )
    return sc.ScanConfig(
        family=opts["family"],
        criteria=tuple(criteria),
        family_params=tuple(_family_params(_kv(opts["param"])).items()),
        map_name=opts["map"],
        map_params=tuple(_kv(opts["map_param"]).items()),
        decomposition=opts["dec"],
        side=opts["side"],
        tol=float(opts["tol"]),
        seed=int(opts["seed"]),
        workers=int(opts.get("workers", 1)),
        reference=opts.get("reference") or None,
        **_grid_fields(opts.get("grid", "200")),
    )


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _verdict_line(label: str, v: cr.CriterionVerdict) -> str:
    status = "PASS" if v.passed else "VIOLATED"
    flags = f" [{', '.join(sorted(v.flags))}]" if v.flags else ""
    return f"{status:8s} {label:40s} side={v.side} margin={v.margin:+.6e}{flags}"


def cmd_check(args) -> int:
    opts = _merge(args)
    opts["grid"] = "1"
    cfg = config_from_options(opts)
    points, _ = sc.grid_points(cfg)
    if cfg.family not in ("file",):
        points = [_single_point(cfg, opts)]
    report = sc.ScanReport(cfg, sc._evaluate_chunk(cfg, list(enumerate(points))))
    verdicts = report.records[0].verdicts
    if opts["format"] == "json":
        rows = [{**v.row(), "criterion": s.label, "flags": sorted(v.flags)} for s, v in zip(cfg.criteria, verdicts)]
        _emit(json.dumps(rows, indent=1) + "\n", opts["out"])
    else:
        _emit("".join(_verdict_line(s.label, v) + "\n" for s, v in zip(cfg.criteria, verdicts)), opts["out"])
    return EXIT_PASS if all(v.passed for v in verdicts) else EXIT_VIOLATED


def _single_point(cfg: sc.ScanConfig, opts: dict) -> dict:
    """Family parameters of a single-state check come from ``--param``."""
    fp = cfg.fparams
    need = {
        "isotropic": ("p",),
        "sigma": ("p",),
        "rot_invariant": ("q", "r"),
        "two_qubit": ("a", "q"),
        "random_separable": ("sample",),
        "random": ("sample",),
    }[cfg.family]
    missing = [k for k in need if k not in fp and k != "sample"]
    if missing:
        raise ValueError(f"family {cfg.family} needs --param {', '.join(k + '=...' for k in missing)}")
    return {k: float(fp.get(k, 0)) if k != "sample" else int(fp.get(k, 0)) for k in need}


def cmd_scan(args) -> int:
    opts = _merge(args)
    cfg = config_from_options(opts)
    report = sc.run_scan(cfg)
    text = sc.report_json(report) if opts["format"] == "json" else sc.report_csv(report)
    _emit(text, opts["out"])
    if opts.get("regions"):
        sets = []
        for item in opts["regions"]:
            letter, _, spec = item.partition("=")
            sets.append((letter, sc.CriterionSpec.parse(spec).label))
        target = Path(opts["out"]).with_suffix(".regions.csv") if opts["out"] else None
        _emit(sc.regions_csv(report, sets), target)
    if opts["out"]:
        Path(opts["out"]).with_suffix(".fractions.csv").write_text(sc.fractions_csv(report))
    for label in report.labels:
        ref = report.reference_fraction.get(label, float("nan"))
        print(f"{label:40s} fraction={report.detection_fraction[label]:.6f} reference={ref:.6f}", file=sys.stderr)
    if report.skipped:
        print(f"skipped {report.skipped} infeasible grid points", file=sys.stderr)
    return EXIT_PASS if all(f == 0 for f in report.detection_fraction.values()) else EXIT_VIOLATED


def cmd_decompose(args) -> int:
    dec = sc.build_decomposition(args.map, args.d, args.dec or "builtin", **_kv(args.map_param))
    xi, eta = dec.trace_form if dec.trace_form is not None else (float("nan"), float("nan"))
    k1, k2 = dec.kappa
    rec = {"map": dec.name, "d": args.d, "xi": xi, "eta": eta, "kappa1": k1, "kappa2": k2}
    if args.format == "json":
        print(json.dumps(rec))
    else:
        print("map,d,xi,eta,kappa1,kappa2")
        print(f"{dec.name},{args.d},{xi:.12g},{eta:.12g},{k1},{k2}")
    return EXIT_PASS


def cmd_witness(args) -> int:
    opts = _merge(args)
    opts["criteria"] = ["positive_map"]
    cfg = config_from_options(opts)
    point = sc.grid_points(cfg)[0][0] if cfg.family == "file" else _single_point(cfg, opts)
    state = sc.build_state(cfg, point)
    dec = sc.config_decomposition(cfg, state.subsystem_dim(cfg.side))
    betas = [float(b) for b in opts["beta"]] or [1, 2, 3, 4, 5, 6, 8, 10]
    rep = cr.tailor_made_witness(state, dec, cfg.side, betas=betas)
    doc = {
        "detected": rep.detected,
        "lambda_minus": rep.lambda_minus,
        "mean_value": rep.mean_value,
        "beta0": rep.beta0,
        "series": [
            {"beta": b, "value": v, "normalized": n}
            for (b, v), (_, n) in zip(rep.approximation_series, rep.normalized_series)
        ],
    }
    if opts["format"] == "json":
        _emit(json.dumps(doc, indent=1) + "\n", opts["out"])
    else:
        lines = [f"detected={rep.detected} lambda_minus={rep.lambda_minus:.12g} mean={rep.mean_value:.12g} beta0={rep.beta0}"]
        lines.append("beta,value,normalized")
        lines += [f"{s['beta']:g},{s['value']:.12g},{s['normalized']:.12g}" for s in doc["series"]]
        _emit("\n".join(lines) + "\n", opts["out"])
    return EXIT_VIOLATED if rep.detected else EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="posmaps", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="evaluate criteria on a single state")
    _add_common(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("scan", help="evaluate criteria over a parameter grid")
    _add_common(p, with_scan=True)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("decompose", help="print xi, eta, kappa1, kappa2 of a decomposition")
    p.add_argument("--map", required=True, choices=sorted(sc.mp.BUILTINS))
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--map-param", action="append", metavar="KEY=VALUE")
    p.add_argument("--dec", default="builtin")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("witness", help="tailor-made witness and its power series")
    _add_common(p)
    p.set_defaults(func=cmd_witness)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, ContractViolation, OSError, KeyError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
