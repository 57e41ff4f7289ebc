"""Grid scans of separability criteria over state families."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from . import criteria as cr
from . import maps as mp
from . import states as st
from .linalg import read_matrix

CSV_SCHEMA = "posmaps-scan v1"
FAMILIES = ("isotropic", "rot_invariant", "sigma", "two_qubit", "random_separable", "random", "file")
CRITERIA = (
    "positive_map",
    "ppt",
    "nielsen_kempe",
    "weak_majorization",
    "moment",
    "renyi",
    "tsallis",
    "norm",
    "theorem2",
    "qmax",
    "channel_entropy",
    "channel_majorization",
    "aeq1",
    "beq1",
    "mm_map",
    "mm_submaj",
    "mm_norm",
)
_NUMERIC = {"alpha", "beta", "n", "overlap_tol"}


# -- criterion specs --------------------------------------------------------


@dataclass(frozen=True)
class CriterionSpec:
    """A criterion name with its parameters, e.g. ``theorem2:alpha=1,beta=2``."""

    name: str
    params: tuple = ()

    @classmethod
    def parse(cls, text: str) -> "CriterionSpec":
        name, _, rest = text.strip().partition(":")
        if name not in CRITERIA:
            raise ValueError(f"unknown criterion {name!r}; choose from {', '.join(CRITERIA)}")
        params = {}
        for item in filter(None, (s.strip() for s in rest.split(","))):
            key, sep, value = item.partition("=")
            if not sep:
                raise ValueError(f"criterion parameter {item!r} is not key=value")
            params[key] = float(value) if key in _NUMERIC else value
        return cls(name, tuple(sorted(params.items())))

    def get(self, key, default=None):
        return dict(self.params).get(key, default)

    def with_params(self, **extra) -> "CriterionSpec":
        merged = dict(self.params)
        merged.update({k: v for k, v in extra.items() if v is not None})
        return CriterionSpec(self.name, tuple(sorted(merged.items())))

    @property
    def label(self) -> str:
        if not self.params:
            return self.name
        body = ",".join(f"{k}={_fmt(v)}" for k, v in self.params)
        return f"{self.name}:{body}"


def _fmt(v) -> str:
    if isinstance(v, float):
        return str(int(v)) if v.is_integer() else repr(v)
    return str(v)


def expand_criteria(specs, alphas=(), betas=()) -> list[CriterionSpec]:
    """Fill missing ``alpha``/``beta`` from the given grids (Cartesian product)."""
    needs_alpha = {"moment", "renyi", "tsallis", "theorem2"}
    out = []
    for spec in specs:
        spec = CriterionSpec.parse(spec) if isinstance(spec, str) else spec
        a_list = [spec.get("alpha")] if spec.get("alpha") is not None or spec.name not in needs_alpha else list(alphas)
        b_list = [spec.get("beta")] if spec.get("beta") is not None or spec.name != "theorem2" else list(betas)
        if not a_list or not b_list:
            raise ValueError(f"criterion {spec.name!r} needs alpha/beta values")
        for a in a_list:
            for b in b_list:
                s = spec.with_params(alpha=a, beta=b)
                if s not in out:
                    out.append(s)
    return out


def evaluate(spec: CriterionSpec, state, dec, side: str, tol: float) -> cr.CriterionVerdict:
    """Run one criterion on one state."""
    p = dict(spec.params)
    name = spec.name
    side = p.get("side", side)
    if name == "ppt":
        return cr.check_ppt(state, tol)
    if name == "nielsen_kempe":
        return cr.check_nielsen_kempe(state, p.get("side", "A"), tol)
    if dec is None:
        raise ValueError(f"criterion {name!r} needs a map")
    if name == "positive_map":
        return cr.check_positive_map(state, dec, side, tol)
    if name == "weak_majorization":
        return cr.check_weak_majorization(state, dec, side, tol)
    if name == "moment":
        return cr.check_moment_inequality(state, dec, p["alpha"], side, tol)
    if name in ("renyi", "tsallis"):
        return cr.check_renyi_inequality(state, dec, p["alpha"], name, side, tol)
    if name == "norm":
        return cr.check_norm_inequality(state, dec, side, tol)
    if name == "theorem2":
        return cr.check_theorem2(state, dec, p["alpha"], p["beta"], p.get("variant", "i"), side, tol)
    if name == "qmax":
        return cr.compute_qmax(state, dec, side, p.get("overlap_tol", cr.OVERLAP_TOL), tol)[1]
    if name == "channel_entropy":
        return cr.check_channel_entropy(state, dec, p.get("alpha"), p.get("variant", "von_neumann"), side, tol)
    if name == "channel_majorization":
        return cr.check_channel_majorization(state, dec, side, tol)
    if name in ("aeq1", "beq1"):
        v_a, v_b = cr.check_aeq1_beq1(state, dec, int(p.get("n", 2)), side, tol)
        return v_a if name == "aeq1" else v_b
    if name.startswith("mm_"):
        verdicts = cr.check_maximally_mixed_equivalence(state, dec, side, tol)
        return verdicts[("mm_map", "mm_submaj", "mm_norm").index(name)]
    raise ValueError(f"unknown criterion {name!r}")


# -- configuration ----------------------------------------------------------


@dataclass(frozen=True)
class ScanConfig:
    """Definition of a scan.

    ``family_params`` fixes family parameters (``d``, ``p``, ``path`` ...).
    ``grid`` is the number of divisions per swept axis for 2-d families and
    the number of samples for random families; ``step`` and ``span`` define
    1-d sweeps. ``decomposition`` is one of ``builtin``, ``canonical``,
    ``minimal``, ``shifted:k`` or ``preset:1|2|3`` (reduction map presets).
    """

    family: str
    criteria: tuple
    family_params: tuple = ()
    map_name: Optional[str] = None
    map_params: tuple = ()
    decomposition: str = "builtin"
    side: str = "B"
    grid: int = 200
    step: float = 0.001
    span: Optional[tuple] = None
    tol: float = cr.VERDICT_TOL
    seed: int = 0
    workers: int = 1
    reference: Optional[str] = "positive_map"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; choose from {', '.join(FAMILIES)}")
        if not self.criteria:
            raise ValueError("criteria list is empty")
        if self.grid < 1 or self.step <= 0:
            raise ValueError("grid must be >= 1 and step > 0")
        if self.span is not None and not self.span[0] <= self.span[1]:
            raise ValueError(f"empty sweep range {self.span}")
        if self.side not in ("A", "B"):
            raise ValueError("side must be 'A' or 'B'")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        specs = tuple(CriterionSpec.parse(c) if isinstance(c, str) else c for c in self.criteria)
        object.__setattr__(self, "criteria", specs)
        object.__setattr__(self, "family_params", tuple(sorted(dict(self.family_params).items())))
        object.__setattr__(self, "map_params", tuple(sorted(dict(self.map_params).items())))

    @property
    def fparams(self) -> dict:
        return dict(self.family_params)


@dataclass
class PointRecord:
    index: int
    params: dict
    verdicts: tuple


@dataclass
class ScanReport:
    config: ScanConfig
    records: list
    skipped: int = 0
    detection_fraction: dict = field(default_factory=dict)
    reference_fraction: dict = field(default_factory=dict)

    @property
    def labels(self) -> list[str]:
        return [s.label for s in self.config.criteria]

    def detected(self, label: str) -> np.ndarray:
        k = self.labels.index(label)
        return np.array([not r.verdicts[k].passed for r in self.records], dtype=bool)


# -- families and decompositions --------------------------------------------


def _frange(lo: float, hi: float, step: float) -> np.ndarray:
    n = int(math.floor((hi - lo) / step + 1e-9))
    return np.round(lo + step * np.arange(n + 1), 12)


def grid_points(cfg: ScanConfig) -> tuple[list[dict], int]:
    """Deterministic list of family parameter points plus the count of skipped infeasible points."""
    fp = cfg.fparams
    fam = cfg.family
    if fam in ("isotropic", "sigma"):
        d = int(fp.get("d", 4))
        lo, hi = cfg.span if cfg.span else ((0.0, 1.0) if fam == "isotropic" else (0.001, 0.999))
        return [{"p": float(p)} for p in _frange(lo, hi, cfg.step)], 0
    if fam == "rot_invariant":
        p = float(fp.get("p", 0.0))
        n = cfg.grid
        points, skipped = [], 0
        for i in range(n + 1):
            for j in range(n + 1):
                q, r = i / n, j / n
                if 1.0 - p - q - r < -1e-12:
                    skipped += 1
                    continue
                points.append({"q": q, "r": r})
        return points, skipped
    if fam == "two_qubit":
        n = cfg.grid
        return [{"a": i / n, "q": j / n} for i in range(1, n) for j in range(1, n)], 0
    if fam in ("random_separable", "random"):
        return [{"sample": k} for k in range(cfg.grid)], 0
    if fam == "file":
        return [{"path": str(fp["path"])}], 0
    raise ValueError(f"unknown family {fam!r}")


def build_state(cfg: ScanConfig, point: dict) -> st.BipartiteState:
    fp = cfg.fparams
    fam = cfg.family
    if fam == "isotropic":
        return st.isotropic_state(int(fp.get("d", 4)), point["p"])
    if fam == "sigma":
        return st.rot_invariant_state(point["p"], 1.0 - point["p"], 0.0, 0.0)
    if fam == "rot_invariant":
        p = float(fp.get("p", 0.0))
        s = max(0.0, 1.0 - p - point["q"] - point["r"])
        return st.rot_invariant_state(p, point["q"], point["r"], s)
    if fam == "two_qubit":
        return st.two_qubit_family(point["a"], point["q"])
    if fam in ("random_separable", "random"):
        d_a = int(fp.get("d_a", fp.get("d", 2)))
        d_b = int(fp.get("d_b", fp.get("d", 2)))
        rng = np.random.default_rng([cfg.seed, point["sample"]])
        if fam == "random":
            return st.random_state(d_a, d_b, seed=rng)
        return st.random_separable(d_a, d_b, int(fp.get("terms", 4)), seed=rng)
    if fam == "file":
        mat, (d_a, d_b) = read_matrix(point["path"])
        return st.BipartiteState(mat, d_a, d_b)
    raise ValueError(f"unknown family {fam!r}")


def state_dims(cfg: ScanConfig) -> tuple[int, int]:
    points, _ = grid_points(cfg)
    if not points:
        raise ValueError("scan grid is empty")
    return build_state(cfg, points[0]).dims


def build_decomposition(map_name, d: int, decomposition: str = "builtin", **map_params) -> mp.DecomposedMap:
    """Resolve a map name and decomposition keyword to a :class:`DecomposedMap`."""
    kind, _, arg = decomposition.partition(":")
    if kind == "preset":
        if map_name not in (None, "reduction"):
            raise ValueError("presets exist only for the reduction map")
        return mp.reduction_preset(d, int(arg))
    if map_name is None:
        raise ValueError("no map given")
    params = {k: (int(v) if str(v).lstrip("-").isdigit() else v) for k, v in map_params.items()}
    if kind == "builtin":
        return mp.builtin(map_name, d, **params)
    if kind == "canonical":
        base = mp.builtin(map_name, d, **params)
        return mp.canonical_decomposition(base.choi, name=f"{map_name}_canonical")
    if kind in ("minimal", "shifted"):
        if map_name != "transposition":
            raise ValueError("minimal and shifted decompositions exist only for the transposition map")
        if kind == "minimal":
            return mp.minimal_transposition_decomposition(d)
        seq = mp.transposition_shift_sequence(d)
        k = int(arg or 0)
        if not 0 <= k < len(seq):
            raise ValueError(f"shift count must lie in [0, {len(seq) - 1}]")
        return seq[k]
    raise ValueError(f"unknown decomposition {decomposition!r}")


@lru_cache(maxsize=16)
def _cached_decomposition(map_name, d, decomposition, map_params):
    return build_decomposition(map_name, d, decomposition, **dict(map_params))


def config_decomposition(cfg: ScanConfig, d: int) -> Optional[mp.DecomposedMap]:
    if cfg.map_name is None and not cfg.decomposition.startswith("preset"):
        return None
    return _cached_decomposition(cfg.map_name, d, cfg.decomposition, cfg.map_params)


# -- running ----------------------------------------------------------------


def _evaluate_chunk(cfg: ScanConfig, chunk: list) -> list[PointRecord]:
    out = []
    for index, point in chunk:
        state = build_state(cfg, point)
        dec = config_decomposition(cfg, state.subsystem_dim(cfg.side))
        verdicts = tuple(evaluate(spec, state, dec, cfg.side, cfg.tol) for spec in cfg.criteria)
        out.append(PointRecord(index, point, verdicts))
    return out


def run_scan(cfg: ScanConfig) -> ScanReport:
    """Evaluate every criterion on every grid point; output does not depend on ``workers``."""
    points, skipped = grid_points(cfg)
    indexed = list(enumerate(points))
    if cfg.workers == 1 or len(indexed) < 2:
        records = _evaluate_chunk(cfg, indexed)
    else:
        size = max(1, math.ceil(len(indexed) / (cfg.workers * 4)))
        chunks = [indexed[k : k + size] for k in range(0, len(indexed), size)]
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            records = [r for part in pool.map(_evaluate_chunk, [cfg] * len(chunks), chunks) for r in part]
    records.sort(key=lambda r: r.index)
    report = ScanReport(cfg, records, skipped)
    _fractions(report)
    return report


def _fractions(report: ScanReport) -> None:
    total = len(report.records)
    ref_mask = None
    if report.config.reference is not None:
        ref_mask = reference_mask(report)
    for label in report.labels:
        det = report.detected(label)
        report.detection_fraction[label] = float(det.sum() / total) if total else float("nan")
        if ref_mask is not None:
            n_ref = int(ref_mask.sum())
            report.reference_fraction[label] = float(det.sum() / n_ref) if n_ref else float("nan")


def reference_mask(report: ScanReport) -> np.ndarray:
    """Points violated by the reference criterion (evaluated on the fly if not in the list)."""
    cfg = report.config
    ref = CriterionSpec.parse(cfg.reference)
    if ref.label in report.labels:
        return report.detected(ref.label)
    mask = []
    for rec in report.records:
        state = build_state(cfg, rec.params)
        dec = config_decomposition(cfg, state.subsystem_dim(cfg.side))
        mask.append(not evaluate(ref, state, dec, cfg.side, cfg.tol).passed)
    return np.array(mask, dtype=bool)


# -- outputs ----------------------------------------------------------------


def _num(x) -> str:
    if x is None or x == "":
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def report_csv(report: ScanReport) -> str:
    """One row per grid point per criterion, preceded by a schema comment line."""
    buf = io.StringIO()
    buf.write(f"# {CSV_SCHEMA}\n")
    keys = list(report.records[0].params) if report.records else []
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["index", *keys, "criterion", "side", "alpha", "beta", "margin", "passed"])
    for rec in report.records:
        for spec, v in zip(report.config.criteria, rec.verdicts):
            writer.writerow(
                [rec.index, *(_num(rec.params[k]) for k in keys), spec.label, v.side,
                 _num(v.alpha), _num(v.beta), _num(v.margin), int(v.passed)]
            )
    return buf.getvalue()


def report_json(report: ScanReport) -> str:
    cfg = report.config
    doc = {
        "schema": CSV_SCHEMA,
        "config": {
            **{k: v for k, v in asdict(cfg).items() if k != "criteria"},
            "criteria": report.labels,
        },
        "skipped": report.skipped,
        "detection_fraction": report.detection_fraction,
        "reference_fraction": report.reference_fraction,
        "records": [
            {
                "index": r.index,
                "params": r.params,
                "verdicts": [
                    {**v.row(), "criterion": spec.label, "flags": sorted(v.flags)}
                    for spec, v in zip(cfg.criteria, r.verdicts)
                ],
            }
            for r in report.records
        ],
    }
    return json.dumps(doc, indent=1, sort_keys=True, default=_json_default)


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, CriterionSpec):
        return x.label
    raise TypeError(f"not serializable: {type(x).__name__}")


def region_labels(report: ScanReport, sets: list[tuple[str, str]]) -> list[str]:
    """Classify each point by the smallest pass-set containing it.

    ``sets`` lists ``(letter, criterion label)`` pairs from the strongest
    criterion to the weakest, e.g. ``[('S', 'ppt'), ('R', ...), ('N', ...),
    ('M', ...)]``. Points violating every listed criterion get ``'none'``.
    """
    masks = [(letter, ~report.detected(label)) for letter, label in sets]
    out = []
    for k in range(len(report.records)):
        out.append(next((letter for letter, m in masks if m[k]), "none"))
    return out


def regions_csv(report: ScanReport, sets: list[tuple[str, str]]) -> str:
    buf = io.StringIO()
    buf.write(f"# {CSV_SCHEMA} regions\n")
    keys = list(report.records[0].params) if report.records else []
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([*keys, "region"])
    for rec, lab in zip(report.records, region_labels(report, sets)):
        writer.writerow([*(_num(rec.params[k]) for k in keys), lab])
    return buf.getvalue()


def fractions_csv(report: ScanReport) -> str:
    """Detection fraction per criterion with its total power ``alpha+beta``."""
    buf = io.StringIO()
    buf.write(f"# {CSV_SCHEMA} fractions\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["criterion", "alpha", "beta", "alpha_plus_beta", "fraction", "reference_fraction"])
    for spec in report.config.criteria:
        a, b = spec.get("alpha"), spec.get("beta")
        total = (a or 0) + (b or 0) if a is not None else None
        writer.writerow(
            [spec.label, _num(a), _num(b), _num(total),
             _num(report.detection_fraction[spec.label]),
             _num(report.reference_fraction.get(spec.label, ""))]
        )
    return buf.getvalue()
