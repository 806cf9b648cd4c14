"""Experiment configuration, the benchmark suite and CSV/JSON export."""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .exceptions import ConfigError, UnknownMethod
from .instrumentation import measure_block_speedup
from .matrix_market import load_matrix_market
from .precond import ilu0, ilut
from .problems import (EX5_SHIFT, GridSpec2D, GridSpec3D, ProblemBundle, RankDeficiencyWarning,
                       compute_rho, gen_advection_3d, gen_conv_diff_2d, preprocess_rhs,
                       random_rhs, unit_vector_rhs)
from .solvers import CONVERGED, METHODS, NOT_AVAILABLE, SolveConfig, solve

log = logging.getLogger(__name__)

OUT_ENV = "KRYLOV_MRHS_OUT"
DEFAULT_OUT = "results"

_GEN_PARAMS = {
    "gen2d": {"m": int, "a1": float, "a2": float, "a3": float},
    "gen3d": {"m": int, "nu": float},
}


# ------------------------------------------------------------------ specs

def parse_problem_spec(spec):
    """``gen2d:m=64,a1=5`` / ``gen3d:m=12,nu=1000`` / ``mm:path`` -> (kind, params)."""
    kind, sep, rest = str(spec).partition(":")
    kind = kind.strip().lower()
    if kind == "mm":
        if not rest:
            raise ConfigError("matrix", "mm: needs a file path")
        return kind, {"path": rest}
    if kind not in _GEN_PARAMS:
        raise ConfigError("matrix", f"unknown problem kind {kind!r} (use gen2d, gen3d or mm)")
    params = {}
    for item in filter(None, (t.strip() for t in rest.split(","))):
        key, eq, val = item.partition("=")
        key = key.strip()
        if not eq or key not in _GEN_PARAMS[kind]:
            raise ConfigError("matrix", f"bad {kind} parameter {item!r}")
        try:
            params[key] = _GEN_PARAMS[kind][key](val)
        except ValueError:
            raise ConfigError("matrix", f"parameter {key} has invalid value {val!r}") from None
    return kind, params


def parse_rhs_spec(spec):
    """``default`` / ``unit:12`` / ``random:20`` -> (kind, count)."""
    kind, _, count = str(spec).partition(":")
    kind = kind.strip().lower()
    if kind == "default":
        return kind, None
    if kind not in ("unit", "random"):
        raise ConfigError("rhs", f"unknown right-hand side kind {kind!r}")
    try:
        n = int(count)
    except ValueError:
        raise ConfigError("rhs", f"{kind} needs a positive count, got {count!r}") from None
    if n < 1:
        raise ConfigError("rhs", "count must be positive")
    return kind, n


def parse_precond(spec):
    """``none`` / ``ilu0`` / ``ilut`` / ``ilut:0.05`` -> (kind, droptol)."""
    kind, _, tol = str(spec).strip().lower().partition(":")
    if kind in ("none", "ilu0"):
        if tol:
            raise ConfigError("precond", f"{kind} takes no parameter")
        return kind, None
    if kind == "ilut":
        try:
            droptol = float(tol) if tol else 5e-2
        except ValueError:
            raise ConfigError("precond", f"invalid drop tolerance {tol!r}") from None
        if droptol < 0:
            raise ConfigError("precond", "drop tolerance must be >= 0")
        return kind, droptol
    raise ConfigError("precond", f"unknown preconditioner {kind!r}")


def parse_methods(spec):
    """Comma separated method names, or ``all``."""
    if isinstance(spec, str):
        names = [t.strip().lower() for t in spec.split(",") if t.strip()]
    else:
        names = [str(t).strip().lower() for t in spec]
    if not names:
        raise ConfigError("methods", "no method given")
    if names == ["all"]:
        return tuple(METHODS)
    for nm in names:
        if nm not in METHODS:
            extra = f" ({NOT_AVAILABLE[nm]})" if nm in NOT_AVAILABLE else ""
            raise ConfigError("methods", f"{UnknownMethod(nm)}{extra}")
    return tuple(names)


@dataclass
class RunConfig:
    matrix: str = "gen2d:m=64"
    rhs: str = "default"
    shift: complex = 0.0
    methods: tuple = ("gl-bicg",)
    precond: str = "none"
    tol: float = 1e-10
    maxit: int = 500
    seed: int = 0
    output_dir: str = DEFAULT_OUT
    preprocess_rhs: bool = True

    def __post_init__(self):
        parse_problem_spec(self.matrix)
        parse_rhs_spec(self.rhs)
        parse_precond(self.precond)
        self.methods = parse_methods(self.methods)
        try:
            self.shift = complex(self.shift)
        except (TypeError, ValueError):
            raise ConfigError("shift", f"not a number: {self.shift!r}") from None
        if not (isinstance(self.tol, (int, float)) and self.tol > 0):
            raise ConfigError("tol", "must be a positive number")
        if int(self.maxit) != self.maxit or self.maxit < 1:
            raise ConfigError("maxit", "must be a positive integer")
        if int(self.seed) != self.seed:
            raise ConfigError("seed", "must be an integer")


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _convert(key, raw):
    try:
        if key in ("tol",):
            return float(raw)
        if key in ("maxit", "seed"):
            return int(raw)
        if key == "shift":
            return complex(raw.replace(" ", ""))
        if key == "preprocess_rhs":
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError
    except ValueError:
        raise ConfigError(key, f"invalid value {raw!r}") from None
    return raw


def read_config_file(path):
    """Parse a ``key = value`` config file into a dict of typed values.

    Blank lines and ``#`` comments are ignored; keys are the field names of
    :class:`RunConfig` (``method`` is accepted for ``methods``).
    """
    known = {f.name for f in fields(RunConfig)}
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            key, eq, val = text.partition("=")
            key = key.strip().lower().replace("-", "_")
            if key == "method":
                key = "methods"
            if key == "out":
                key = "output_dir"
            if not eq:
                raise ConfigError(f"line {lineno}", "expected 'key = value'")
            if key not in known:
                raise ConfigError(key, f"unknown key (line {lineno})")
            out[key] = _convert(key, val.strip())
    return out


def resolve_output_dir(flag=None, config_value=None):
    """Flag beats environment variable beats config file beats default."""
    return flag or os.environ.get(OUT_ENV) or config_value or DEFAULT_OUT


# --------------------------------------------------------------- problems

def build_problem(cfg: RunConfig) -> ProblemBundle:
    kind, params = parse_problem_spec(cfg.matrix)
    rhs_kind, count = parse_rhs_spec(cfg.rhs)
    if kind == "gen2d":
        bundle = gen_conv_diff_2d(GridSpec2D(**params))
    elif kind == "gen3d":
        bundle = gen_advection_3d(GridSpec3D(**params))
    else:
        a = load_matrix_market(params["path"])
        if rhs_kind == "default":
            rhs_kind, count = "unit", 1
        label = Path(params["path"]).name
        b = unit_vector_rhs(a.n_rows, 1)
        bundle = ProblemBundle(a=a, b=b, label=label,
                               meta=dict(n=a.n_rows, s=1, nnz=a.nnz, generator="mm", path=params["path"]))
    if rhs_kind == "unit":
        bundle.b = unit_vector_rhs(bundle.n, count)
    elif rhs_kind == "random":
        bundle.b = random_rhs(bundle.n, count, seed=cfg.seed)
    bundle.shift = cfg.shift
    bundle.meta.update(s=bundle.s, rho=compute_rho(bundle.a, bundle.s))
    if cfg.shift:
        bundle.meta["shift"] = cfg.shift
    return bundle


def build_preconditioner(spec, a):
    kind, droptol = parse_precond(spec)
    if kind == "none":
        return None
    if kind == "ilu0":
        return ilu0(a)
    return ilut(a, droptol=droptol)


# ---------------------------------------------------------------- results

@dataclass
class SummaryRow:
    example: str
    method: str
    precond: str
    iterations: int
    matvec_cols_A: int
    matvec_cols_AH: int
    wall_time: float
    final_relative_residual: float
    status: str
    vector_ops: int = 0
    n: int = 0
    s: int = 0

    @classmethod
    def from_report(cls, example, precond, report, n=0, s=0):
        return cls(example=example, method=report.method, precond=precond,
                   iterations=report.iterations, matvec_cols_A=report.matvec_cols_A,
                   matvec_cols_AH=report.matvec_cols_AH, wall_time=report.wall_time,
                   final_relative_residual=report.final_relative_residual,
                   status=report.status, vector_ops=report.vector_ops, n=n, s=s)

    @classmethod
    def skipped(cls, example, method, precond, reason="skipped"):
        return cls(example=example, method=method, precond=precond, iterations=0,
                   matvec_cols_A=0, matvec_cols_AH=0, wall_time=0.0,
                   final_relative_residual=float("nan"), status=reason)


SUMMARY_FIELDS = [f.name for f in fields(SummaryRow)]
_INT_FIELDS = {f.name for f in fields(SummaryRow) if f.type in ("int", int)}
_FLOAT_FIELDS = {f.name for f in fields(SummaryRow) if f.type in ("float", float)}


def _fmt_float(x):
    return f"{x:.17g}"


def _csv_value(v):
    return _fmt_float(v) if isinstance(v, float) else v


def _json_value(v):
    if isinstance(v, bool) or v is None:
        return json.dumps(v)
    if isinstance(v, float):
        return _fmt_float(v) if math.isfinite(v) else "null"
    if isinstance(v, int):
        return str(v)
    return json.dumps(v)


def summary_to_json(rows):
    """JSON array of row objects; floats written with 17 significant digits."""
    objs = []
    for row in rows:
        d = asdict(row)
        body = ", ".join(f"{json.dumps(k)}: {_json_value(d[k])}" for k in SUMMARY_FIELDS)
        objs.append("  {" + body + "}")
    return "[\n" + ",\n".join(objs) + ("\n" if objs else "") + "]\n"


def export_summary(rows, out_dir, stem="summary"):
    """Write ``<stem>.csv`` and ``<stem>.json`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"{stem}.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
        w.writerow(SUMMARY_FIELDS)
        for row in rows:
            d = asdict(row)
            w.writerow([_csv_value(d[k]) for k in SUMMARY_FIELDS])
    (out / f"{stem}.json").write_text(summary_to_json(rows), encoding="utf-8")
    return out / f"{stem}.csv", out / f"{stem}.json"


def read_summary_csv(path):
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            kw = {}
            for k, v in rec.items():
                if k in _INT_FIELDS:
                    kw[k] = int(v)
                elif k in _FLOAT_FIELDS:
                    kw[k] = float(v)
                else:
                    kw[k] = v
            rows.append(SummaryRow(**kw))
    return rows


HISTORY_FIELDS = ["iteration", "rel_frob_residual", "cumulative_matvec_cols"]


def export_history(report, path):
    """Residual history, one record per recorded iterate (k = 0 first)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(HISTORY_FIELDS)
        for k, (res, mv) in enumerate(zip(report.history, report.matvec_history)):
            w.writerow([k, _fmt_float(float(res)), int(mv)])
    return path


# ----------------------------------------------------------------- runner

def run_problem(bundle, methods, precond="none", tol=1e-10, maxit=500,
                preprocess=True, history_dir=None, history_prefix=""):
    """Solve ``bundle`` with each method; returns (rows, reports)."""
    b = bundle.b
    if preprocess:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RankDeficiencyWarning)
            b = preprocess_rhs(b)
    factors = build_preconditioner(precond, bundle.a)
    op = bundle.operator(factors)
    cfg = SolveConfig(tol=tol, maxit=maxit)
    rows, reports = [], []
    for name in methods:
        log.info("%s / %s / %s", bundle.label, precond, name)
        _, rep = solve(name, op, b, cfg)
        rows.append(SummaryRow.from_report(bundle.label, precond, rep, n=bundle.n, s=bundle.s))
        reports.append(rep)
        if history_dir is not None:
            export_history(rep, Path(history_dir) / f"{history_prefix}history_{name}.csv")
    return rows, reports


def run_config(cfg: RunConfig):
    """Run a :class:`RunConfig`, writing histories and the summary to its output dir."""
    bundle = build_problem(cfg)
    rows, reports = run_problem(bundle, cfg.methods, cfg.precond, cfg.tol, cfg.maxit,
                                cfg.preprocess_rhs, history_dir=cfg.output_dir)
    export_summary(rows, cfg.output_dir)
    return rows, reports


def exit_code(rows):
    return 0 if all(r.status == CONVERGED for r in rows) else 2


# ------------------------------------------------------------------ suite

SCALES = {
    "desk": {"ex1": 64, "ex23": 12},
    "full": {"ex1": 200, "ex23": 50},
}


@dataclass
class SuiteEntry:
    name: str
    bundle: ProblemBundle | None
    preconds: tuple
    maxit: int = 500
    reason: str = ""


def suite_entries(scale="desk", ex4=None, ex5=None, seed=0):
    if scale not in SCALES:
        raise ConfigError("scale", f"unknown scale {scale!r} (desk or full)")
    sz = SCALES[scale]
    entries = [
        SuiteEntry("ex1", gen_conv_diff_2d(GridSpec2D(sz["ex1"])), ("none", "ilu0")),
        SuiteEntry("ex2", gen_advection_3d(GridSpec3D(sz["ex23"], 1000.0)), ("none", "ilu0")),
        SuiteEntry("ex3", gen_advection_3d(GridSpec3D(sz["ex23"], 10.0)), ("none", "ilu0")),
    ]
    if ex4:
        try:
            a = load_matrix_market(ex4)
            b = ProblemBundle(a=a, b=unit_vector_rhs(a.n_rows, 12), label="ex4",
                              meta=dict(n=a.n_rows, s=12, nnz=a.nnz, rho=compute_rho(a, 12), path=str(ex4)))
            entries.append(SuiteEntry("ex4", b, ("none", "ilut:0.05")))
        except (OSError, ValueError) as exc:
            entries.append(SuiteEntry("ex4", None, ("none", "ilut:0.05"), reason=f"skipped: {exc}"))
    else:
        entries.append(SuiteEntry("ex4", None, ("none", "ilut:0.05"), reason="skipped: no --ex4 file"))
    if ex5:
        try:
            a = load_matrix_market(ex5)
            b = ProblemBundle(a=a, b=random_rhs(a.n_rows, 20, seed=seed), label="ex5",
                              meta=dict(n=a.n_rows, s=20, nnz=a.nnz, rho=compute_rho(a, 20),
                                        path=str(ex5), shift=EX5_SHIFT),
                              shift=EX5_SHIFT)
            entries.append(SuiteEntry("ex5", b, ("none",), maxit=1200))
        except (OSError, ValueError) as exc:
            entries.append(SuiteEntry("ex5", None, ("none",), maxit=1200, reason=f"skipped: {exc}"))
    else:
        entries.append(SuiteEntry("ex5", None, ("none",), maxit=1200, reason="skipped: no --ex5 file"))
    for e in entries:
        if e.bundle is not None:
            e.bundle.label = e.name
    return entries


def rho_table(scale="desk"):
    """Rho without and with ILU0 for the generated examples at full and run scale."""
    rows = []
    scales = ["full"] if scale == "full" else ["full", scale]
    for sc in scales:
        sz = SCALES[sc]
        for name, bundle in (("ex1", gen_conv_diff_2d(GridSpec2D(sz["ex1"]))),
                             ("ex2", gen_advection_3d(GridSpec3D(sz["ex23"], 1000.0))),
                             ("ex3", gen_advection_3d(GridSpec3D(sz["ex23"], 10.0)))):
            fac = ilu0(bundle.a)
            rows.append(dict(example=name, scale=sc, n=bundle.n, s=bundle.s, nnz=bundle.a.nnz,
                             rho=compute_rho(bundle.a, bundle.s),
                             rho_ilu0=compute_rho(bundle.a, bundle.s, fac)))
    return rows


def write_csv(path, rows, header=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = header or (list(rows[0]) if rows else [])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_csv_value(r[k]) for k in header])
    return path


RHO_FIELDS = ["example", "scale", "n", "s", "nnz", "rho", "rho_ilu0"]
SPEEDUP_FIELDS = ["example", "n", "s", "reps", "threads", "t_single_sum", "t_block", "a_ratio"]


def run_suite(out_dir, scale="desk", ex4=None, ex5=None, seed=0, methods=None,
              tol=1e-10, speedup_reps=5):
    """Run every (example, preconditioner, method) cell and write all outputs."""
    out = Path(out_dir)
    methods = tuple(methods or METHODS)
    rows, speed = [], []
    for entry in suite_entries(scale, ex4, ex5, seed):
        if entry.bundle is None:
            warnings.warn(f"{entry.name}: {entry.reason}", stacklevel=2)
            for pc in entry.preconds:
                rows.extend(SummaryRow.skipped(entry.name, m, pc, entry.reason) for m in methods)
            continue
        for pc in entry.preconds:
            r, _ = run_problem(entry.bundle, methods, pc, tol, entry.maxit,
                               history_dir=out / "histories",
                               history_prefix=f"{entry.name}_{pc.replace(':', '')}_")
            rows.extend(r)
        m = measure_block_speedup(entry.bundle.a, entry.bundle.s, reps=speedup_reps, seed=seed)
        speed.append(dict(example=entry.name, n=entry.bundle.n, **asdict(m)))
    export_summary(rows, out)
    write_csv(out / "speedup.csv", speed, SPEEDUP_FIELDS)
    write_csv(out / "rho.csv", rho_table(scale), RHO_FIELDS)
    return rows


def schema_path():
    return Path(__file__).with_name("schemas") / "summary.schema.json"


def validate_summary_json(path_or_obj):
    """Validate a summary against the shipped JSON schema (needs jsonschema)."""
    import jsonschema

    obj = path_or_obj
    if isinstance(path_or_obj, (str, os.PathLike)):
        obj = json.loads(Path(path_or_obj).read_text(encoding="utf-8"))
    schema = json.loads(schema_path().read_text(encoding="utf-8"))
    jsonschema.validate(obj, schema)
    return True
