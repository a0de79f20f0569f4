"""Seeded parameter sweeps with CSV and SVG output."""
from __future__ import annotations

import csv
import itertools
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from . import classifiers, events, geometry, risk
from .errors import MarginLabError, ValidationError
from .model import ModelSpec, sample_dataset

TIMING_COLUMNS = ("wall_time",)


# ---------------------------------------------------------------------------
# grid paths


def _set_path(spec: ModelSpec, path: str, value) -> ModelSpec:
    head, _, tail = path.partition(".")
    if head in ("n", "p"):
        return spec.with_(**{head: int(value)})
    if head in ("mu_norm", "eta"):
        return spec.with_(**{head: float(value)})
    if head in ("lambda_max", "lambda_min"):
        head, tail = "sigma", head
    if head in ("sigma", "g_law", "xi_law") and tail:
        part = getattr(spec, head)
        if not hasattr(part, tail) or tail.startswith("_"):
            raise ValidationError(f"unknown grid path {path!r}")
        current = getattr(part, tail)
        cast = int if isinstance(current, int) and not isinstance(current, bool) else float
        return spec.with_(**{head: replace(part, **{tail: cast(value)})})
    raise ValidationError(f"unknown grid path {path!r}")


def trial_seed(master_seed: int, grid_index: int, rep: int) -> int:
    """Deterministic 63-bit seed from (master seed, grid point, repetition)."""
    state = np.random.SeedSequence([int(master_seed), int(grid_index), int(rep)]).generate_state(2, np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1])) & ((1 << 63) - 1)


# ---------------------------------------------------------------------------
# outputs


def _fit(ctx):
    if "clf" not in ctx:
        ctx["clf"] = classifiers.max_margin(ctx["data"])
    return ctx["clf"]


def _n_rho(ctx):
    spec = ctx["spec"]
    return spec.n * spec.rho


def _zeta_sq(ctx):
    return risk.zeta(_fit(ctx).w, ctx["spec"].mu) ** 2


def _prediction(ctx):
    spec = ctx["spec"]
    regime = "noisy" if spec.eta > 0 else "noiseless"
    return risk.predicted_zeta_sq(spec.eta, _n_rho(ctx), spec.mu_norm, regime)


def _events(ctx):
    if "events" not in ctx:
        pred = events.em_event_parameters(ctx["spec"], ctx["config"].delta)
        ctx["events"] = events.event_report(ctx["data"], pred.thresholds())
    return ctx["events"]


def _decomp(ctx):
    if "decomp" not in ctx:
        ctx["decomp"] = geometry.clean_noisy_decomposition(ctx["data"], _fit(ctx))
    return ctx["decomp"]


def _bounds(ctx):
    spec = ctx["spec"]
    return risk.risk_bounds(spec.eta, _n_rho(ctx), spec.mu_norm, spec.g_law.moment(2) * spec.sigma.op_norm(spec.p),
                            ctx["config"].constants)


OUTPUTS = {
    "method": lambda ctx: _fit(ctx).method,
    "min_margin": lambda ctx: _fit(ctx).min_margin,
    "support_condition": lambda ctx: _fit(ctx).method == classifiers.LS,
    "test_error_exact": lambda ctx: risk.test_error_exact(_fit(ctx).w, ctx["spec"].mu, ctx["spec"].sigma, ctx["spec"].eta, ctx["spec"]).value,
    "test_error_mc": lambda ctx: risk.test_error_mc(_fit(ctx).w, ctx["spec"], ctx["config"].n_mc, ctx["seed"]).value,
    "zeta_sq_observed": _zeta_sq,
    "zeta_sq_predicted": lambda ctx: _prediction(ctx).zeta_sq_predicted,
    "zeta_sq_ratio": lambda ctx: _zeta_sq(ctx) / _prediction(ctx).zeta_sq_predicted,
    "eps_realized": lambda ctx: _events(ctx).eps_realized,
    "E1": lambda ctx: _events(ctx).holds["E1"],
    "E2": lambda ctx: _events(ctx).holds["E2"],
    "E3": lambda ctx: _events(ctx).holds["E3"],
    "E4": lambda ctx: _events(ctx).holds["E4"],
    "E5": lambda ctx: _events(ctx).holds["E5"],
    "nu_c": lambda ctx: _decomp(ctx).nu_c,
    "nu_n": lambda ctx: _decomp(ctx).nu_n,
    "noiseless_bound": lambda ctx: _bounds(ctx).noiseless_bound,
    "noisy_bound": lambda ctx: _bounds(ctx).noisy_bound,
}


# ---------------------------------------------------------------------------
# configuration and execution


@dataclass(frozen=True, eq=False)
class SweepConfig:
    base_spec: ModelSpec
    axes: list
    reps: int = 1
    master_seed: int = 0
    outputs: list = field(default_factory=lambda: ["zeta_sq_observed"])
    delta: float = 0.1
    n_mc: int = 10_000
    constants: dict = field(default_factory=dict)
    workers: int = 1

    def __post_init__(self):
        if self.reps < 1:
            raise ValidationError("reps must be at least 1")
        if not self.axes:
            raise ValidationError("a sweep needs at least one axis")
        for path, grid in self.axes:
            if len(grid) == 0:
                raise ValidationError(f"empty grid for {path!r}")
            _set_path(self.base_spec, path, grid[0])
        unknown = [name for name in self.outputs if name not in OUTPUTS]
        if unknown:
            raise ValidationError(f"unknown outputs {unknown}; choose from {sorted(OUTPUTS)}")

    @property
    def axis_names(self) -> list:
        return [path for path, _ in self.axes]

    def grid_points(self) -> list:
        return list(itertools.product(*[list(grid) for _, grid in self.axes]))

    @classmethod
    def from_dict(cls, doc: dict) -> "SweepConfig":
        doc = dict(doc)
        base = ModelSpec.from_dict(doc.pop("base_spec"))
        axes = doc.pop("axes")
        if isinstance(axes, dict):
            axes = list(axes.items())
        return cls(base_spec=base, axes=[(path, list(grid)) for path, grid in axes], **doc)

    @classmethod
    def from_json(cls, text: str) -> "SweepConfig":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class SweepTable:
    columns: list
    rows: list

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> list:
        return [row[name] for row in self.rows]

    def select(self, **coords) -> "SweepTable":
        keep = [row for row in self.rows if all(row[k] == v for k, v in coords.items())]
        return SweepTable(self.columns, keep)


def _run_row(config: SweepConfig, grid_index: int, point: tuple, rep: int) -> dict:
    seed = trial_seed(config.master_seed, grid_index, rep)
    row = {name: value for name, value in zip(config.axis_names, point)}
    row |= {"grid_index": grid_index, "rep": rep, "seed": seed}
    start = time.perf_counter()
    try:
        spec = config.base_spec
        for path, value in zip(config.axis_names, point):
            spec = _set_path(spec, path, value)
        ctx = {"spec": spec, "config": config, "seed": seed, "data": sample_dataset(spec, seed)}
        values = {name: OUTPUTS[name](ctx) for name in config.outputs}
        row |= values | {"status": "ok"}
    except (MarginLabError, np.linalg.LinAlgError) as exc:
        row |= {name: None for name in config.outputs}
        row["status"] = f"{type(exc).__name__}: {exc}"
    row["wall_time"] = time.perf_counter() - start
    return row


def _run_chunk(args):
    config, jobs = args
    return [_run_row(config, *job) for job in jobs]


def run_sweep(config: SweepConfig) -> SweepTable:
    """Every (grid point, repetition) pair, ordered by grid index then rep."""
    jobs = [(gi, point, rep) for gi, point in enumerate(config.grid_points()) for rep in range(config.reps)]
    if config.workers > 1 and len(jobs) > 1:
        chunks = [jobs[i::config.workers] for i in range(config.workers)]
        with ProcessPoolExecutor(config.workers) as pool:
            rows = [row for part in pool.map(_run_chunk, [(config, c) for c in chunks]) for row in part]
    else:
        rows = _run_chunk((config, jobs))
    rows.sort(key=lambda row: (row["grid_index"], row["rep"]))
    columns = config.axis_names + ["grid_index", "rep", "seed", *config.outputs, "status", "wall_time"]
    return SweepTable(columns, rows)


def grid_means(table: SweepTable, value: str, by: list) -> list:
    """(coordinates, mean, standard error, count) per group of ``by``, in first-seen order."""
    groups: dict = {}
    for row in table.rows:
        if row.get("status", "ok") != "ok" or row[value] is None:
            continue
        groups.setdefault(tuple(row[k] for k in by), []).append(float(row[value]))
    out = []
    for key, vals in groups.items():
        arr = np.asarray(vals)
        se = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
        out.append((key, float(arr.mean()), se, int(arr.size)))
    return out


# ---------------------------------------------------------------------------
# emitters


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _write_csv(path, columns, rows) -> None:
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_fmt(row.get(col)) for col in columns])
    except OSError as exc:
        raise ValidationError(f"cannot write {path}: {exc}") from exc


def emit_csv(table: SweepTable, path, include_timing: bool = False) -> None:
    """Raw rows; timing columns are left out by default so reruns are byte-identical."""
    columns = [c for c in table.columns if include_timing or c not in TIMING_COLUMNS]
    _write_csv(path, columns, table.rows)


def emit_summary_csv(table: SweepTable, path, axes: list, outputs: list) -> None:
    numeric = [name for name in outputs
               if any(isinstance(row.get(name), (int, float, np.number)) and not isinstance(row.get(name), bool)
                      for row in table.rows)]
    # every grid point gets a line, even when none of its rows succeeded
    summary: dict = {}
    for row in table.rows:
        key = tuple(row[a] for a in axes)
        summary.setdefault(key, dict(zip(axes, key)) | {"n_ok": 0})
    for name in numeric:
        for key, mean, se, count in grid_means(table, name, axes):
            entry = summary.setdefault(key, dict(zip(axes, key)))
            entry |= {f"{name}_mean": mean, f"{name}_se": se, "n_ok": count}
    columns = list(axes) + ["n_ok"] + [f"{n}_{s}" for n in numeric for s in ("mean", "se")]
    _write_csv(path, columns, list(summary.values()))


def emit_svg(table: SweepTable, x_axis: str, y_axes: list, path, scales=("linear", "linear"),
             width: int = 640, height: int = 420) -> None:
    """One polyline per y series (and per combination of the other grid axes) through grid-point means."""
    if not y_axes:
        raise ValidationError("emit_svg needs at least one y series")
    if len(table) == 0:
        raise ValidationError("emit_svg needs a non-empty table")
    xscale, yscale = scales
    others = [c for c in table.columns if c not in (x_axis, "grid_index", "rep", "seed", "status", "wall_time")
              and c in table.rows[0] and c not in y_axes and not _is_output(table, c)]
    series = []
    for y in y_axes:
        for key, mean, _, _ in grid_means(table, y, [*others, x_axis]):
            label = y + "".join(f" {o}={v}" for o, v in zip(others, key[:-1]))
            series.append((label, float(key[-1]), mean))
    names = list(dict.fromkeys(s[0] for s in series))

    def tf(v, scale):
        if scale == "log":
            return math.log10(v) if v > 0 else None
        return v

    pts = {name: [(tf(x, xscale), tf(y, yscale)) for lab, x, y in series if lab == name] for name in names}
    pts = {k: sorted((a, b) for a, b in v if a is not None and b is not None) for k, v in pts.items()}
    allx = [a for v in pts.values() for a, _ in v]
    ally = [b for v in pts.values() for _, b in v]
    if not allx:
        raise ValidationError("no plottable points (log scale with non-positive values?)")
    x0, x1 = min(allx), max(allx)
    y0, y1 = min(ally), max(ally)
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1
    margin = 60

    def px(a):
        return margin + (a - x0) / (x1 - x0) * (width - 2 * margin)

    def py(b):
        return height - margin - (b - y0) / (y1 - y0) * (height - 2 * margin)

    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
             '<rect width="100%" height="100%" fill="white"/>',
             f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" y2="{height - margin}" stroke="black"/>',
             f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>']
    tick = lambda v, scale: f"1e{v:.2g}" if scale == "log" else f"{v:.3g}"  # noqa: E731
    for a in (x0, x1):
        parts.append(f'<text x="{px(a):.2f}" y="{height - margin + 18}" font-size="11" text-anchor="middle">{tick(a, xscale)}</text>')
    for b in (y0, y1):
        parts.append(f'<text x="{margin - 6}" y="{py(b):.2f}" font-size="11" text-anchor="end">{tick(b, yscale)}</text>')
    parts.append(f'<text x="{width / 2}" y="{height - 15}" font-size="12" text-anchor="middle">{escape(x_axis)} ({xscale})</text>')
    for i, name in enumerate(names):
        color = palette[i % len(palette)]
        coords = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in pts[name])
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{coords}"/>')
        parts.append(f'<text x="{width - margin}" y="{margin + 14 * i}" font-size="11" fill="{color}" text-anchor="end">{escape(name)}</text>')
    parts.append("</svg>")
    try:
        Path(path).write_text("\n".join(parts) + "\n")
    except OSError as exc:
        raise ValidationError(f"cannot write {path}: {exc}") from exc


def _is_output(table: SweepTable, column: str) -> bool:
    return column in OUTPUTS
