"""Convergence sweeps, rate fitting and report emission.

A sweep runs one solve per time step, measures the probe-point error
against a reference (closed form when the problem has one, otherwise the
finest solve), and fits the log-log rate.  Reports serialize to a fixed
CSV schema and optionally to small hand-emitted SVG charts.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .backward import OperatorConfig
from .baselines import ColeHopfParams, HowardConfig, cole_hopf_exact, \
    default_howard_config, howard_fd_solve
from .errors import DegenerateFit, IoError, SolverError
from .scheme import evaluate, solve

SOLVERS = ("splitting", "howard")


@dataclass(frozen=True)
class ConvergenceRow:
    delta: float
    value: float
    abs_error: float
    rel_error: float
    seconds: float
    status: str = "ok"


@dataclass(frozen=True)
class ConvergenceReport:
    solver: str
    probe: tuple[float, float]
    reference: str
    reference_value: float
    rows: tuple[ConvergenceRow, ...]
    fitted_rate: float = math.nan
    excluded: tuple[float, ...] = ()

    def ok_rows(self):
        return [r for r in self.rows if r.status == "ok"]


def _reference_value(prob, probe, deltas, xs, cfg: OperatorConfig,
                     reference: str | None):
    """(label, value): closed form for the benchmark problem, otherwise
    the finest splitting solve."""
    t0, x0 = probe
    if reference in (None, "exact") and prob.name == "cole-hopf":
        params = ColeHopfParams(K=prob.params["K"], T=prob.params["T"])
        return "exact", float(cole_hopf_exact(params, t0, x0))
    if reference == "exact":
        raise ValueError("no closed-form reference for this problem")
    finest = min(deltas)
    sol = solve(prob, xs, replace(cfg, delta=finest))
    return "finest", evaluate(sol, t0, x0)


def _one_solve(prob, xs, delta, cfg: OperatorConfig, solver: str,
               howard_cfg: HowardConfig | None):
    start = time.perf_counter()
    if solver == "splitting":
        sol = solve(prob, xs, replace(cfg, delta=delta))
    elif solver == "howard":
        hc = howard_cfg or default_howard_config(prob, cfg.radius_safety)
        sol = howard_fd_solve(prob, xs, delta, hc)
    else:
        raise ValueError(f"unknown solver {solver!r}")
    return sol, time.perf_counter() - start


def run_convergence(prob, xs, deltas, probe, solver: str = "splitting",
                    reference: str | None = None,
                    cfg: OperatorConfig | None = None,
                    howard_cfg: HowardConfig | None = None,
                    threads: int = 1) -> ConvergenceReport:
    """One solve per time step; rows sorted by delta descending."""
    xs = np.asarray(xs, dtype=float)
    deltas = sorted(set(float(d) for d in deltas), reverse=True)
    cfg = cfg or OperatorConfig(delta=deltas[0])
    ref_label, ref_value = _reference_value(prob, probe, deltas, xs, cfg,
                                            reference)

    def run_one(delta):
        try:
            sol, seconds = _one_solve(prob, xs, delta, cfg, solver, howard_cfg)
        except SolverError as exc:
            return ConvergenceRow(delta, math.nan, math.nan, math.nan,
                                  math.nan, status=f"error: {exc}")
        value = evaluate(sol, probe[0], probe[1])
        abs_err = abs(value - ref_value)
        rel_err = abs_err / abs(ref_value) if ref_value != 0 else math.inf
        return ConvergenceRow(delta, value, abs_err, rel_err, seconds)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = tuple(pool.map(run_one, deltas))
    else:
        rows = tuple(run_one(d) for d in deltas)

    report = ConvergenceReport(solver=solver, probe=tuple(probe),
                               reference=ref_label, reference_value=ref_value,
                               rows=rows)
    excluded = tuple(r.delta for r in report.ok_rows()
                     if not (r.abs_error > 0 and math.isfinite(r.abs_error)))
    report = replace(report, excluded=excluded)
    try:
        rate, _ = _fit_rate(report)
        report = replace(report, fitted_rate=rate)
    except DegenerateFit:
        pass
    return report


def _fit_rate(report: ConvergenceReport):
    usable = [(r.delta, r.abs_error) for r in report.ok_rows()
              if r.abs_error > 0 and math.isfinite(r.abs_error)]
    excluded = tuple(r.delta for r in report.ok_rows()
                     if not (r.abs_error > 0 and math.isfinite(r.abs_error)))
    if len(usable) < 2:
        raise DegenerateFit(
            f"need >= 2 rows with positive error, have {len(usable)} "
            f"(excluded deltas: {list(excluded)})")
    d = np.log([u[0] for u in usable])
    e = np.log([u[1] for u in usable])
    slope = float(np.polyfit(d, e, 1)[0])
    return slope, excluded


def estimate_rate(report: ConvergenceReport) -> float:
    """Least-squares slope of log(error) against log(delta); rows with
    zero error are excluded (and noted on the report)."""
    rate, _ = _fit_rate(report)
    return rate


@dataclass(frozen=True)
class PairedReport:
    splitting: ConvergenceReport
    howard: ConvergenceReport
    smaller_error: tuple[str, ...] = field(default=())


def compare_schemes(prob, xs, deltas, probe,
                    cfg: OperatorConfig | None = None,
                    howard_cfg: HowardConfig | None = None,
                    reference: str | None = None,
                    threads: int = 1) -> PairedReport:
    """Both solvers on the identical grid, with a per-delta winner."""
    xs = np.asarray(xs, dtype=float)
    rep_s = run_convergence(prob, xs, deltas, probe, "splitting",
                            reference, cfg, threads=threads)
    rep_h = run_convergence(prob, xs, deltas, probe, "howard",
                            reference, cfg, howard_cfg, threads=threads)
    winners = []
    tie_tol = 1e-12 * (1.0 + abs(rep_s.reference_value))
    for rs, rh in zip(rep_s.rows, rep_h.rows):
        if not (math.isfinite(rs.abs_error) and math.isfinite(rh.abs_error)):
            winners.append("n/a")
        elif abs(rs.abs_error - rh.abs_error) <= tie_tol:
            winners.append("tie")
        else:
            winners.append("splitting" if rs.abs_error < rh.abs_error
                           else "howard")
    return PairedReport(splitting=rep_s, howard=rep_h,
                        smaller_error=tuple(winners))


def emit_report(report, out_dir, formats=("csv", "svg")) -> list[str]:
    """Write convergence.csv (and convergence.svg) into out_dir.

    Accepts a single report or a paired report; the SVG gets one polyline
    per solver.  Timing varies run to run, so byte-level reproducibility
    applies to every CSV column except `seconds`.
    """
    import os

    reports = ([report.splitting, report.howard]
               if isinstance(report, PairedReport) else [report])
    written = []
    try:
        os.makedirs(out_dir, exist_ok=True)
        if "csv" in formats:
            path = os.path.join(out_dir, "convergence.csv")
            with open(path, "w", newline="") as fh:
                fh.write("delta,value,abs_error,rel_error,seconds\n")
                for rep in reports:
                    for r in rep.rows:
                        fh.write(f"{r.delta:.17g},{r.value:.17g},"
                                 f"{r.abs_error:.17g},{r.rel_error:.17g},"
                                 f"{r.seconds:.17g}\n")
            written.append(path)
        if "svg" in formats:
            series = []
            for rep in reports:
                pts = [(r.delta, r.abs_error) for r in rep.ok_rows()
                       if r.abs_error > 0]
                if pts:
                    series.append((rep.solver, pts))
            if series:
                path = os.path.join(out_dir, "convergence.svg")
                with open(path, "w") as fh:
                    fh.write(loglog_svg(series, "time step",
                                        "absolute error"))
                written.append(path)
    except OSError as exc:
        raise IoError(str(exc)) from exc
    return written


def emit_solution_svg(curves, path, x_label="x", y_label="u") -> None:
    """Write a value-vs-x chart; curves is a list of (label, xs, values)."""
    series = [(label, list(zip(xs, vals))) for label, xs, vals in curves]
    try:
        with open(path, "w") as fh:
            fh.write(linear_svg(series, x_label, y_label))
    except OSError as exc:
        raise IoError(str(exc)) from exc


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
_W, _H = 800, 600
_ML, _MR, _MT, _MB = 80, 30, 30, 60


def _svg_header():
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" '
            f'height="{_H}" viewBox="0 0 {_W} {_H}">\n'
            f'<rect width="{_W}" height="{_H}" fill="white"/>\n')


def _axes_box():
    return (f'<rect x="{_ML}" y="{_MT}" width="{_W - _ML - _MR}" '
            f'height="{_H - _MT - _MB}" fill="none" stroke="black"/>\n')


def _legend(labels):
    out = []
    for i, label in enumerate(labels):
        y = _MT + 20 + 18 * i
        color = _PALETTE[i % len(_PALETTE)]
        out.append(f'<line x1="{_ML + 12}" y1="{y - 4}" x2="{_ML + 40}" '
                   f'y2="{y - 4}" stroke="{color}" stroke-width="2"/>\n')
        out.append(f'<text x="{_ML + 46}" y="{y}" font-size="13">'
                   f'{label}</text>\n')
    return "".join(out)


def _axis_labels(x_label, y_label):
    return (f'<text x="{(_ML + _W - _MR) / 2:.0f}" y="{_H - 15}" '
            f'text-anchor="middle" font-size="14">{x_label}</text>\n'
            f'<text x="20" y="{(_MT + _H - _MB) / 2:.0f}" '
            f'text-anchor="middle" font-size="14" '
            f'transform="rotate(-90 20 {(_MT + _H - _MB) / 2:.0f})">'
            f'{y_label}</text>\n')


def loglog_svg(series, x_label, y_label) -> str:
    """Log-log chart with one polyline per series and decade ticks."""
    xs = [p[0] for _, pts in series for p in pts]
    ys = [p[1] for _, pts in series for p in pts]
    lx0, lx1 = math.floor(math.log10(min(xs))), math.ceil(math.log10(max(xs)))
    ly0, ly1 = math.floor(math.log10(min(ys))), math.ceil(math.log10(max(ys)))
    lx1 = max(lx1, lx0 + 1)
    ly1 = max(ly1, ly0 + 1)

    def px(v):
        return _ML + (math.log10(v) - lx0) / (lx1 - lx0) * (_W - _ML - _MR)

    def py(v):
        return _H - _MB - (math.log10(v) - ly0) / (ly1 - ly0) * (_H - _MT - _MB)

    out = [_svg_header(), _axes_box()]
    for d in range(lx0, lx1 + 1):
        x = px(10.0 ** d)
        out.append(f'<line x1="{x:.2f}" y1="{_H - _MB}" x2="{x:.2f}" '
                   f'y2="{_H - _MB + 6}" stroke="black"/>\n')
        out.append(f'<text x="{x:.2f}" y="{_H - _MB + 22}" '
                   f'text-anchor="middle" font-size="12">1e{d}</text>\n')
    for d in range(ly0, ly1 + 1):
        y = py(10.0 ** d)
        out.append(f'<line x1="{_ML - 6}" y1="{y:.2f}" x2="{_ML}" '
                   f'y2="{y:.2f}" stroke="black"/>\n')
        out.append(f'<text x="{_ML - 10}" y="{y + 4:.2f}" text-anchor="end" '
                   f'font-size="12">1e{d}</text>\n')
    for i, (label, pts) in enumerate(series):
        color = _PALETTE[i % len(_PALETTE)]
        coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in sorted(pts))
        out.append(f'<polyline points="{coords}" fill="none" '
                   f'stroke="{color}" stroke-width="2"/>\n')
    out.append(_legend([label for label, _ in series]))
    out.append(_axis_labels(x_label, y_label))
    out.append("</svg>\n")
    return "".join(out)


def linear_svg(series, x_label, y_label) -> str:
    """Linear-axis chart with one polyline per series."""
    xs = [p[0] for _, pts in series for p in pts]
    ys = [p[1] for _, pts in series for p in pts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if y1 == y0:
        y0, y1 = y0 - 1.0, y1 + 1.0
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def px(v):
        return _ML + (v - x0) / (x1 - x0) * (_W - _ML - _MR)

    def py(v):
        return _H - _MB - (v - y0) / (y1 - y0) * (_H - _MT - _MB)

    out = [_svg_header(), _axes_box()]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        xv = x0 + frac * (x1 - x0)
        yv = y0 + frac * (y1 - y0)
        out.append(f'<text x="{px(xv):.2f}" y="{_H - _MB + 22}" '
                   f'text-anchor="middle" font-size="12">{xv:.3g}</text>\n')
        out.append(f'<text x="{_ML - 10}" y="{py(yv) + 4:.2f}" '
                   f'text-anchor="end" font-size="12">{yv:.3g}</text>\n')
    for i, (label, pts) in enumerate(series):
        color = _PALETTE[i % len(_PALETTE)]
        coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in pts)
        out.append(f'<polyline points="{coords}" fill="none" '
                   f'stroke="{color}" stroke-width="1.5"/>\n')
    out.append(_legend([label for label, _ in series]))
    out.append(_axis_labels(x_label, y_label))
    out.append("</svg>\n")
    return "".join(out)
