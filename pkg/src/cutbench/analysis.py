"""Success statistics, TTS records, and scaling-law regression.

Shared by all solver modules: R99 (expected repetitions for 99% cumulative
success), per-solver TTS records, robust median/IQR aggregation across
instances, and the three regression families used to summarize how TTS grows
with problem size:

  * sqrt_exp:  A * B**sqrt(n)
  * exp:       A * B**n
  * qmf:       (A*n^2*loglog(n) + C*log(n)^2 + D*n) * B**n  with B fixed

Exponential families are fitted by least squares in log space; the qmf form
is linear in its coefficients once divided by B**n and is fitted in linear
space.  Logarithms are natural throughout.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

INF = math.inf


def r99_from_ps(ps: float) -> float:
    """Trials needed for 99% cumulative success at per-trial probability ps.

    ln(0.01)/ln(1-ps), clamped to >= 1; ps >= 0.99 gives exactly 1 and
    ps = 0 gives the infinite sentinel.
    """
    if not 0.0 <= ps <= 1.0:
        raise ValueError(f"success probability out of range: {ps}")
    if ps >= 0.99:
        return 1.0
    if ps == 0.0:
        return INF
    return max(1.0, math.log(0.01) / math.log1p(-ps))


@dataclass(frozen=True)
class TtsRecord:
    """One solver result: success statistics plus normalized/wall-clock TTS.

    tts_norm units are solver-specific (signal-decay times for the continuous
    CIM, round trips for the discrete CIM, shots for the circuit solvers,
    Grover iterations for minimum finding); tts_wallclock_s is always seconds.
    """

    ps: float
    r99: float
    tts_norm: float
    tts_wallclock_s: float
    solver: str = ""
    instance_id: str = ""
    n: int = 0


@dataclass(frozen=True)
class QuartileSummary:
    median: float
    q25: float
    q75: float
    n_used: int
    n_infinite: int


def median_iqr(values) -> QuartileSummary:
    """Linear-interpolation median and quartiles.

    Infinite sentinels are excluded and reported in `n_infinite`.
    """
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        raise ValueError("median_iqr needs at least one value")
    finite = arr[np.isfinite(arr)]
    n_inf = int(arr.size - finite.size)
    if finite.size == 0:
        raise ValueError("median_iqr got no finite values")
    q25, med, q75 = np.percentile(finite, [25.0, 50.0, 75.0])
    return QuartileSummary(float(med), float(q25), float(q75), int(finite.size), n_inf)


@dataclass(frozen=True)
class ScalingFit:
    """Fitted scaling law; `params` are family-specific coefficients."""

    family: str
    params: dict
    sum_sq_residual: float

    @property
    def growing(self) -> bool:
        b = self.params.get("B", self.params.get("B_tilde", 1.0))
        return b > 1.0 + 1e-9

    def predict(self, ns) -> np.ndarray:
        ns = np.asarray(ns, dtype=float)
        p = self.params
        if self.family == "sqrt_exp":
            return p["A"] * p["B"] ** np.sqrt(ns)
        if self.family == "exp":
            return p["A"] * p["B"] ** ns
        if self.family == "qmf":
            pref = (
                p["A_tilde"] * ns**2 * np.log(np.log(ns))
                + p["C_tilde"] * np.log(ns) ** 2
                + p["D_tilde"] * ns
            )
            return pref * p["B_tilde"] ** ns
        raise ValueError(f"unknown family {self.family!r}")

    def to_json_dict(self, n_range=None) -> dict:
        doc = {
            "family": self.family,
            "params": {k: float(v) for k, v in self.params.items()},
            "residual": float(self.sum_sq_residual),
        }
        if n_range is not None:
            doc["n_range"] = [int(n_range[0]), int(n_range[1])]
        return doc


def _validate_points(points, min_distinct: int, require_positive: bool = True):
    ns = np.array([float(n) for n, _ in points])
    ys = np.array([float(y) for _, y in points])
    if np.any(~np.isfinite(ys)):
        raise ValueError("regression needs finite TTS values")
    if require_positive and np.any(ys <= 0):
        raise ValueError("regression needs positive TTS values")
    if np.unique(ns).size < min_distinct:
        raise ValueError(f"regression needs at least {min_distinct} distinct sizes")
    return ns, ys


def _log_space_fit(points, regressor) -> tuple[dict, float]:
    ns, ys = _validate_points(points, 2)
    x = regressor(ns)
    design = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(design, np.log(ys), rcond=None)
    resid = float(np.sum((np.log(ys) - design @ coef) ** 2))
    return {"A": float(np.exp(coef[0])), "B": float(np.exp(coef[1]))}, resid


def fit_sqrt_exponential(points) -> ScalingFit:
    """Least squares for ln(tts) = ln A + sqrt(n) ln B."""
    params, resid = _log_space_fit(points, np.sqrt)
    return ScalingFit("sqrt_exp", params, resid)


def fit_exponential(points) -> ScalingFit:
    """Least squares for ln(tts) = ln A + n ln B."""
    params, resid = _log_space_fit(points, lambda ns: ns)
    return ScalingFit("exp", params, resid)


def fit_qmf_form(points, b_tilde: float = math.sqrt(2.0)) -> ScalingFit:
    """Linear least squares for tts/B**n on {n^2 loglog n, (log n)^2, n}."""
    ns, ys = _validate_points(points, 3, require_positive=False)
    if np.any(ns < 3):
        raise ValueError("qmf-form regression needs n >= 3 (loglog n defined)")
    y = ys / b_tilde**ns
    design = np.column_stack([ns**2 * np.log(np.log(ns)), np.log(ns) ** 2, ns])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = float(np.sum((y - design @ coef) ** 2))
    params = {
        "A_tilde": float(coef[0]),
        "C_tilde": float(coef[1]),
        "D_tilde": float(coef[2]),
        "B_tilde": float(b_tilde),
    }
    return ScalingFit("qmf", params, resid)


FIT_FUNCTIONS = {
    "sqrt_exp": fit_sqrt_exponential,
    "exp": fit_exponential,
    "qmf": fit_qmf_form,
}


def default_family(solver: str) -> str:
    name = solver.lower()
    if "qmf" in name:
        return "qmf"
    if "daqc" in name or "qaoa" in name:
        return "exp"
    return "sqrt_exp"


@dataclass
class SolverSeries:
    """Per-size aggregation of one solver's records."""

    solver: str
    ns: list
    medians: list
    q25: list
    q75: list
    counts: list
    n_unsolved: list


@dataclass
class CompareReport:
    series: list
    fits: dict
    extrapolation: dict = field(default_factory=dict)
    value_field: str = "tts_wallclock_s"


def _aggregate(records, value_field: str) -> tuple[list, list, list, list, list, list]:
    by_n: dict[int, list[float]] = {}
    for rec in records:
        by_n.setdefault(int(rec.n), []).append(float(getattr(rec, value_field)))
    ns, medians, q25s, q75s, counts, unsolved = [], [], [], [], [], []
    for n in sorted(by_n):
        vals = by_n[n]
        n_inf = sum(1 for v in vals if not math.isfinite(v))
        ns.append(n)
        counts.append(len(vals))
        unsolved.append(n_inf)
        if n_inf * 2 >= len(vals):
            # With half or more unsolved the median itself is unsolved.
            medians.append(INF)
            q25s.append(INF)
            q75s.append(INF)
        else:
            summ = median_iqr(vals)
            medians.append(summ.median)
            q25s.append(summ.q25)
            q75s.append(summ.q75)
    return ns, medians, q25s, q75s, counts, unsolved


def compare_report(
    records_by_solver: dict,
    out_dir=None,
    families: dict | None = None,
    value_field: str = "tts_wallclock_s",
    extrapolate: tuple[int, int] | None = None,
) -> CompareReport:
    """Aggregate per-solver records, fit scaling laws, and emit plot data.

    `records_by_solver` maps a solver label to its TtsRecord list.  When
    `out_dir` is given, writes summary.csv, per-solver series CSVs, fit JSON
    files, and (if requested) an extrapolation CSV there.
    """
    if not records_by_solver:
        raise ValueError("compare_report needs at least one solver series")
    families = families or {}
    series_list = []
    fits: dict[str, ScalingFit | None] = {}
    extrap: dict[str, tuple[list, list]] = {}

    for solver in sorted(records_by_solver):
        ns, med, q25, q75, cnt, unsolved = _aggregate(records_by_solver[solver], value_field)
        series_list.append(SolverSeries(solver, ns, med, q25, q75, cnt, unsolved))
        family = families.get(solver, default_family(solver))
        points = [(n, m) for n, m in zip(ns, med) if math.isfinite(m) and m > 0]
        try:
            fits[solver] = FIT_FUNCTIONS[family](points)
        except ValueError:
            fits[solver] = None
        if extrapolate is not None and fits[solver] is not None:
            lo, hi = int(extrapolate[0]), int(extrapolate[1])
            grid = list(range(lo, hi + 1))
            extrap[solver] = (grid, fits[solver].predict(grid).tolist())

    report = CompareReport(series_list, fits, extrap, value_field)
    if out_dir is not None:
        write_report_files(report, out_dir)
    return report


def write_report_files(report: CompareReport, out_dir) -> None:
    import csv as _csv

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    with open(out / "summary.csv", "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["solver", "n", "count", "n_unsolved", "median", "q25", "q75"])
        for s in report.series:
            for i, n in enumerate(s.ns):
                writer.writerow(
                    [s.solver, n, s.counts[i], s.n_unsolved[i],
                     repr(s.medians[i]), repr(s.q25[i]), repr(s.q75[i])]
                )

    for s in report.series:
        fit = report.fits.get(s.solver)
        with open(out / f"series_{s.solver}.csv", "w", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(["n", "median", "q25", "q75", "fit"])
            preds = fit.predict(s.ns) if fit is not None else [math.nan] * len(s.ns)
            for i, n in enumerate(s.ns):
                writer.writerow(
                    [n, repr(s.medians[i]), repr(s.q25[i]), repr(s.q75[i]), repr(float(preds[i]))]
                )
        if fit is not None:
            n_range = (min(s.ns), max(s.ns)) if s.ns else None
            (out / f"fit_{s.solver}.json").write_text(
                json.dumps(fit.to_json_dict(n_range), indent=2) + "\n"
            )

    if report.extrapolation:
        with open(out / "extrapolation.csv", "w", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(["solver", "n", "fit"])
            for solver in sorted(report.extrapolation):
                grid, vals = report.extrapolation[solver]
                for n, v in zip(grid, vals):
                    writer.writerow([solver, n, repr(float(v))])
