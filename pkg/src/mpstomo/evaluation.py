"""Scaling fits, sample-complexity thresholds, diagnostics and run-directory reports."""

from __future__ import annotations

import csv
import json
import math
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DegenerateDiagnosticError, InvalidArgumentError
from .mps import MPSState, entanglement_entropy, fidelity, load_mps, pauli_expectation, schmidt_values
from .paulis import PauliString

SCALING_COLUMNS = ("n", "N", "median_infidelity", "q25", "q75")


@dataclass
class ScalingCurve:
    """Infidelity against sample count for one system / ensemble / beta."""

    n_samples: np.ndarray
    infidelity: np.ndarray  # central value (median over seeds)
    q25: np.ndarray | None = None
    q75: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.n_samples = np.asarray(self.n_samples, dtype=float)
        self.infidelity = np.asarray(self.infidelity, dtype=float)
        if self.n_samples.shape != self.infidelity.shape or self.n_samples.ndim != 1:
            raise InvalidArgumentError("sample counts and infidelities must be matching 1-d arrays")
        if np.any(np.diff(self.n_samples) <= 0):
            raise InvalidArgumentError("sample counts must be strictly increasing")
        if np.any((self.infidelity < 0) | (self.infidelity > 1)):
            raise InvalidArgumentError("infidelities must lie in [0, 1]")
        for name in ("q25", "q75"):
            v = getattr(self, name)
            if v is not None:
                setattr(self, name, np.asarray(v, dtype=float))

    @classmethod
    def from_runs(cls, runs: Iterable[tuple[float, float]], metadata: dict | None = None) -> "ScalingCurve":
        """Median and quartiles over seeds from ``(N, infidelity)`` pairs."""
        groups = defaultdict(list)
        for n_samples, inf in runs:
            groups[float(n_samples)].append(float(inf))
        ns = sorted(groups)
        vals = [np.asarray(groups[k]) for k in ns]
        return cls(
            ns,
            [np.median(v) for v in vals],
            [np.quantile(v, 0.25) for v in vals],
            [np.quantile(v, 0.75) for v in vals],
            dict(metadata or {}),
        )


@dataclass(frozen=True)
class PowerLawFit:
    c: float
    alpha: float
    r2: float
    n_points: int

    def predict(self, n_samples) -> np.ndarray:
        return self.c * np.asarray(n_samples, dtype=float) ** (-self.alpha)


def fit_power_law(curve: ScalingCurve) -> PowerLawFit:
    """Least-squares line through ``log(1-F) = log c - alpha log N``."""
    keep = curve.infidelity > 0
    if not np.all(keep):
        warnings.warn(f"excluding {int(np.sum(~keep))} point(s) with zero infidelity from the fit", stacklevel=2)
    x = np.log(curve.n_samples[keep])
    y = np.log(curve.infidelity[keep])
    if x.size < 3:
        raise InvalidArgumentError(f"power-law fit needs at least 3 positive points, got {x.size}")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (intercept + slope * x)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return PowerLawFit(float(np.exp(intercept)), float(-slope), r2, int(x.size))


def samples_to_threshold(curves: Mapping[int, ScalingCurve], threshold_local: float) -> dict[int, dict]:
    """Samples needed to reach local fidelity ``threshold_local`` for each system size.

    Solves ``c N^-alpha <= 1 - threshold_local**n`` on each fitted curve.
    ``extrapolated`` is set when the answer lies outside the measured range
    or the threshold cannot be reached at all.
    """
    if not 0 < threshold_local <= 1:
        raise InvalidArgumentError("local fidelity threshold must lie in (0, 1]")
    out = {}
    for n, curve in curves.items():
        fit = fit_power_law(curve)
        target = 1.0 - threshold_local**n
        if target <= 0 or fit.alpha <= 0:
            out[n] = {"N_star": math.inf, "extrapolated": True, "unreachable": True, "fit": fit}
            continue
        n_star = (fit.c / target) ** (1.0 / fit.alpha)
        n_star = math.ceil(n_star - 1e-9 * n_star)
        lo, hi = curve.n_samples.min(), curve.n_samples.max()
        out[n] = {
            "N_star": n_star,
            "extrapolated": not lo <= n_star <= hi,
            "unreachable": False,
            "fit": fit,
        }
    return out


def string_ratio(mps: MPSState, open_string: PauliString, closed_loop: PauliString, tol: float = 1e-8) -> float:
    """Open-string expectation divided by the square root of the closed-loop expectation."""
    closed = pauli_expectation(mps, closed_loop)
    if abs(closed) < tol:
        raise DegenerateDiagnosticError(f"closed loop {closed_loop.label} has vanishing expectation {closed:.3g}")
    return pauli_expectation(mps, open_string) / math.sqrt(abs(closed))


def evaluate_report(
    model: MPSState,
    target: MPSState,
    observables: Sequence[PauliString] = (),
    cuts: Sequence[int] = (),
) -> dict:
    """Fidelities, observable errors and entanglement data for a model against its target."""
    if model.n != target.n:
        raise InvalidArgumentError(f"model has {model.n} qubits, target {target.n}")
    f = fidelity(model, target)
    report = {
        "n": model.n,
        "fidelity": f,
        "infidelity": 1.0 - f,
        "local_fidelity": f ** (1.0 / model.n),
        "observables": [],
        "cuts": [],
    }
    for p in observables:
        m, t = pauli_expectation(model, p), pauli_expectation(target, p)
        report["observables"].append({"observable": p.label, "model": m, "target": t, "abs_error": abs(m - t)})
    for cut in cuts:
        report["cuts"].append(
            {
                "cut": int(cut),
                "model_entropy": entanglement_entropy(model, cut),
                "target_entropy": entanglement_entropy(target, cut),
                "model_schmidt": schmidt_values(model, cut).tolist(),
                "target_schmidt": schmidt_values(target, cut).tolist(),
            }
        )
    return report


# --- run directories and scaling tables -------------------------------------------------


def read_run_directory(path) -> dict:
    """Collect the artifacts of one run directory into a flat summary."""
    path = Path(path)
    out = {"path": str(path)}
    manifest = path / "manifest.json"
    if manifest.exists():
        out["manifest"] = json.loads(manifest.read_text())
    report = path / "report.json"
    if report.exists():
        out["report"] = json.loads(report.read_text())
    dataset = path / "dataset.jsonl"
    if dataset.exists():
        with open(dataset, encoding="utf-8") as fh:
            out["dataset_header"] = json.loads(fh.readline())
    history = path / "history.csv"
    if history.exists():
        with open(history, newline="") as fh:
            out["history"] = list(csv.DictReader(fh))
    for name in ("model.mps", "target.mps"):
        if (path / name).exists():
            out[name.split(".")[0]] = load_mps(path / name)
    return out


def run_record(run: dict) -> dict:
    """``(n, N, seed, infidelity, converged)`` of a run summary."""
    header = run.get("dataset_header", {})
    report = run.get("report", {})
    if "infidelity" in report:
        inf = float(report["infidelity"])
    elif "model" in run and "target" in run:
        inf = 1.0 - fidelity(run["model"], run["target"])
    else:
        raise InvalidArgumentError(f"run {run.get('path')} has neither a report nor model and target")
    converged = report.get("converged", True)
    return {
        "n": int(header.get("n", report.get("n", 0))),
        "N": int(header.get("N", 0)),
        "seed": header.get("seed"),
        "infidelity": inf,
        "converged": bool(converged),
    }


def scaling_rows(records: Iterable[Mapping]) -> tuple[list[dict], int]:
    """Median and quartiles per ``(n, N)``; non-converged runs are left out and counted."""
    groups = defaultdict(list)
    excluded = 0
    for r in records:
        if not r.get("converged", True):
            excluded += 1
            continue
        groups[(int(r["n"]), int(r["N"]))].append(float(r["infidelity"]))
    rows = []
    for (n, n_samples), vals in sorted(groups.items()):
        v = np.asarray(vals)
        rows.append(
            {
                "n": n,
                "N": n_samples,
                "median_infidelity": float(np.median(v)),
                "q25": float(np.quantile(v, 0.25)),
                "q75": float(np.quantile(v, 0.75)),
            }
        )
    return rows, excluded


def write_scaling_csv(rows: Sequence[Mapping], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SCALING_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({k: r[k] for k in SCALING_COLUMNS})


def read_scaling_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [
            {k: (int(v) if k in ("n", "N") else float(v)) for k, v in row.items()} for row in csv.DictReader(fh)
        ]


# --- statistical check of the finite-sample error bound ---------------------------------


def error_bound_scale(n: int, chi_max: int, n_samples, delta: float) -> np.ndarray:
    """``sqrt(n chi^2 / (N delta))``, the sample dependence of the error bound."""
    return np.sqrt(n * chi_max**2 / (np.asarray(n_samples, dtype=float) * delta))


def bound_exceedance(
    runs: Iterable[tuple[float, float]], n: int, chi_max: int, delta: float = 0.1
) -> dict:
    """Calibrate the bound constant on the smallest-N runs, test it on the largest-N runs.

    ``C`` is the ``1 - delta`` quantile of ``(1-F) / sqrt(n chi^2 / (N delta))``
    over the smallest sample count; the reported fraction is how often
    runs at the largest sample count exceed ``C sqrt(n chi^2 / (N delta))``.
    """
    groups = defaultdict(list)
    for n_samples, inf in runs:
        groups[float(n_samples)].append(float(inf))
    if len(groups) < 2:
        raise InvalidArgumentError("need runs at two or more sample counts")
    small, large = min(groups), max(groups)
    ratios = np.asarray(groups[small]) / error_bound_scale(n, chi_max, small, delta)
    c = float(np.quantile(ratios, 1.0 - delta))
    bound = c * float(error_bound_scale(n, chi_max, large, delta))
    tail = np.asarray(groups[large])
    frac = float(np.mean(tail > bound))
    return {
        "constant": c,
        "delta": delta,
        "calibration_N": small,
        "test_N": large,
        "bound_at_test_N": bound,
        "exceedance_fraction": frac,
        "n_test_runs": int(tail.size),
        "passes": frac <= delta,
    }
