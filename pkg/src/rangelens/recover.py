"""Reconstructing a layer input from its ReLU output.

Back-projection uses E[M^T relu(Mx)] = x / 2 for N(0, 1/m) entries, so
2 M^T y followed by projection onto the model set is an unbiased-direction
estimate.  Projected gradient on 1/2 ||relu(Mw) - y||^2 can refine it.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _rng
from .errors import NumericFailureError
from .models import ModelSet, project, sample_points
from .netsim import Layer, make_layer


@dataclass
class RecoveryResult:
    estimate: np.ndarray
    relative_error: float | None
    iterations: int
    method: str                      # "bp" or "pg"
    objective: float | None = None
    objective_trace: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"relative_error": self.relative_error, "iterations": self.iterations,
                "method": self.method, "objective": self.objective}


def _relative_error(estimate, truth):
    if truth is None:
        return None
    truth = np.asarray(truth, dtype=float)
    nrm = np.linalg.norm(truth)
    diff = float(np.linalg.norm(estimate - truth))
    if nrm == 0:
        return diff
    return diff / float(nrm)


def _check(layer: Layer, output, model: ModelSet):
    if layer.activation.kind != "relu":
        raise ValueError("recovery assumes a ReLU layer")
    y = np.asarray(output, dtype=float)
    if y.shape != (layer.m,):
        raise ValueError(f"output must have shape ({layer.m},), got {y.shape}")
    if model.n != layer.n:
        raise ValueError(f"model dimension {model.n} does not match layer input {layer.n}")
    return y


def objective(layer: Layer, w, output) -> float:
    r = layer(w) - output
    return 0.5 * float(r @ r)


def back_project(layer: Layer, output, model: ModelSet, truth=None,
                 clip: bool = True) -> RecoveryResult:
    """x_hat = project(model, 2 M^T y)."""
    y = _check(layer, output, model)
    raw = 2.0 * (layer.weights.T @ y)
    est = project(model, raw, clip=clip)
    return RecoveryResult(est, _relative_error(est, truth), 0, "bp",
                          objective(layer, est, y))


def refine_projected_gradient(layer: Layer, output, init, model: ModelSet, iters: int = 100,
                              step: float = 1.0, truth=None, tol: float = 1e-8,
                              max_halvings: int = 30) -> RecoveryResult:
    """w <- project(w - s M^T (relu(Mw) - y)), with step halving on any increase.

    Only steps that do not raise the objective are accepted, so the returned
    iterate is never worse than the projected initialization.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    if not step > 0:
        raise ValueError("step must be positive")
    y = _check(layer, output, model)
    w_mat = layer.weights
    w = project(model, np.asarray(init, dtype=float))
    f = objective(layer, w, y)
    trace = [f]
    moved = 0
    for _ in range(iters):
        if not math.isfinite(f):
            raise NumericFailureError(f"objective became non-finite ({f})")
        if f == 0.0:
            break
        grad = w_mat.T @ (np.maximum(w_mat @ w, 0.0) - y)
        s, accepted = step, None
        for _ in range(max_halvings + 1):
            cand = project(model, w - s * grad)
            fc = objective(layer, cand, y)
            if not math.isfinite(fc):
                raise NumericFailureError(f"objective became non-finite ({fc})")
            if fc <= f:
                accepted = (cand, fc)
                break
            s *= 0.5
        if accepted is None:
            break
        cand, fc = accepted
        gain = f - fc
        w, f = cand, fc
        moved += 1
        trace.append(f)
        if gain <= tol * max(trace[-2], 1e-300):
            break
    return RecoveryResult(w, _relative_error(w, truth), moved, "pg", f, trace)


@dataclass
class RecoveryCurve:
    m_grid: tuple
    median_errors: list
    errors: list
    slope: float
    slope_ok: bool
    monotone: bool
    objective_nonincreasing: bool
    method: str

    def to_dict(self) -> dict:
        return {"m_grid": list(self.m_grid), "median_errors": self.median_errors,
                "slope": self.slope, "slope_ok": self.slope_ok, "monotone": self.monotone,
                "objective_nonincreasing": self.objective_nonincreasing,
                "method": self.method}


def recovery_error_curve(model: ModelSet, m_grid, trials: int, seed: int = 0,
                         method: str = "bp", pg_iters: int = 100,
                         workers: int = 1) -> RecoveryCurve:
    """Median relative error per m and the log-log slope (about -1/2 expected)."""
    m_grid = tuple(int(m) for m in m_grid)
    if len(m_grid) < 3 or any(b <= a for a, b in zip(m_grid, m_grid[1:])):
        raise ValueError("m_grid must be increasing with at least 3 values")
    if method not in ("bp", "pg"):
        raise ValueError(f"unknown method {method!r}")

    def run(job):
        m, t = job
        x, _ = sample_points(model, 1, seed=_rng.derive_seed(seed, "recover-x", m, t))
        x = x[0]
        layer = make_layer(model.n, m, "relu", _rng.derive_seed(seed, "recover-layer", m, t))
        y = layer(x)
        res = back_project(layer, y, model, truth=x)
        ok = True
        if method == "pg":
            ref = refine_projected_gradient(layer, y, res.estimate, model, pg_iters, truth=x)
            ok = ref.objective <= res.objective
            res = ref
        return res.relative_error, ok

    jobs = [(m, t) for m in m_grid for t in range(trials)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(run, jobs))
    else:
        out = [run(j) for j in jobs]
    errs = [[out[i * trials + t][0] for t in range(trials)] for i in range(len(m_grid))]
    med = [float(np.median(e)) for e in errs]
    if min(med) > 0:
        slope = float(np.polyfit(np.log(m_grid), np.log(med), 1)[0])
    else:
        slope = float("nan")
    monotone = all(b <= 1.1 * a for a, b in zip(med, med[1:]))
    return RecoveryCurve(m_grid, med, errs, slope, bool(-0.65 <= slope <= -0.35),
                         bool(monotone), all(ok for _, ok in out), method)
