"""Closed-form distortion predictors for one random Gaussian ReLU layer.

All expectations are over a weight matrix with i.i.d. N(0, 1/m) entries.
Summed over the m rows the 1/m cancels, so the functions below return
per-layer quantities (``arccos_moment`` is the expected inner product of the
two full output vectors, not of a single coordinate).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

PI = math.pi


def _check_theta(theta):
    t = np.asarray(theta, dtype=float)
    if np.any(~np.isfinite(t)) or np.any(t < 0.0) or np.any(t > PI):
        raise ValueError(f"angle must lie in [0, pi], got {theta!r}")
    return t


def _out(value, like):
    return float(value) if np.ndim(like) == 0 else value


def check_angle_bins(bins) -> list:
    """Validate [lo, hi] angle bins: inside [0, pi], pairwise disjoint.

    Bins may touch at an endpoint; repeated bins are rejected.
    """
    out = [(float(lo), float(hi)) for lo, hi in bins]
    srt = sorted(out)
    for lo, hi in srt:
        if not 0.0 <= lo <= hi <= PI:
            raise ValueError(f"angle bin [{lo}, {hi}] is not inside [0, pi]")
    for a, b in zip(srt, srt[1:]):
        if b[0] < a[1] or a == b:
            raise ValueError(f"angle bins {list(a)} and {list(b)} overlap")
    return out


def angle_between(x, y) -> float:
    """Angle between two vectors, accurate near 0 and near pi.

    A zero vector makes the angle undefined; pi/2 is returned in that case.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx == 0.0 or ny == 0.0:
        return PI / 2
    u, v = x / nx, y / ny
    return float(2.0 * math.atan2(np.linalg.norm(u - v), np.linalg.norm(u + v)))


@dataclass(frozen=True)
class AnglePair:
    theta: float
    norm_x: float = 1.0
    norm_y: float = 1.0

    def __post_init__(self):
        _check_theta(self.theta)
        if not (self.norm_x > 0 and self.norm_y > 0):
            raise ValueError("norms must be positive")

    @classmethod
    def from_vectors(cls, x, y) -> "AnglePair":
        return cls(angle_between(x, y), float(np.linalg.norm(x)), float(np.linalg.norm(y)))

    @property
    def input_sq_distance(self) -> float:
        return (self.norm_x**2 + self.norm_y**2
                - 2.0 * self.norm_x * self.norm_y * math.cos(self.theta))


@dataclass(frozen=True)
class DistortionPrediction:
    expected_sq_distance: float
    expected_cosine: float
    expected_hamming: float
    printed_variant_sq_distance: float


def _sin_minus_tcos(t):
    # sin t - t cos t; the power series avoids cancellation for small t
    t = np.asarray(t, dtype=float)
    direct = np.sin(t) - t * np.cos(t)
    small = t < 0.5
    if np.any(small):
        ts = np.where(small, t, 0.0)
        series = np.zeros_like(ts)
        term_pow = ts**3
        for k in range(1, 11):
            series += (-1) ** (k + 1) * 2 * k / math.factorial(2 * k + 1) * term_pow
            term_pow = term_pow * ts * ts
        direct = np.where(small, series, direct)
    return direct


def dist_kernel(theta):
    """(sin t - t cos t) / pi; 0 at t=0, 1 at t=pi, increasing in between."""
    t = _check_theta(theta)
    return _out(_sin_minus_tcos(t) / PI, theta)


def _one_minus_cosine(t):
    # 1 - (cos t + dist t), written so that small angles keep full precision
    return np.clip(2.0 * np.sin(0.5 * t) ** 2 - _sin_minus_tcos(t) / PI, 0.0, 1.0)


def arccos_moment(theta, norm_x=1.0, norm_y=1.0):
    """E <relu(Mx), relu(My)> = |x||y| (sin t + (pi - t) cos t) / (2 pi)."""
    t = _check_theta(theta)
    val = norm_x * norm_y * (np.sin(t) + (PI - t) * np.cos(t)) / (2.0 * PI)
    return _out(val, theta)


def arccos_moment_quad(theta: float, norm_x: float = 1.0, norm_y: float = 1.0,
                       tol: float = 1e-10) -> float:
    """The same moment from its angular integral over [0, pi - theta]."""
    t = float(_check_theta(theta))
    integral, _ = quad(lambda p: math.sin(p) * math.sin(p + t), 0.0, PI - t, epsabs=tol, epsrel=0.0)
    return norm_x * norm_y * integral / PI


def expected_sq_distance(pair: AnglePair, input_sq_distance: float | None = None) -> float:
    """E ||relu(Mx) - relu(My)||^2 = |x-y|^2 / 2 - |x||y| dist(theta)."""
    in_sq = _consistent_sq(pair, input_sq_distance)
    return 0.5 * in_sq - pair.norm_x * pair.norm_y * dist_kernel(pair.theta)


def printed_sq_distance(pair: AnglePair, input_sq_distance: float | None = None) -> float:
    """Additive-sign variant, kept for side-by-side reporting only."""
    in_sq = _consistent_sq(pair, input_sq_distance)
    return 0.5 * in_sq + pair.norm_x * pair.norm_y * dist_kernel(pair.theta)


def _consistent_sq(pair: AnglePair, input_sq_distance):
    expected = pair.input_sq_distance
    if input_sq_distance is None:
        return expected
    if abs(input_sq_distance - expected) > 1e-9:
        raise ValueError(
            f"input squared distance {input_sq_distance!r} disagrees with the law of "
            f"cosines value {expected!r} for this pair")
    return float(input_sq_distance)


def expected_cosine(theta):
    """cos theta + dist(theta): the output cosine, always in [0, 1]."""
    t = _check_theta(theta)
    return _out(1.0 - _one_minus_cosine(t), theta)


def angle_map(theta, layers: int = 1):
    """Output angle after ``layers`` applications of the expected cosine map."""
    if layers < 1:
        raise ValueError("layers must be >= 1")
    t = _check_theta(theta)
    for _ in range(layers):
        t = 2.0 * np.arcsin(np.sqrt(0.5 * _one_minus_cosine(t)))
    return _out(t, theta)


def angle_decay_reference(theta, q: int):
    """Reference line 0.95**q * theta, meaningful only for theta <= pi/4."""
    t = _check_theta(theta)
    if np.any(t > PI / 4):
        raise ValueError("reference decay is only defined on [0, pi/4]")
    return _out(0.95**q * t, theta)


def hamming_expectation(theta):
    """Probability that sign(<g,x>) and sign(<g,y>) disagree: theta / pi."""
    t = _check_theta(theta)
    return _out(t / PI, theta)


def predict_distortion(pair: AnglePair) -> DistortionPrediction:
    return DistortionPrediction(
        expected_sq_distance=expected_sq_distance(pair),
        expected_cosine=expected_cosine(pair.theta),
        expected_hamming=hamming_expectation(pair.theta),
        printed_variant_sq_distance=printed_sq_distance(pair),
    )


def higher_moments(theta: float) -> dict:
    """Fourth-order moments of (relu(a), relu(b)), a, b unit Gaussians at angle theta.

    ``z_var_bound`` is m^2 * Var(z_i), the variance of one row's contribution
    to the squared output distance, assembled from the moments.
    """
    t = float(_check_theta(theta))
    upper = PI - t
    m31 = 4.0 / PI * quad(lambda p: math.sin(p) ** 3 * math.sin(p + t), 0.0, upper,
                          epsabs=1e-13, epsrel=1e-13)[0]
    m22 = 4.0 / PI * quad(lambda p: math.sin(p) ** 2 * math.sin(p + t) ** 2, 0.0, upper,
                          epsabs=1e-13, epsrel=1e-13)[0]
    m4 = 1.5
    mean_sq = float(_one_minus_cosine(t))
    # E(ra - rb)^4 with E ra^3 rb = E ra rb^3 by exchangeability
    fourth = 2.0 * m4 - 8.0 * m31 + 6.0 * m22
    return {"m4": m4, "m31": m31, "m22": m22, "z_var_bound": fourth - mean_sq**2}


def kernel_table(grid: int = 64) -> list[dict]:
    """Rows of kernel values on an evenly spaced angle grid over [0, pi]."""
    if grid < 2:
        raise ValueError("grid must have at least 2 points")
    rows = []
    for t in np.linspace(0.0, PI, grid):
        t = float(t)
        hm = higher_moments(t)
        rows.append({
            "theta": t,
            "dist": dist_kernel(t),
            "expected_cosine": expected_cosine(t),
            "expected_hamming": hamming_expectation(t),
            "expected_sq_distance_unit": expected_sq_distance(AnglePair(t)),
            "m31": hm["m31"],
            "m22": hm["m22"],
        })
    return rows
