"""Low-complexity model sets, their mean width and covering numbers."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import _rng
from .errors import (CloudParseError, InvalidCoveringError, InvalidModelError,
                     UnsupportedModelError)

GMM, SPARSE, CLOUD = "gmm", "sparse", "cloud"
WIDTH_BLOCK = 256  # trials per RNG stream in estimate_mean_width


@dataclass(frozen=True, eq=False)
class ModelSet:
    """A set K inside the unit ball.

    ``gmm``: union of L k-dimensional subspaces (``bases`` has shape (L, n, k)).
    ``sparse``: vectors D a with at most k non-zeros (``dictionary`` is n x L).
    ``cloud``: an explicit labeled point list.
    Sampled points have norm uniform in ``[beta, 1]``.
    """

    kind: str
    n: int
    k: int = 0
    bases: np.ndarray | None = None
    dictionary: np.ndarray | None = None
    points: np.ndarray | None = None
    labels: np.ndarray | None = None
    beta: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise InvalidModelError("beta must lie in [0, 1]")
        if self.kind == GMM:
            b = self.bases
            if b is None or b.ndim != 3 or b.shape[1] != self.n:
                raise InvalidModelError("gmm bases must have shape (L, n, k)")
            if self.k > self.n:
                raise InvalidModelError(f"subspace dim k={self.k} exceeds n={self.n}")
            gram = np.einsum("lik,lij->lkj", b, b)
            if np.max(np.abs(gram - np.eye(b.shape[2]))) > 1e-10:
                raise InvalidModelError("gmm bases must have orthonormal columns")
        elif self.kind == SPARSE:
            d = self.dictionary
            if d is None or d.ndim != 2 or d.shape[0] != self.n:
                raise InvalidModelError("dictionary must have shape (n, L)")
            if self.k > self.n or self.k > d.shape[1] or self.k < 1:
                raise InvalidModelError(
                    f"sparsity k={self.k} must satisfy 1 <= k <= min(n, L) = "
                    f"{min(self.n, d.shape[1])}")
            if np.max(np.abs(np.linalg.norm(d, axis=0) - 1.0)) > 1e-10:
                raise InvalidModelError("dictionary columns must have unit norm")
        elif self.kind == CLOUD:
            p = self.points
            if p is None or p.ndim != 2 or p.shape[1] != self.n or len(p) == 0:
                raise InvalidModelError("cloud points must have shape (count, n)")
            if self.labels is None or len(self.labels) != len(p):
                raise InvalidModelError("labels must match the number of points")
        else:
            raise InvalidModelError(f"unknown model kind {self.kind!r}")

    # constructors

    @classmethod
    def gmm(cls, bases, beta: float = 0.5) -> "ModelSet":
        b = np.asarray(bases, dtype=float)
        if b.ndim == 2:
            b = b[None]
        return cls(GMM, n=b.shape[1], k=b.shape[2], bases=b, beta=beta)

    @classmethod
    def random_gmm(cls, n: int, L: int, k: int, seed: int = 0, beta: float = 0.5) -> "ModelSet":
        if k > n:
            raise InvalidModelError(f"subspace dim k={k} exceeds n={n}")
        rng = _rng.stream(seed, "gmm-bases")
        bases = np.empty((L, n, k))
        for i in range(L):
            q, r = np.linalg.qr(rng.standard_normal((n, k)))
            bases[i] = q * np.sign(np.diag(r))
        return cls.gmm(bases, beta=beta)

    @classmethod
    def sparse(cls, dictionary, k: int, beta: float = 0.5, normalize: bool = True) -> "ModelSet":
        d = np.array(dictionary, dtype=float)
        if normalize:
            norms = np.linalg.norm(d, axis=0)
            if np.any(norms == 0):
                raise InvalidModelError("dictionary has a zero column")
            d = d / norms
        return cls(SPARSE, n=d.shape[0], k=k, dictionary=d, beta=beta)

    @classmethod
    def cloud(cls, points, labels=None) -> "ModelSet":
        p = np.atleast_2d(np.asarray(points, dtype=float))
        lab = np.zeros(len(p), dtype=int) if labels is None else np.asarray(labels, dtype=int)
        return cls(CLOUD, n=p.shape[1], points=p, labels=lab, beta=0.0)

    @property
    def L(self) -> int:
        if self.kind == GMM:
            return self.bases.shape[0]
        if self.kind == SPARSE:
            return self.dictionary.shape[1]
        return len(self.points)

    @property
    def orthonormal_dictionary(self) -> bool:
        d = self.dictionary
        return d is not None and np.allclose(d.T @ d, np.eye(d.shape[1]), atol=1e-10)


def support_label(support) -> int:
    """Colexicographic rank of a sorted support: a collision-free label."""
    return sum(math.comb(int(s), i + 1) for i, s in enumerate(sorted(support)))


def sample_points(model: ModelSet, count: int, seed: int = 0):
    """Draw ``count`` labeled points from ``model``.

    Returns ``(points, labels)``; points have shape (count, n).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = _rng.stream(seed, "sample", model.kind)
    if model.kind == CLOUD:
        idx = rng.integers(0, len(model.points), size=count)
        return model.points[idx].copy(), model.labels[idx].copy()

    radii = rng.uniform(model.beta, 1.0, size=count)
    pts = np.empty((count, model.n))
    labels = np.empty(count, dtype=np.int64)
    if model.kind == GMM:
        comp = rng.integers(0, model.L, size=count)
        coef = rng.standard_normal((count, model.k))
        for i in range(count):
            pts[i] = model.bases[comp[i]] @ coef[i]
        labels[:] = comp
    else:
        d = model.dictionary
        for i in range(count):
            support = np.sort(rng.choice(model.L, size=model.k, replace=False))
            pts[i] = d[:, support] @ rng.standard_normal(model.k)
            labels[i] = support_label(support)
    norms = np.linalg.norm(pts, axis=1)
    norms[norms == 0] = 1.0
    pts *= (radii / norms)[:, None]
    return pts, labels


def _clip(x, clip):
    if clip:
        nrm = np.linalg.norm(x)
        if nrm > 1.0:
            return x / nrm
    return x


def _omp(d, x, k):
    support: list[int] = []
    resid = x.copy()
    coef = np.zeros(0)
    for _ in range(k):
        corr = np.abs(d.T @ resid)
        corr[support] = -1.0
        support.append(int(np.argmax(corr)))
        coef, *_ = np.linalg.lstsq(d[:, support], x, rcond=None)
        resid = x - d[:, support] @ coef
    return d[:, support] @ coef


def project(model: ModelSet, point, clip: bool = True) -> np.ndarray:
    """Closest point of ``model`` to ``point`` within the searched structures.

    Union of subspaces: the subspace with the largest projection.  Sparse with
    an orthonormal dictionary: hard thresholding of D^T x to the k largest
    magnitudes; otherwise orthogonal matching pursuit.  Cloud: nearest member.
    The result is radially clipped to the unit ball unless ``clip=False``.
    """
    x = np.asarray(point, dtype=float)
    if x.shape != (model.n,):
        raise ValueError(f"point must have shape ({model.n},), got {x.shape}")
    if model.kind == GMM:
        coef = np.einsum("lnk,n->lk", model.bases, x)
        best = int(np.argmax(np.sum(coef**2, axis=1)))
        out = model.bases[best] @ coef[best]
    elif model.kind == SPARSE:
        d = model.dictionary
        if model.orthonormal_dictionary:
            a = d.T @ x
            keep = np.argsort(-np.abs(a), kind="stable")[: model.k]
            out = d[:, keep] @ a[keep]
        else:
            out = _omp(d, x, model.k)
    else:
        dists = np.sum((model.points - x) ** 2, axis=1)
        out = model.points[int(np.argmin(dists))].copy()
    return _clip(out, clip)


@dataclass(frozen=True)
class MeanWidthEstimate:
    value: float
    std_error: float
    trials: int
    sample_size: int


def _width_samples(pts: np.ndarray, trials: int, seed: int) -> np.ndarray:
    widths = np.empty(trials)
    for b, start in enumerate(range(0, trials, WIDTH_BLOCK)):
        stop = min(start + WIDTH_BLOCK, trials)
        g = _rng.stream(seed, "width", b).standard_normal((stop - start, pts.shape[1]))
        proj = g @ pts.T
        widths[start:stop] = proj.max(axis=1) - proj.min(axis=1)
    return widths


def estimate_mean_width(points, trials: int = 200, seed: int = 0) -> MeanWidthEstimate:
    """Monte Carlo mean of max_{x,y in sample} <g, x - y> over Gaussian g.

    Because the sup runs over a finite sample instead of all of K, this is a
    lower estimate of the true mean width.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        raise ValueError("mean width of an empty point list is undefined")
    if trials < 2:
        raise ValueError("trials must be >= 2")
    if len(np.unique(pts, axis=0)) <= 1:
        return MeanWidthEstimate(0.0, 0.0, trials, len(pts))
    w = _width_samples(pts, trials, seed)
    return MeanWidthEstimate(float(w.mean()), float(w.std(ddof=1) / math.sqrt(trials)),
                             trials, len(pts))


def mean_width_bound(model: ModelSet, C: float = 1.0) -> float:
    """C * sqrt(k + ln L) for a union of subspaces, C * sqrt(k ln(L/k)) for sparse."""
    if model.kind == GMM:
        return C * math.sqrt(model.k + math.log(model.L))
    if model.kind == SPARSE:
        return C * math.sqrt(model.k * math.log(model.L / model.k))
    raise UnsupportedModelError("no closed-form width for an explicit cloud")


def _as_count(v: float):
    if not math.isfinite(v) or v > 1e300:
        return math.inf
    return math.ceil(v * (1.0 - 1e-12))


def covering_bound(model: ModelSet, epsilon: float):
    """L (1 + 2/eps)^k (gmm) or C(L, k)(1 + 2/eps)^k (sparse) for eps < 1, else 1."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if model.kind == CLOUD:
        raise UnsupportedModelError("no closed-form covering number for an explicit cloud")
    if epsilon >= 1.0:
        return 1
    ball = (1.0 + 2.0 / epsilon) ** model.k
    count = model.L if model.kind == GMM else math.comb(model.L, model.k)
    return _as_count(count * ball)


def covering_bound_stirling(model: ModelSet, epsilon: float):
    """Sparse covering with C(L, k) replaced by (e L / k)^k."""
    if model.kind != SPARSE:
        raise UnsupportedModelError("the Stirling form applies to sparse models only")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if epsilon >= 1.0:
        return 1
    return _as_count((math.e * model.L / model.k) ** model.k * (1.0 + 2.0 / epsilon) ** model.k)


@dataclass
class CoveringRecord:
    epsilon: float
    centers: np.ndarray
    center_indices: list[int] = field(default_factory=list)
    bound_closed_form: float | int | None = None

    @property
    def net_size_greedy(self) -> int:
        return len(self.center_indices)


def greedy_epsilon_net(points, epsilon: float) -> CoveringRecord:
    """Farthest-first epsilon-net; the first center is point 0, ties go to the lowest index."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        return CoveringRecord(epsilon, pts.reshape(0, pts.shape[-1] if pts.ndim > 1 else 0), [])
    centers = [0]
    mind = np.linalg.norm(pts - pts[0], axis=1)
    while True:
        far = int(np.argmax(mind))
        if mind[far] <= epsilon:
            break
        centers.append(far)
        mind = np.minimum(mind, np.linalg.norm(pts - pts[far], axis=1))
    return CoveringRecord(epsilon, pts[centers].copy(), centers)


def dudley_bound(covering_fn: Callable[[float], float], epsilon_grid: Sequence[float],
                 C: float = 1.0) -> float:
    """C * integral of sqrt(ln N_eps) d eps by the trapezoid rule.

    The integrand on [0, grid[0]] is taken constant at its value at grid[0],
    so a constant covering number N integrates to sqrt(ln N) * grid[-1].
    """
    grid = np.asarray(epsilon_grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 1 or grid[0] <= 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("epsilon grid must be positive and strictly increasing")
    counts = np.array([float(covering_fn(float(e))) for e in grid])
    if np.any(counts < 1):
        raise InvalidCoveringError("covering numbers must be >= 1")
    if np.any(np.diff(counts) > 0):
        raise InvalidCoveringError("covering number increases with epsilon")
    integrand = np.sqrt(np.log(counts))
    total = integrand[0] * grid[0]
    if len(grid) > 1:
        total += float(np.sum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(grid)))
    return C * float(total)


def sudakov_covering_bound(omega: float, epsilon: float, c: float = 1.0) -> float:
    """exp(c omega^2 / eps^2), an upper bound on N_eps from log N <= c omega^2/eps^2."""
    if omega < 0 or epsilon <= 0:
        raise ValueError("need omega >= 0 and epsilon > 0")
    return math.exp(c * omega**2 / epsilon**2)


def training_size_bound(omega: float, epsilon: float, c: float = 1.0) -> float:
    """Number of samples exp(omega^2 / eps^2) needed to represent K at scale eps."""
    return sudakov_covering_bound(omega, epsilon, c)


def brute_force_cover_size(points, epsilon: float) -> int:
    """Smallest cover with centers drawn from the points themselves (tiny inputs only)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = len(pts)
    if n > 12:
        raise ValueError("brute force is limited to 12 points")
    within = np.linalg.norm(pts[:, None] - pts[None], axis=2) <= epsilon
    for size in range(1, n + 1):
        for combo in itertools.combinations(range(n), size):
            if np.all(within[list(combo)].any(axis=0)):
                return size
    return n


# file formats


def _read_table(path, header_names):
    path = Path(path)
    rows = []
    header = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            fields = text.replace(",", " ").split()
            if header is None:
                try:
                    header = tuple(int(f) for f in fields)
                except ValueError:
                    raise CloudParseError(path, lineno, f"expected header '{header_names}'")
                if len(header) != 2 or min(header) < 0:
                    raise CloudParseError(path, lineno, f"expected header '{header_names}'")
                continue
            try:
                vals = [float(f) for f in fields]
            except ValueError:
                raise CloudParseError(path, lineno, "non-numeric value")
            if not all(math.isfinite(v) for v in vals):
                raise CloudParseError(path, lineno, "NaN or infinite value")
            rows.append((lineno, vals))
    if header is None:
        raise CloudParseError(path, 1, f"missing header '{header_names}'")
    return header, rows


def load_dictionary(path) -> np.ndarray:
    """Read an n x L dictionary: header line ``n L`` then n rows of L numbers."""
    (n, L), rows = _read_table(path, "n L")
    if len(rows) != n:
        raise CloudParseError(path, rows[-1][0] if rows else 1,
                              f"expected {n} rows, found {len(rows)}")
    for lineno, vals in rows:
        if len(vals) != L:
            raise CloudParseError(path, lineno, f"expected {L} columns, found {len(vals)}")
    return np.array([v for _, v in rows], dtype=float).reshape(n, L)


def save_dictionary(path, d) -> None:
    d = np.asarray(d, dtype=float)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{d.shape[0]} {d.shape[1]}\n")
        for row in d:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
