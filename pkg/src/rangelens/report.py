"""Pair-distortion analytics over aligned (input, output) point clouds.

Two views are provided.  ``boundary_pair_stats`` looks, for every labeled
point, at its farthest same-class and closest other-class partner, found
separately in the input and in the output cloud, and histograms how the
distance or angle to that partner changes.  ``angle_bin_propagation`` pushes
pairs with controlled input angles through a network and histograms the
output angles per depth.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from . import _rng, kernels
from .errors import CloudParseError
from .models import _read_table
from .netsim import Layer, RandomNetwork, forward

PI = math.pi
STATISTICS = ("ratio_euclid", "diff_euclid", "ratio_angle", "diff_angle")
ROW_CHUNK = 256


@dataclass
class PairObservation:
    euclid_in_sq: float
    euclid_out_sq: float
    angle_in: float
    angle_out: float
    relation: str                    # "intra" or "inter"
    hamming: float | None = None

    def __post_init__(self):
        if self.euclid_in_sq < 0 or self.euclid_out_sq < 0:
            raise ValueError("squared distances must be non-negative")
        for a in (self.angle_in, self.angle_out):
            if not 0.0 <= a <= PI:
                raise ValueError(f"angle {a} outside [0, pi]")


@dataclass
class DistortionHistogram:
    """Counts over ``bin_edges`` (len(counts) + 1 edges).

    When every observation has the same value the histogram is a single
    degenerate bin [v, v].  An empty histogram has no bins.
    """

    bin_edges: list
    counts: list
    statistic: str
    population: str

    @classmethod
    def from_values(cls, values, statistic: str, population: str, bins: int = 50):
        v = np.asarray(values, dtype=float)
        if v.size == 0:
            return cls([], [], statistic, population)
        lo, hi = float(v.min()), float(v.max())
        if lo == hi:
            return cls([lo, hi], [int(v.size)], statistic, population)
        counts, edges = np.histogram(v, bins=bins, range=(lo, hi))
        return cls([float(e) for e in edges], [int(c) for c in counts], statistic, population)

    @property
    def total(self) -> int:
        return int(sum(self.counts))

    def merge(self, other: "DistortionHistogram") -> "DistortionHistogram":
        """Sum of two histograms that share edges (an empty one is neutral)."""
        if not other.counts:
            return self
        if not self.counts:
            return other
        if self.bin_edges != other.bin_edges:
            raise ValueError("cannot merge histograms with different edges")
        return DistortionHistogram(list(self.bin_edges),
                                   [a + b for a, b in zip(self.counts, other.counts)],
                                   self.statistic, self.population)

    def to_dict(self) -> dict:
        return {"statistic": self.statistic, "population": self.population,
                "bin_edges": list(self.bin_edges), "counts": list(self.counts)}

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin_lo", "bin_hi", "count"])
            for i, c in enumerate(self.counts):
                w.writerow([f"{self.bin_edges[i]:.17g}", f"{self.bin_edges[i + 1]:.17g}", c])

    @classmethod
    def read_csv(cls, path, statistic: str = "", population: str = ""):
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0] != ["bin_lo", "bin_hi", "count"]:
            raise ValueError(f"{path}: not a histogram CSV")
        body = rows[1:]
        if not body:
            return cls([], [], statistic, population)
        edges = [float(r[0]) for r in body] + [float(body[-1][1])]
        return cls(edges, [int(r[2]) for r in body], statistic, population)


# clouds

def load_cloud(path):
    """Read a labeled cloud: header ``n count`` then rows of n values and an integer label."""
    (n, count), rows = _read_table(path, "n count")
    if len(rows) != count:
        raise CloudParseError(path, rows[-1][0] if rows else 1,
                              f"expected {count} rows, found {len(rows)}")
    pts = np.empty((count, n))
    labels = np.empty(count, dtype=np.int64)
    for i, (lineno, vals) in enumerate(rows):
        if len(vals) != n + 1:
            raise CloudParseError(path, lineno, f"expected {n + 1} columns, found {len(vals)}")
        if vals[-1] != int(vals[-1]):
            raise CloudParseError(path, lineno, "label must be an integer")
        pts[i] = vals[:-1]
        labels[i] = int(vals[-1])
    return pts, labels


def save_cloud(path, points, labels) -> None:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    labels = np.asarray(labels)
    if len(labels) != len(pts):
        raise ValueError("need one label per point")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{pts.shape[1]} {pts.shape[0]}\n")
        for row, lab in zip(pts, labels):
            fh.write(",".join(f"{v:.17g}" for v in row) + f",{int(lab)}\n")


# pairwise geometry

def _unit_rows(x):
    nrm = np.linalg.norm(x, axis=1)
    zero = nrm == 0
    u = np.zeros_like(x)
    u[~zero] = x[~zero] / nrm[~zero, None]
    return u, zero


def _angles(u_rows, zero_rows, u_all, zero_all):
    d = cdist(u_rows, u_all)
    a = 2.0 * np.arcsin(np.clip(d / 2.0, 0.0, 1.0))
    # a zero vector has no direction; treat its angle to anything as pi/2
    a[zero_rows, :] = PI / 2
    a[:, zero_all] = PI / 2
    return a


def _extreme_partners(x, labels, start, stop):
    """For rows start:stop: farthest intra-class and closest inter-class distance and angle."""
    u, zero = _unit_rows(x)
    d = cdist(x[start:stop], x)
    a = _angles(u[start:stop], zero[start:stop], u, zero)
    same = labels[start:stop, None] == labels[None, :]
    self_mask = np.zeros_like(same)
    self_mask[np.arange(stop - start), np.arange(start, stop)] = True
    intra = same & ~self_mask
    inter = ~same
    out = {}
    with np.errstate(invalid="ignore"):
        out["intra_euclid"] = np.where(intra.any(1), np.where(intra, d, -np.inf).max(1), np.nan)
        out["intra_angle"] = np.where(intra.any(1), np.where(intra, a, -np.inf).max(1), np.nan)
        out["inter_euclid"] = np.where(inter.any(1), np.where(inter, d, np.inf).min(1), np.nan)
        out["inter_angle"] = np.where(inter.any(1), np.where(inter, a, np.inf).min(1), np.nan)
    return out


def _map_chunks(fn, count, workers):
    starts = list(range(0, count, ROW_CHUNK))
    jobs = [(s, min(s + ROW_CHUNK, count)) for s in starts]
    if workers > 1 and len(jobs) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda j: fn(*j), jobs))
    else:
        parts = [fn(*j) for j in jobs]
    return {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}


@dataclass
class BoundaryReport:
    histograms: dict
    skipped: dict
    medians: dict
    zero_vectors: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"histograms": {k: h.to_dict() for k, h in self.histograms.items()},
                "skipped": self.skipped, "medians": self.medians,
                "zero_vectors": self.zero_vectors}


def _ratio_diff(v_in, v_out):
    ok = np.isfinite(v_in) & np.isfinite(v_out)
    diff = v_out[ok] - v_in[ok]
    rok = ok & (v_in > 0)
    return v_out[rok] / v_in[rok], diff, int(np.sum(ok & ~rok))


def _add_population(hists, skipped, medians, population, e_in, e_out, a_in, a_out, bins):
    r_e, d_e, z_e = _ratio_diff(e_in, e_out)
    r_a, d_a, z_a = _ratio_diff(a_in, a_out)
    for stat, vals in zip(STATISTICS, (r_e, d_e, r_a, d_a)):
        key = f"{population}/{stat}"
        hists[key] = DistortionHistogram.from_values(vals, stat, population, bins)
        medians[key] = float(np.median(vals)) if len(vals) else None
    skipped[f"{population}/no_partner"] = int(np.sum(~np.isfinite(e_in)))
    skipped[f"{population}/zero_input_distance"] = z_e
    skipped[f"{population}/zero_input_angle"] = z_a


def boundary_pair_stats(input_cloud, output_cloud, labels, bins: int = 50,
                        workers: int = 1, random_pairs: bool = True,
                        seed: int = 0) -> BoundaryReport:
    """Boundary-pair histograms for aligned clouds (row i of both is the same sample).

    Partners are searched independently in the input and in the output, so the
    output partner of x need not be the image of its input partner.  Points
    without a partner of the required kind are skipped and counted; so are
    ratios whose input distance is zero.  With ``random_pairs`` a random
    same-class and other-class partner per point gives the baseline
    populations ``random_intra`` and ``random_inter``.
    """
    x = np.atleast_2d(np.asarray(input_cloud, dtype=float))
    y = np.atleast_2d(np.asarray(output_cloud, dtype=float))
    labels = np.asarray(labels)
    if len(x) != len(y) or len(x) != len(labels):
        raise ValueError("clouds and labels must have the same number of rows")
    if len(x) == 0:
        raise ValueError("empty cloud")
    p_in = _map_chunks(lambda s, e: _extreme_partners(x, labels, s, e), len(x), workers)
    p_out = _map_chunks(lambda s, e: _extreme_partners(y, labels, s, e), len(y), workers)
    hists, skipped, medians = {}, {}, {}
    for rel, pop in (("intra", "boundary_intra"), ("inter", "boundary_inter")):
        _add_population(hists, skipped, medians, pop,
                        p_in[f"{rel}_euclid"], p_out[f"{rel}_euclid"],
                        p_in[f"{rel}_angle"], p_out[f"{rel}_angle"], bins)
    if random_pairs:
        for rel, pop in (("intra", "random_intra"), ("inter", "random_inter")):
            j = _random_partners(labels, rel == "intra", seed)
            ok = j >= 0
            idx = np.nonzero(ok)[0]
            e_in = np.full(len(x), np.nan)
            e_out = np.full(len(x), np.nan)
            a_in = np.full(len(x), np.nan)
            a_out = np.full(len(x), np.nan)
            e_in[idx] = np.linalg.norm(x[idx] - x[j[idx]], axis=1)
            e_out[idx] = np.linalg.norm(y[idx] - y[j[idx]], axis=1)
            a_in[idx] = _row_angles(x[idx], x[j[idx]])
            a_out[idx] = _row_angles(y[idx], y[j[idx]])
            _add_population(hists, skipped, medians, pop, e_in, e_out, a_in, a_out, bins)
    zeros = {"input": int(np.sum(~x.any(axis=1))), "output": int(np.sum(~y.any(axis=1)))}
    return BoundaryReport(hists, skipped, medians, zeros)


def _random_partners(labels, same: bool, seed: int) -> np.ndarray:
    """One random partner per point (or -1); depends only on the point's label multiset and index."""
    rng = _rng.stream(seed, "random-partner", int(same))
    draws = rng.random(len(labels))
    out = np.full(len(labels), -1, dtype=np.int64)
    for i, lab in enumerate(labels):
        cand = np.nonzero((labels == lab) if same else (labels != lab))[0]
        if same:
            cand = cand[cand != i]
        if len(cand):
            out[i] = cand[int(draws[i] * len(cand))]
    return out


def _row_angles(a, b):
    ua, za = _unit_rows(a)
    ub, zb = _unit_rows(b)
    ang = 2.0 * np.arcsin(np.clip(np.linalg.norm(ua - ub, axis=1) / 2.0, 0.0, 1.0))
    ang[za | zb] = PI / 2
    return ang


# angle bins through depth

def _propagate(net, x, workers):
    if isinstance(net, (Layer, RandomNetwork)):
        return forward(net, x, workers)
    outs = []
    for f in net:
        x = np.asarray(f(x), dtype=float)
        outs.append(x)
    return outs


@dataclass
class AngleBinReport:
    bins: list
    depths: list
    mean_ratio: dict          # "lo,hi" -> list per depth (None if no usable pairs)
    mean_angle_out: dict
    histograms: dict
    pair_counts: dict

    def to_dict(self) -> dict:
        return {"bins": self.bins, "depths": self.depths, "mean_ratio": self.mean_ratio,
                "mean_angle_out": self.mean_angle_out, "pair_counts": self.pair_counts,
                "histograms": {k: h.to_dict() for k, h in self.histograms.items()}}


def bin_key(lo, hi) -> str:
    return f"{lo:.6f},{hi:.6f}"


def angle_bin_propagation(input_cloud, net, bins, pairs: int = 1000, depths=None,
                          seed: int = 0, workers: int = 1, hist_bins: int = 50) -> AngleBinReport:
    """Output angle, angle ratio and difference per input-angle bin and depth.

    For each bin, ``pairs`` anchors are drawn from ``input_cloud`` (or uniformly
    from the sphere when it is None) and each gets a partner of the same norm
    at an angle drawn uniformly from the bin.  ``net`` is a Layer, a
    RandomNetwork, or any sequence of callables mapping arrays row-wise.
    """
    bins = kernels.check_angle_bins(bins)
    n_layers = len(net.layers) if isinstance(net, RandomNetwork) else (1 if isinstance(net, Layer) else len(net))
    depths = sorted(set(depths or range(1, n_layers + 1)))
    if depths[0] < 1 or depths[-1] > n_layers:
        raise ValueError(f"depths must lie in 1..{n_layers}")
    cloud = None if input_cloud is None else np.atleast_2d(np.asarray(input_cloud, dtype=float))
    n = cloud.shape[1] if cloud is not None else (
        net.input_dim if isinstance(net, RandomNetwork) else net.n if isinstance(net, Layer) else None)
    if n is None:
        raise ValueError("input_cloud is required when net is a sequence of callables")

    mean_ratio, mean_out, hists, counts = {}, {}, {}, {}
    for b, (lo, hi) in enumerate(bins):
        key = bin_key(lo, hi)
        counts[key] = int(pairs)
        if pairs == 0:
            mean_ratio[key] = [None] * len(depths)
            mean_out[key] = [None] * len(depths)
            for d in depths:
                for stat in ("angle_out", "ratio_angle", "diff_angle"):
                    hists[f"{key}/depth{d}/{stat}"] = DistortionHistogram([], [], stat, f"angle_bin[{key}]")
            continue
        rng = _rng.stream(seed, "angle-bin", b)
        if cloud is not None:
            anchors = cloud[rng.integers(0, len(cloud), size=pairs)]
        else:
            anchors = rng.standard_normal((pairs, n))
        nrm = np.linalg.norm(anchors, axis=1)
        nrm[nrm == 0] = 1.0
        ux = anchors / nrm[:, None]
        g = rng.standard_normal((pairs, n))
        g -= np.sum(g * ux, axis=1)[:, None] * ux
        g /= np.linalg.norm(g, axis=1)[:, None]
        theta = rng.uniform(lo, hi, size=pairs) if hi > lo else np.full(pairs, lo)
        partners = nrm[:, None] * (np.cos(theta)[:, None] * ux + np.sin(theta)[:, None] * g)
        x = nrm[:, None] * ux
        theta_in = _row_angles(x, partners)
        outs = _propagate(net, np.vstack([x, partners]), workers)
        ratios, angs = [], []
        for d in depths:
            o = outs[d - 1]
            t_out = _row_angles(o[:pairs], o[pairs:])
            ok = theta_in > 0
            r = t_out[ok] / theta_in[ok]
            ratios.append(float(r.mean()) if r.size else None)
            angs.append(float(t_out.mean()))
            pop = f"angle_bin[{key}]"
            hists[f"{key}/depth{d}/angle_out"] = DistortionHistogram.from_values(t_out, "angle_out", pop, hist_bins)
            hists[f"{key}/depth{d}/ratio_angle"] = DistortionHistogram.from_values(r, "ratio_angle", pop, hist_bins)
            hists[f"{key}/depth{d}/diff_angle"] = DistortionHistogram.from_values(
                t_out - theta_in, "diff_angle", pop, hist_bins)
        mean_ratio[key] = ratios
        mean_out[key] = angs
    return AngleBinReport([list(b) for b in bins], depths, mean_ratio, mean_out, hists, counts)


def write_histograms(histograms: dict, out_dir) -> list:
    """One CSV per histogram, named from its key; returns the file names."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = []
    for key in sorted(histograms):
        name = "hist_" + "".join(c if c.isalnum() or c in "._-" else "_" for c in key) + ".csv"
        histograms[key].write_csv(out_dir / name)
        names.append(name)
    return names
