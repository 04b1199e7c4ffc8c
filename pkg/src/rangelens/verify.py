"""Monte Carlo checks of the single-layer embedding results.

Each ``check_*`` function draws fresh random layers from seeds derived from
``cfg.seed`` and the trial index, compares an empirical statistic with its
predicted value, and returns a :class:`TheoremReport`.  Tolerances combine
the stated bound with four standard errors, because the absolute constants
in the bounds are never pinned down.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _rng, kernels
from .models import ModelSet, estimate_mean_width, greedy_epsilon_net, sample_points
from .models import _width_samples
from .netsim import Activation, hamming_fraction, binary_hash, covering_growth_factor, make_layer

PI = math.pi
AC_ANGLES = ((0.1, 0.1), (PI / 4, PI / 4), (PI / 2, PI / 2), (3 * PI / 4, 3 * PI / 4), (PI, PI))


@dataclass
class VerificationConfig:
    n: int = 100
    m: int = 10_000
    trials: int = 500
    pair_count: int = 1000
    delta: float = 0.05
    beta: float = 0.5
    epsilons: tuple = (0.3, 0.5)
    seed: int = 0
    angle_bins: tuple = AC_ANGLES
    workers: int = 1
    m_grid: tuple = (100, 1000, 10_000)
    model_n: int = 50
    model_L: int = 4
    model_k: int = 3
    cloud_size: int = 1000
    width_trials: int = 200
    order_triples: int = 1000
    order_gap: float = 0.1
    row_samples: int = 100_000
    alphas: tuple = (2.0, 3.0, 4.0)
    c_eta: float = 2.0

    def __post_init__(self):
        if not 0 < self.beta <= 1:
            raise ValueError("beta must lie in (0, 1]")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.n < 1 or self.m < 1 or self.trials < 1:
            raise ValueError("n, m and trials must be positive")
        kernels.check_angle_bins(self.angle_bins)
        self.angle_bins = tuple(tuple(b) for b in self.angle_bins)
        self.epsilons = tuple(self.epsilons)
        self.m_grid = tuple(int(v) for v in self.m_grid)
        self.alphas = tuple(self.alphas)

    def model(self, beta: float | None = None) -> ModelSet:
        return ModelSet.random_gmm(self.model_n, self.model_L, self.model_k,
                                   seed=_rng.derive_seed(self.seed, "model"),
                                   beta=self.beta if beta is None else beta)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TheoremReport:
    """Outcome of one check.

    ``passed`` holds iff every |empirical - predicted| <= tolerance (when a
    prediction is given) and every entry of ``conditions`` is true.
    """

    theorem_id: str
    empirical: object
    predicted: object
    tolerance: object
    passed: bool
    trials_used: int
    seed: int
    conditions: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ConcentrationSample:
    z_values: np.ndarray
    sum_abs: float
    bernstein_bound: float

    @classmethod
    def from_rows(cls, z, bound):
        z = np.asarray(z, dtype=float)
        return cls(z, float(np.sum(np.abs(z))), float(bound))


def _finish(theorem_id, empirical, predicted, tolerance, conditions, trials, seed, details):
    ok = all(bool(v) for v in conditions.values())
    if predicted is not None:
        e, p, t = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (empirical, predicted, tolerance))
        ok = ok and bool(np.all(np.abs(e - p) <= t))
    return TheoremReport(theorem_id, _plain(empirical), _plain(predicted), _plain(tolerance),
                         bool(ok), int(trials), int(seed),
                         {k: bool(v) for k, v in conditions.items()}, _plain(details))


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return _plain(v.tolist())
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        return float(v)
    return v


def _map(workers, fn, items):
    items = list(items)
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def random_unit(rng, n: int, count: int | None = None) -> np.ndarray:
    g = rng.standard_normal(n if count is None else (count, n))
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


def controlled_pair(rng, n: int, theta: float):
    """Unit x and unit y with angle exactly theta: y = cos t x + sin t u, u orthogonal to x."""
    x = random_unit(rng, n)
    u = rng.standard_normal(n)
    u -= (u @ x) * x
    u /= np.linalg.norm(u)
    return x, math.cos(theta) * x + math.sin(theta) * u


def _sample_theta(rng, lo, hi):
    return lo if lo == hi else float(rng.uniform(lo, hi))


def norm_halving_deviation(layer, x) -> float:
    """| ||relu(Mx)||^2 - ||x||^2 / 2 |."""
    x = np.asarray(x, dtype=float)
    return abs(float(np.sum(layer(x) ** 2)) - 0.5 * float(x @ x))


def check_norm_halving(cfg: VerificationConfig) -> TheoremReport:
    def trial(t):
        layer = make_layer(cfg.n, cfg.m, "relu", _rng.derive_seed(cfg.seed, "norm", t))
        x = random_unit(_rng.stream(cfg.seed, "norm-x", t), cfg.n)
        return norm_halving_deviation(layer, x)

    devs = np.array(_map(cfg.workers, trial, range(cfg.trials)))
    worst = float(devs.max())
    return _finish("norm_halving", worst, 0.0, cfg.delta, {}, cfg.trials, cfg.seed, {
        "mean_deviation": float(devs.mean()),
        "predicted_sd": math.sqrt(1.25 / cfg.m),
        "fraction_within_delta": float(np.mean(devs <= cfg.delta)),
        "note": "zero input is degenerate: deviation is exactly 0",
    })


def _pair_trials(cfg, tag, norm_window):
    """Per trial: one fresh ReLU layer and one pair per angle bin."""
    bins = cfg.angle_bins

    def trial(t):
        rng = _rng.stream(cfg.seed, tag + "-pairs", t)
        layer = make_layer(cfg.n, cfg.m, "relu", _rng.derive_seed(cfg.seed, tag, t))
        xs, ys, th, nx, ny = [], [], [], [], []
        for lo, hi in bins:
            theta = _sample_theta(rng, lo, hi)
            x, y = controlled_pair(rng, cfg.n, theta)
            if norm_window:
                rx, ry = rng.uniform(cfg.beta, 1.0, size=2)
            else:
                rx = ry = 1.0
            xs.append(rx * x)
            ys.append(ry * y)
            th.append(theta)
            nx.append(rx)
            ny.append(ry)
        out = layer(np.vstack(xs + ys))
        ox, oy = out[: len(bins)], out[len(bins):]
        in_sq = np.sum((np.array(xs) - np.array(ys)) ** 2, axis=1)
        out_sq = np.sum((ox - oy) ** 2, axis=1)
        cos_out = np.array([math.cos(kernels.angle_between(a, b)) for a, b in zip(ox, oy)])
        return np.array(th), np.array(nx), np.array(ny), in_sq, out_sq, cos_out

    res = _map(cfg.workers, trial, range(cfg.trials))
    return [np.array([r[i] for r in res]) for i in range(6)]


def check_distance_kernel(cfg: VerificationConfig) -> TheoremReport:
    """Mean squared output distance per angle bin against the kernel predictor."""
    theta, nx, ny, in_sq, out_sq, _ = _pair_trials(cfg, "dist", norm_window=False)
    pred = 0.5 * in_sq - nx * ny * kernels.dist_kernel(theta)
    printed = 0.5 * in_sq + nx * ny * kernels.dist_kernel(theta)
    emp = out_sq.mean(axis=0)
    pmean = pred.mean(axis=0)
    se = (out_sq - pred).std(axis=0, ddof=1) / math.sqrt(cfg.trials)
    tol = np.maximum(cfg.delta, 4.0 * se)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(in_sq.mean(axis=0) > 0, emp / in_sq.mean(axis=0), np.nan)
    return _finish("distance_kernel", emp, pmean, tol, {}, cfg.trials, cfg.seed, {
        "bins": cfg.angle_bins,
        "standard_error": se,
        "printed_variant": printed.mean(axis=0),
        "mean_input_sq": in_sq.mean(axis=0),
        "envelope_ratio": [None if not np.isfinite(r) else float(r) for r in ratio],
    })


def check_cosine_map(cfg: VerificationConfig) -> TheoremReport:
    """Output cosine per bin against cos t + dist(t), plus order preservation."""
    theta, _, _, _, _, cos_out = _pair_trials(cfg, "cos", norm_window=True)
    pred = kernels.expected_cosine(theta)
    emp = cos_out.mean(axis=0)
    pmean = pred.mean(axis=0)
    se = (cos_out - pred).std(axis=0, ddof=1) / math.sqrt(cfg.trials)
    tol = np.maximum(cfg.delta, 4.0 * se)
    stated = (15 * cfg.delta / (cfg.beta**2 - 2 * cfg.delta)
              if cfg.beta**2 > 2 * cfg.delta else math.inf)
    rate = order_preservation_rate(cfg)
    return _finish("cosine_map", emp, pmean, tol, {"order_preservation": rate >= 0.95},
                   cfg.trials, cfg.seed, {
                       "bins": cfg.angle_bins,
                       "standard_error": se,
                       "stated_bound": stated,
                       "order_preservation_rate": rate,
                   })


def order_preservation_rate(cfg: VerificationConfig, per_layer: int = 50) -> float:
    """Fraction of triples (x, y, z), angle(x,y) <= angle(x,z) - gap, whose output angles keep that order."""
    gap = cfg.order_gap
    blocks = math.ceil(cfg.order_triples / per_layer)

    def block(b):
        rng = _rng.stream(cfg.seed, "order-triples", b)
        layer = make_layer(cfg.n, cfg.m, "relu", _rng.derive_seed(cfg.seed, "order", b))
        count = min(per_layer, cfg.order_triples - b * per_layer)
        pts = []
        for _ in range(count):
            t1 = rng.uniform(0.0, PI - gap)
            t2 = rng.uniform(t1 + gap, PI)
            x, y = controlled_pair(rng, cfg.n, t1)
            u = rng.standard_normal(cfg.n)
            u -= (u @ x) * x
            u /= np.linalg.norm(u)
            z = math.cos(t2) * x + math.sin(t2) * u
            pts.extend([x, y, z])
        out = layer(np.array(pts))
        kept = 0
        for i in range(count):
            ox, oy, oz = out[3 * i: 3 * i + 3]
            kept += kernels.angle_between(ox, oy) <= kernels.angle_between(ox, oz)
        return kept

    kept = sum(_map(cfg.workers, block, range(blocks)))
    return kept / cfg.order_triples


def _model_pairs(cfg, model, tag):
    pts, _ = sample_points(model, 2 * cfg.pair_count, seed=_rng.derive_seed(cfg.seed, tag))
    return pts[0::2], pts[1::2], pts


def hamming_deviations(cfg, m_grid, activation="relu", model=None):
    """Per m: max over sampled pairs of |theta/pi - Hamming fraction| with one fixed layer."""
    model = model or cfg.model(beta=1.0)
    xs, ys, pts = _model_pairs(cfg, model, "hamming-pairs")
    geo = np.array([kernels.angle_between(a, b) for a, b in zip(xs, ys)]) / PI
    act = Activation.parse(activation)

    def one(m):
        layer = make_layer(model.n, m, act, _rng.derive_seed(cfg.seed, "hamming", m))
        return float(np.max(np.abs(geo - hamming_fraction(binary_hash(layer, xs),
                                                           binary_hash(layer, ys)))))

    return np.array(_map(cfg.workers, one, m_grid)), pts


def check_hamming_isometry(cfg: VerificationConfig, m_grid=None, activation="relu",
                           model=None) -> TheoremReport:
    """Decay of the worst pairwise |geodesic/pi - Hamming fraction| with m."""
    m_grid = tuple(m_grid or cfg.m_grid)
    devs, pts = hamming_deviations(cfg, m_grid, activation, model)
    logm, logd = np.log(m_grid), np.log(np.maximum(devs, 1e-300))
    slope = float(np.polyfit(logm, logd, 1)[0]) if len(m_grid) > 1 else float("nan")
    monotone = bool(np.all(devs[1:] <= 1.1 * devs[:-1]))
    omega = estimate_mean_width(pts, cfg.width_trials, _rng.derive_seed(cfg.seed, "hw")).value
    fitted_c = float(np.max(devs * np.array(m_grid) ** (1 / 6) / max(omega, 1e-12) ** (1 / 3)))
    act = Activation.parse(activation)
    return _finish(f"hamming_isometry[{act.kind}]", devs, None, None,
                   {"slope_at_most_-0.15": slope <= -0.15, "monotone_10pct": monotone},
                   cfg.pair_count, cfg.seed, {
                       "m_grid": m_grid, "slope": slope, "mean_width": omega,
                       "fitted_C": fitted_c, "activation": act.to_dict(),
                   })


def check_activation_generality(cfg: VerificationConfig, activation, m_grid=None) -> TheoremReport:
    """Hamming check for another semi-truncated activation, compared with ReLU."""
    rep = check_hamming_isometry(cfg, m_grid, activation)
    base = check_hamming_isometry(cfg, m_grid, "relu")
    last, base_last = rep.empirical[-1], base.empirical[-1]
    rep.details["relu_deviations"] = base.empirical
    rep.details["relative_gap_at_largest_m"] = abs(last - base_last) / max(base_last, 1e-300)
    rep.conditions["within_10pct_of_relu"] = abs(last - base_last) <= 0.1 * base_last
    rep.passed = all(rep.conditions.values())
    rep.theorem_id = f"activation_generality[{Activation.parse(activation).kind}]"
    return rep


def check_covering_propagation(cfg: VerificationConfig, model=None, activation="relu",
                               runs: int | None = None) -> TheoremReport:
    """Greedy nets: N_out(eps) <= N_in(eps / (1 + w/sqrt(m))) over seeded runs."""
    model = model or cfg.model()
    runs = runs or cfg.trials

    def run(r):
        cloud, _ = sample_points(model, cfg.cloud_size, seed=_rng.derive_seed(cfg.seed, "cov-cloud", r))
        layer = make_layer(model.n, cfg.m, activation, _rng.derive_seed(cfg.seed, "cov-layer", r))
        out = layer(cloud)
        omega = estimate_mean_width(cloud, cfg.width_trials,
                                    _rng.derive_seed(cfg.seed, "cov-width", r)).value
        factor = covering_growth_factor(omega, cfg.m)
        sizes = []
        for eps in cfg.epsilons:
            n_in = greedy_epsilon_net(cloud, eps / factor).net_size_greedy
            n_out = greedy_epsilon_net(out, eps).net_size_greedy
            sizes.append((n_in, n_out))
        return factor, sizes

    res = _map(cfg.workers, run, range(runs))
    holds = [all(o <= i for i, o in sizes) for _, sizes in res]
    frac = float(np.mean(holds))
    return _finish("covering_propagation", frac, None, None, {"holds_in_95pct": frac >= 0.95},
                   runs, cfg.seed, {
                       "epsilons": cfg.epsilons,
                       "growth_factors": [f for f, _ in res],
                       "net_sizes_in_out": [s for _, s in res],
                   })


def _binomial_se(p, n):
    p = min(max(p, 0.0), 1.0)
    return math.sqrt(p * (1 - p) / n)


def check_concentration(cfg: VerificationConfig, model=None) -> TheoremReport:
    """Gaussian concentration of the width, the sup-row bound, Bernstein, and m^2 Var(z_i)."""
    model = model or cfg.model()
    cloud, _ = sample_points(model, cfg.cloud_size, seed=_rng.derive_seed(cfg.seed, "conc-cloud"))
    conditions, details = {}, {}

    # Gaussian concentration of sup <g, x - y>
    widths = _width_samples(cloud, cfg.trials, _rng.derive_seed(cfg.seed, "conc-width"))
    omega = float(widths.mean())
    prop1 = []
    for a in cfg.alphas:
        freq = float(np.mean(np.abs(widths - omega) >= a))
        bound = 2 * math.exp(-a**2 / (2 * cfg.c_eta))
        prop1.append({"alpha": a, "frequency": freq, "bound": bound})
        conditions[f"width_tail_alpha_{a:g}"] = freq <= bound + 3 * _binomial_se(min(bound, 1), cfg.trials)
    details["width_tail"] = prop1
    details["mean_width"] = omega

    # sup over K of (relu(r x) - relu(r y))^2 against 4 w^2 / m
    rows = _rng.stream(cfg.seed, "conc-rows").standard_normal((cfg.trials, model.n)) / math.sqrt(cfg.m)
    act = np.maximum(cloud @ rows.T, 0.0)
    sup = (act.max(axis=0) - act.min(axis=0)) ** 2
    freq = float(np.mean(sup >= 4 * omega**2 / cfg.m))
    bound = 2 * math.exp(-omega**2 / 4)
    conditions["sup_row_bound"] = freq <= bound + 3 * _binomial_se(min(bound, 1), cfg.trials)
    details["sup_row"] = {"frequency": freq, "bound": bound, "threshold": 4 * omega**2 / cfg.m}

    # per-row z_i for pairs at each bin angle
    bins = cfg.angle_bins
    layers = max(min(cfg.trials, 200), math.ceil(cfg.row_samples / cfg.m))
    t_half = cfg.delta / 2

    def trial(t):
        rng = _rng.stream(cfg.seed, "conc-pairs", t)
        layer = make_layer(cfg.n, cfg.m, "relu", _rng.derive_seed(cfg.seed, "conc-layer", t))
        pairs = [controlled_pair(rng, cfg.n, _sample_theta(rng, lo, hi)) + (lo,) for lo, hi in bins]
        pre = layer.preactivation(np.vstack([p[0] for p in pairs] + [p[1] for p in pairs]))
        ra, rb = np.maximum(pre[: len(bins)], 0), np.maximum(pre[len(bins):], 0)
        sq = (ra - rb) ** 2
        thetas = np.array([kernels.angle_between(p[0], p[1]) for p in pairs])
        mean = (1 - kernels.expected_cosine(thetas)) / cfg.m
        return sq - mean[:, None], thetas

    res = _map(cfg.workers, trial, range(layers))
    z = np.stack([r[0] for r in res])          # (layers, bins, m)
    thetas = res[0][1]
    emp_var, pred_var, se_var, bern = [], [], [], []
    for j, theta in enumerate(thetas):
        zs = (cfg.m * z[:, j, :]).ravel()[: cfg.row_samples]
        v = float(zs.var(ddof=1))
        c4 = float(np.mean((zs - zs.mean()) ** 4))
        emp_var.append(v)
        se_var.append(math.sqrt(max(c4 - v**2, 0.0) / len(zs)))
        hm = kernels.higher_moments(float(theta))
        pred_var.append(hm["z_var_bound"])
        conditions[f"z_var_le_2.1[{theta:.4f}]"] = v <= 2.1

        sums = z[:, j, :].sum(axis=1)
        abs_sums = np.abs(z[:, j, :]).sum(axis=1)
        pair_width = math.sqrt(2 - 2 * math.cos(theta)) * math.sqrt(2 / PI)
        big_m = (4 * pair_width**2 + 3) / cfg.m
        b = 2 * math.exp(-(t_half**2 / 2) / (hm["z_var_bound"] / cfg.m + big_m * t_half / 3))
        f_signed = float(np.mean(np.abs(sums) > t_half))
        f_abs = float(np.mean(abs_sums > t_half))
        conditions[f"bernstein[{theta:.4f}]"] = f_signed <= b + 3 * _binomial_se(min(b, 1), layers)
        samples = ConcentrationSample.from_rows(z[0, j, :], b)
        bern.append({"theta": float(theta), "bound": b, "frequency_signed_sum": f_signed,
                     "frequency_abs_sum": f_abs, "example_sum_abs": samples.sum_abs})
    details["bernstein"] = bern
    details["z_var_standard_error"] = se_var
    details["bins"] = bins
    tol = [4 * s for s in se_var]
    return _finish("concentration", emp_var, pred_var, tol, conditions, layers, cfg.seed, details)


CHECKS = {
    "norm_halving": check_norm_halving,
    "distance_kernel": check_distance_kernel,
    "cosine_map": check_cosine_map,
    "hamming_isometry": check_hamming_isometry,
    "covering_propagation": check_covering_propagation,
    "concentration": check_concentration,
}
