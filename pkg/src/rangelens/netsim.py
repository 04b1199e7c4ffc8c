"""Random Gaussian layers, networks and their binary (sign) embeddings."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _rng

ROW_BLOCK = 256          # weight rows per RNG stream; part of the reproducibility contract
POINT_CHUNK = 256        # points per forward work item
MATERIALIZE_LIMIT = 2**24  # larger layers stream their rows instead of caching W


@dataclass(frozen=True)
class Activation:
    """Element-wise activation.

    ``relu``, ``capped_relu`` (cap > 0), ``hard_tanh`` (lo < 0 < hi) and
    ``identity`` are semi-truncated linear: f(0) = 0, 0 < f(t) <= t for t > 0,
    t <= f(t) <= 0 for t < 0, and 1-Lipschitz.  ``sign`` maps t <= 0 to -1.
    """

    kind: str = "relu"
    cap: float = 1.0
    lo: float = -1.0
    hi: float = 1.0

    def __post_init__(self):
        if self.kind not in ("relu", "capped_relu", "hard_tanh", "identity", "sign"):
            raise ValueError(f"unknown activation {self.kind!r}")
        if self.kind == "capped_relu" and not self.cap > 0:
            raise ValueError("cap must be positive")
        if self.kind == "hard_tanh" and not (self.lo < 0 < self.hi):
            raise ValueError("hard_tanh needs lo < 0 < hi")

    @classmethod
    def parse(cls, spec) -> "Activation":
        if isinstance(spec, Activation):
            return spec
        if isinstance(spec, str):
            return cls(spec)
        return cls(**spec)

    @property
    def semi_truncated(self) -> bool:
        return self.kind != "sign"

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "relu":
            return np.maximum(t, 0.0)
        if self.kind == "capped_relu":
            return np.clip(t, 0.0, self.cap)
        if self.kind == "hard_tanh":
            return np.clip(t, self.lo, self.hi)
        if self.kind == "identity":
            return t.copy()
        return np.where(t > 0, 1.0, -1.0)

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "capped_relu":
            d["cap"] = self.cap
        if self.kind == "hard_tanh":
            d.update(lo=self.lo, hi=self.hi)
        return d


RELU = Activation("relu")


def weight_rows(seed: int, n: int, m: int, start: int, stop: int) -> np.ndarray:
    """Rows ``start:stop`` of the layer matrix for ``(seed, n, m)``.

    Row block b is drawn from its own stream, so any slice reproduces the
    corresponding rows of the full matrix exactly.
    """
    scale = 1.0 / math.sqrt(m)
    out = np.empty((stop - start, n))
    b0, b1 = start // ROW_BLOCK, (stop - 1) // ROW_BLOCK
    for b in range(b0, b1 + 1):
        lo, hi = b * ROW_BLOCK, min((b + 1) * ROW_BLOCK, m)
        block = _rng.stream(seed, "layer", n, m, b).standard_normal((hi - lo, n))
        s, e = max(lo, start), min(hi, stop)
        out[s - start:e - start] = block[s - lo:e - lo] * scale
    return out


@dataclass(frozen=True, eq=False)
class Layer:
    """x -> f(M x) with M an m x n matrix of i.i.d. N(0, 1/m) entries.

    ``renormalize`` rescales each output to the unit sphere (zero outputs stay zero).
    """

    n: int
    m: int
    activation: Activation = RELU
    seed: int = 0
    renormalize: bool = False
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def with_weights(cls, w, activation="relu", renormalize: bool = False) -> "Layer":
        """Layer with an explicit m x n matrix instead of a seeded one."""
        w = np.array(w, dtype=float)
        if w.ndim != 2 or min(w.shape) < 1:
            raise ValueError("weights must be a non-empty 2-D array")
        layer = cls(w.shape[1], w.shape[0], Activation.parse(activation), -1, renormalize)
        layer._cache["W"] = w
        return layer

    @property
    def weights(self) -> np.ndarray:
        w = self._cache.get("W")
        if w is None:
            w = weight_rows(self.seed, self.n, self.m, 0, self.m)
            if self.m * self.n <= MATERIALIZE_LIMIT:
                self._cache["W"] = w
        return w

    def preactivation(self, points) -> np.ndarray:
        x = np.asarray(points, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.n:
            raise ValueError(f"layer expects dimension {self.n}, got {x.shape[1]}")
        if self.m * self.n <= MATERIALIZE_LIMIT or "W" in self._cache:
            out = x @ self.weights.T
        else:
            out = np.empty((len(x), self.m))
            step = max(ROW_BLOCK, (MATERIALIZE_LIMIT // self.n) // ROW_BLOCK * ROW_BLOCK)
            for s in range(0, self.m, step):
                e = min(s + step, self.m)
                out[:, s:e] = x @ weight_rows(self.seed, self.n, self.m, s, e).T
        return out[0] if single else out

    def __call__(self, points) -> np.ndarray:
        y = self.activation(self.preactivation(points))
        if self.renormalize:
            nrm = np.linalg.norm(y, axis=-1, keepdims=True)
            y = np.divide(y, nrm, out=np.zeros_like(y), where=nrm > 0)
        return y

    def to_dict(self) -> dict:
        if self.seed < 0:
            raise ValueError("a layer with explicit weights has no seed to serialize")
        return {"n": self.n, "m": self.m, "activation": self.activation.to_dict(),
                "seed": self.seed, "renormalize": self.renormalize}


def make_layer(n: int, m: int, activation="relu", seed: int = 0,
               renormalize: bool = False) -> Layer:
    if n < 1 or m < 1:
        raise ValueError(f"layer dimensions must be positive, got n={n}, m={m}")
    return Layer(int(n), int(m), Activation.parse(activation), int(seed), bool(renormalize))


@dataclass(frozen=True)
class RandomNetwork:
    layers: tuple

    def __post_init__(self):
        if len(self.layers) < 1:
            raise ValueError("a network needs at least one layer")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.m != b.n:
                raise ValueError(f"layer widths do not chain: {a.m} -> {b.n}")

    @classmethod
    def stack(cls, widths, activation="relu", seed: int = 0,
              renormalize: bool = False) -> "RandomNetwork":
        """Network with layer i mapping widths[i] -> widths[i+1]."""
        return cls(tuple(
            make_layer(widths[i], widths[i + 1], activation, _rng.derive_seed(seed, "stack", i),
                       renormalize)
            for i in range(len(widths) - 1)))

    @property
    def input_dim(self) -> int:
        return self.layers[0].n


def _apply(layer, x, workers):
    if layer.m * layer.n > MATERIALIZE_LIMIT:
        # streamed weights: one pass over the rows serves every point
        return layer(x)
    chunks = [x[s:s + POINT_CHUNK] for s in range(0, len(x), POINT_CHUNK)]
    if workers > 1 and len(chunks) > 1:
        layer.weights  # build the cache once, before threads share it
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(layer, chunks))
    else:
        parts = [layer(c) for c in chunks]
    return np.concatenate(parts) if parts else np.zeros((0, layer.m))


def forward(net, points, workers: int = 1) -> list[np.ndarray]:
    """Outputs after every layer, one (count, m_i) array per layer.

    Points are processed in fixed chunks, so results do not depend on
    ``workers``.
    """
    if isinstance(net, Layer):
        net = RandomNetwork((net,))
    x = np.atleast_2d(np.asarray(points, dtype=float))
    if x.shape[1] != net.input_dim:
        raise ValueError(f"network expects dimension {net.input_dim}, got {x.shape[1]}")
    outs = []
    for layer in net.layers:
        x = _apply(layer, x, workers)
        outs.append(x)
    return outs


def binary_hash(layer: Layer, points) -> np.ndarray:
    """Sign code in {-1, +1}^m: +1 where f((Mx)_i) > 0, -1 otherwise (including 0)."""
    if not layer.activation.semi_truncated:
        raise ValueError("hashing needs a semi-truncated activation underneath the sign")
    z = layer.activation(layer.preactivation(points))
    return np.where(z > 0, 1, -1).astype(np.int8)


def hamming_fraction(a, b) -> np.ndarray | float:
    """Fraction of disagreeing coordinates (last axis)."""
    a, b = np.asarray(a), np.asarray(b)
    frac = np.mean(a != b, axis=-1)
    return float(frac) if np.ndim(frac) == 0 else frac


def covering_growth_factor(omega: float, m: int) -> float:
    """1 + omega / sqrt(m): how much one layer can inflate a covering radius."""
    if omega < 0 or m < 1:
        raise ValueError("need omega >= 0 and m >= 1")
    return 1.0 + omega / math.sqrt(m)


def network_growth_factor(omegas, widths) -> float:
    """Product of per-layer growth factors."""
    out = 1.0
    for w, m in zip(omegas, widths):
        out *= covering_growth_factor(w, m)
    return out
