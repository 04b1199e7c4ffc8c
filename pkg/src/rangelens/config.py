"""TOML run configuration.

Sections: ``[model]``, ``[[network.layers]]``, ``[verify]`` and ``[report]``.
Relative file paths inside the config resolve against the config's folder.

Example::

    [model]
    kind = "gmm"        # gmm | sparse | cloud
    n = 50
    L = 4
    k = 3
    beta = 0.5
    seed = 0

    [[network.layers]]
    n = 50
    m = 2000
    activation = "relu"     # or { kind = "capped_relu", cap = 0.5 }
    seed = 1

    [verify]
    trials = 200
"""
from __future__ import annotations

import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import _rng
from .models import ModelSet, load_dictionary
from .netsim import RandomNetwork, make_layer


class ConfigError(ValueError):
    pass


def load_config(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    with open(path, "rb") as fh:
        try:
            cfg = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    cfg["_base"] = str(path.parent)
    return cfg


def _path(cfg, value) -> Path:
    p = Path(value)
    return p if p.is_absolute() else Path(cfg.get("_base", ".")) / p


def model_from_config(cfg: dict) -> ModelSet:
    sec = cfg.get("model")
    if sec is None:
        raise ConfigError("config has no [model] section")
    kind = sec.get("kind", "gmm")
    beta = float(sec.get("beta", 0.5))
    seed = int(sec.get("seed", 0))
    if kind == "gmm":
        return ModelSet.random_gmm(int(sec["n"]), int(sec["L"]), int(sec["k"]), seed=seed, beta=beta)
    if kind == "sparse":
        d = sec.get("dictionary", "identity")
        dictionary = np.eye(int(sec["n"])) if d == "identity" else load_dictionary(_path(cfg, d))
        return ModelSet.sparse(dictionary, int(sec["k"]), beta=beta)
    if kind == "cloud":
        from .report import load_cloud
        pts, labels = load_cloud(_path(cfg, sec["path"]))
        return ModelSet.cloud(pts, labels)
    raise ConfigError(f"unknown model kind {kind!r}")


def network_from_config(cfg: dict, seed: int = 0) -> RandomNetwork:
    """Layers from ``[[network.layers]]``; a missing layer seed is derived from ``seed``."""
    layers = cfg.get("network", {}).get("layers")
    if not layers:
        raise ConfigError("config has no [[network.layers]] entries")
    built = []
    for i, spec in enumerate(layers):
        try:
            n, m = int(spec["n"]), int(spec["m"])
        except KeyError as exc:
            raise ConfigError(f"network layer {i} is missing {exc}") from None
        s = spec.get("seed", _rng.derive_seed(seed, "stack", i))
        built.append(make_layer(n, m, spec.get("activation", "relu"), int(s),
                                bool(spec.get("renormalize", False))))
    return RandomNetwork(tuple(built))


def verification_config(cfg: dict | None, seed: int | None = None):
    from .verify import VerificationConfig
    sec = dict((cfg or {}).get("verify", {}))
    known = {f.name for f in fields(VerificationConfig)}
    unknown = set(sec) - known
    if unknown:
        raise ConfigError(f"unknown [verify] keys: {sorted(unknown)}")
    if seed is not None:
        sec["seed"] = seed
    for key in ("epsilons", "m_grid", "alphas"):
        if key in sec:
            sec[key] = tuple(sec[key])
    if "angle_bins" in sec:
        sec["angle_bins"] = tuple(tuple(b) for b in sec["angle_bins"])
    return VerificationConfig(**sec)


def report_section(cfg: dict | None) -> dict:
    return dict((cfg or {}).get("report", {}))
