#!/usr/bin/env python3
"""Walk a few input angles through a stack of random ReLU layers.

Compares Monte Carlo output angles with the iterated expected angle map.
Small n and m keep this under a few seconds.
"""
import numpy as np

from rangelens import angle_map, make_layer
from rangelens.verify import controlled_pair

n, m, depth = 50, 4000, 6
thetas = np.array([0.2, np.pi / 4, np.pi / 2, 3 * np.pi / 4, np.pi])

rng = np.random.default_rng(0)
pairs = [controlled_pair(rng, n, t) for t in thetas]
x = np.stack([p[0] for p in pairs])
y = np.stack([p[1] for p in pairs])

print("depth " + " ".join(f"{t:>13.3f}" for t in thetas))
for q in range(1, depth + 1):
    layer = make_layer(n if q == 1 else m, m, seed=q)
    x, y = layer(x), layer(y)
    cos = np.sum(x * y, axis=1) / (np.linalg.norm(x, axis=1) * np.linalg.norm(y, axis=1))
    emp = np.arccos(np.clip(cos, -1, 1))
    pred = angle_map(thetas, q)
    print(f"{q:5d} " + " ".join(f"{a:6.3f}/{b:6.3f}" for a, b in zip(emp, pred)))

# each cell: empirical / expected; large angles shrink fast, small ones barely move
