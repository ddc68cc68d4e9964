"""Seeded sampling primitives. All randomness flows from one numpy Generator."""
from __future__ import annotations

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def normal(rng: np.random.Generator, shape, sigma: float = 1.0) -> np.ndarray:
    """N(0, sigma^2) draws via the Box-Muller transform."""
    shape = tuple(np.atleast_1d(shape)) if not isinstance(shape, tuple) else shape
    n = int(np.prod(shape, dtype=np.int64))
    half = (n + 1) // 2
    u1 = 1.0 - rng.random(half)  # (0, 1]
    u2 = rng.random(half)
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])[:n]
    return sigma * z.reshape(shape)


def cauchy(rng: np.random.Generator, shape, scale: float = 1.0) -> np.ndarray:
    """Cauchy(0, scale) draws by inverse CDF."""
    u = rng.random(shape)
    return scale * np.tan(np.pi * (u - 0.5))
