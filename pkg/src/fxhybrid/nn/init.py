"""Seeded parameter initialisers."""
import numpy as np


def glorot_uniform(rng: np.random.Generator, shape) -> np.ndarray:
    fan_out, fan_in = shape
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)
