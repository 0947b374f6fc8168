"""Deterministic parameter initialization"""

import zlib

import numpy as np

from ..errors import ConfigError


def name_stream(seed: int, name: str) -> np.random.Generator:
    """Random generator keyed by a seed and a parameter name."""

    key = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([int(seed), key]))


def seeded_init(shape, fan_in: int, seed: int, name: str, dtype=np.float32) -> np.ndarray:
    """
    He-normal initial values, reproducible from (seed, name).

    Parameters
    ----------
    shape : tuple
        Shape of the parameter.
    fan_in : int
        Number of inputs of each output unit. Must be positive.
    seed : int
        Global seed.
    name : str
        Parameter name. Different names give independent streams.
    dtype : dtype, optional
        Output type, float32 by default.

    Returns
    -------
    ndarray
        Zero-mean normal values with standard deviation sqrt(2 / fan_in).
    """

    if fan_in <= 0:
        raise ConfigError(f"fan_in must be positive, got {fan_in} for {name}")

    rng = name_stream(seed, name)
    values = rng.standard_normal(size=shape) * np.sqrt(2.0 / fan_in)
    return values.astype(dtype)
