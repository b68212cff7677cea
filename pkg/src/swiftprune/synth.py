"""Deterministic synthetic fixtures for benchmarks, calibration and tests."""

from __future__ import annotations

import numpy as np

from swiftprune.errors import ConfigError, DimensionError

FAMILIES = ("gaussian", "heavy-tail", "constant")


def synth_fixture(rows: int, cols: int, seed: int, family: str = "gaussian",
                  dtype: str = "f64") -> tuple[np.ndarray, np.ndarray]:
    """Generate (weights, calibration) deterministically from the seed.

    gaussian:   i.i.d. standard normal weights and activations
    heavy-tail: Student-t (df=2) weights, lognormal activations - wide score
                spread, occasional dominant columns
    constant:   each row holds one repeated value and the calibration vector
                is flat, so every score stream sits at the EWMA fixed point
                (dev never leaves zero) and nothing is ever pruned
    """
    if rows < 1 or cols < 1:
        raise DimensionError(f"fixture shape must be positive, got {rows}x{cols}")
    if family not in FAMILIES:
        raise ConfigError(f"family must be one of {FAMILIES}, got {family!r}")
    if dtype not in ("f32", "f64"):
        raise ConfigError(f"dtype must be f32 or f64, got {dtype!r}")
    rng = np.random.default_rng(seed)
    if family == "gaussian":
        w = rng.normal(size=(rows, cols))
        x = rng.normal(size=cols)
    elif family == "heavy-tail":
        w = rng.standard_t(df=2, size=(rows, cols))
        x = rng.lognormal(mean=0.0, sigma=0.75, size=cols)
    else:  # constant
        levels = rng.normal(loc=1.0, scale=0.25, size=(rows, 1))
        w = np.broadcast_to(levels, (rows, cols)).copy()
        x = np.full(cols, float(np.abs(rng.normal(loc=1.0, scale=0.25)) + 0.5))
    # keep S strictly positive even for adversarial seeds
    x[np.abs(x) < 1e-8] = 1e-8
    out_dtype = np.float32 if dtype == "f32" else np.float64
    return w.astype(out_dtype), x.astype(out_dtype)
