"""Closed-form kernel: the G+/G- sandwich functions and binary entropy.

The pair (G-, G+) sandwiches the detection probability of one normalised
state given the observed detection probability y of a nearby state and a
lower bound z on their overlap:

    g+-(y, z) = y + (1 - z^2)(1 - 2y) +- 2z*sqrt((1 - z^2) y (1 - y))
    G+(y, z)  = g+(y, z) if y < z^2    else 1
    G-(y, z)  = g-(y, z) if y > 1-z^2  else 0

All functions accept floats or numpy arrays and are pure.
"""

from __future__ import annotations

import numpy as np

#: Inputs within this distance outside [0, 1] are clamped; anything further
#: out is treated as a caller bug and rejected.
CLAMP_TOL = 1e-9


def as_unit(value, tol: float = CLAMP_TOL):
    """Clamp ``value`` into [0, 1], rejecting violations larger than ``tol``."""
    v = np.asarray(value, dtype=float)
    if np.any(v < -tol) or np.any(v > 1.0 + tol):
        raise ValueError(f"value outside [0, 1] beyond tolerance {tol}: {value!r}")
    clamped = np.clip(v, 0.0, 1.0)
    return float(clamped) if np.ndim(value) == 0 else clamped


def g_pm(y, z, sign: int = +1):
    """Raw g+-(y, z); ``sign`` selects +1 or -1 for the square-root term."""
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    y = as_unit(y)
    z = as_unit(z)
    w = 1.0 - z * z
    root = np.sqrt(np.maximum(w * y * (1.0 - y), 0.0))
    out = y + w * (1.0 - 2.0 * y) + sign * 2.0 * z * root
    return float(out) if np.ndim(out) == 0 else out


def G_plus(y, z):
    """Upper sandwich: g+(y, z) when y < z^2, otherwise 1."""
    y = as_unit(y)
    z = as_unit(z)
    out = np.where(y < z * z, g_pm(y, z, +1), 1.0)
    out = np.clip(out, 0.0, 1.0)
    return float(out) if np.ndim(out) == 0 else out


def G_minus(y, z):
    """Lower sandwich: g-(y, z) when y > 1 - z^2, otherwise 0."""
    y = as_unit(y)
    z = as_unit(z)
    out = np.where(y > 1.0 - z * z, g_pm(y, z, -1), 0.0)
    out = np.clip(out, 0.0, 1.0)
    return float(out) if np.ndim(out) == 0 else out


def binary_entropy(x):
    """h(x) = -x log2 x - (1-x) log2(1-x), with h(0) = h(1) = 0."""
    x = as_unit(x)
    xa = np.asarray(x, dtype=float)
    interior = (xa > 0.0) & (xa < 1.0)
    # short-circuit the endpoints to avoid 0*log(0)
    safe = np.where(interior, xa, 0.5)
    out = np.where(
        interior,
        -safe * np.log2(safe) - (1.0 - safe) * np.log2(1.0 - safe),
        0.0,
    )
    return float(out) if np.ndim(x) == 0 else out
