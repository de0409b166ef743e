"""Numerical tolerances shared across the package."""
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Tolerances:
    # relative threshold for "strictly separated": distance > rel_sep * (1 + scale)
    rel_sep: float = 1e-9
    # min-norm-point duality gap, relative to the squared current distance
    mnp_rel_gap: float = 1e-7
    mnp_max_iter: int = 10_000
    # construction slack on the activation margin (delta and ratio)
    slack: float = 0.1
    # default pre-activation gap imposed when the activation needs none
    base_delta: float = 1.0


DEFAULT = Tolerances()


def data_scale(*arrays):
    """Largest absolute coordinate over the given point arrays."""
    m = 0.0
    for a in arrays:
        a = np.asarray(a, dtype=float)
        if a.size:
            m = max(m, float(np.max(np.abs(a))))
    return m


def separation_tol(*arrays, tol=DEFAULT):
    return tol.rel_sep * (1.0 + data_scale(*arrays))
