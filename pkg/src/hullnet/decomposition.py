"""Disjoint convex hull decompositions of two point sets.

:func:`estimate_decomposition` first peels the two classes apart along the
direction between their means, repeatedly, while the overlap keeps
shrinking. Whatever overlap remains is cut into runs along the best of many
random 1-D projections. Every part is separated from every part of the
other class by at least ``band`` along some direction, which makes the
result valid in the full space.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._config import separation_tol
from .geometry import as_points, hull_distance, shared_points


@dataclass
class Decomposition:
    """Part assignment for each class.

    ``assign_1[k]`` is the part id of ``points_1[k]``; ids run ``0..L1-1``.
    """

    points_1: np.ndarray
    points_2: np.ndarray
    assign_1: np.ndarray
    assign_2: np.ndarray
    seed: int = 0
    projections_used: int = 0
    peel_iterations: int = 0

    @property
    def L1(self):
        return int(self.assign_1.max()) + 1

    @property
    def L2(self):
        return int(self.assign_2.max()) + 1

    def part_indices_1(self):
        return [np.flatnonzero(self.assign_1 == i) for i in range(self.L1)]

    def part_indices_2(self):
        return [np.flatnonzero(self.assign_2 == j) for j in range(self.L2)]

    @property
    def parts_1(self):
        return [self.points_1[ix] for ix in self.part_indices_1()]

    @property
    def parts_2(self):
        return [self.points_2[ix] for ix in self.part_indices_2()]

    @classmethod
    def singletons(cls, X, Y):
        X, Y = as_points(X), as_points(Y)
        return cls(X, Y, np.arange(len(X)), np.arange(len(Y)))

    @classmethod
    def from_parts(cls, parts_1, parts_2):
        """Build from explicit lists of point arrays (one array per part)."""
        p1 = [as_points(p) for p in parts_1]
        p2 = [as_points(p) for p in parts_2]
        X = np.vstack(p1)
        Y = np.vstack(p2)
        a1 = np.concatenate([np.full(len(p), i) for i, p in enumerate(p1)])
        a2 = np.concatenate([np.full(len(p), j) for j, p in enumerate(p2)])
        return cls(X, Y, a1, a2)


@dataclass
class PeelResult:
    outside_1: np.ndarray
    outside_2: np.ndarray
    overlap_1: np.ndarray
    overlap_2: np.ndarray
    cx: float
    cy: float
    # boolean masks over the inputs, True where the point is in the overlap
    mask_1: np.ndarray = field(repr=False, default=None)
    mask_2: np.ndarray = field(repr=False, default=None)


def peel_overlap(X, Y, band=0.0):
    """Split both sets at the other class's extreme along the mean difference.

    Points of ``X`` projecting at least ``cy`` (the lowest ``Y`` projection)
    and points of ``Y`` projecting at most ``cx`` (the highest ``X``
    projection) form the overlap. ``band`` widens the overlap by that many
    units of distance, so anything left outside is separated from the
    other class by more than ``band``.
    """
    X, Y = as_points(X, "X"), as_points(Y, "Y")
    if len(X) == 0 or len(Y) == 0:
        raise ValueError("peel_overlap needs two nonempty sets")
    d = Y.mean(axis=0) - X.mean(axis=0)
    n = np.linalg.norm(d)
    if n == 0.0:
        raise ValueError("class means coincide; no projection direction")
    px, py = X @ d, Y @ d
    cx, cy = float(px.max()), float(py.min())
    m1 = px >= cy - band * n
    m2 = py <= cx + band * n
    return PeelResult(X[~m1], Y[~m2], X[m1], Y[m2], cx, cy, m1, m2)


def _sorted_labels(s1, s2):
    vals = np.concatenate([s1, s2])
    labs = np.concatenate([np.zeros(len(s1), int), np.ones(len(s2), int)])
    # stable sort keeps class-1 entries first among equal values
    order = np.argsort(vals, kind="stable")
    return vals[order], labs[order], order


def count_alternations(scalars_1, scalars_2):
    """Number of class changes along the merged, sorted sequence."""
    _, labs, _ = _sorted_labels(np.asarray(scalars_1, float), np.asarray(scalars_2, float))
    return int(np.count_nonzero(labs[1:] != labs[:-1]))


def _runs(s1, s2):
    vals, labs, order = _sorted_labels(s1, s2)
    change = labs[1:] != labs[:-1]
    run = np.concatenate([[0], np.cumsum(change)])
    gap = float(np.min(np.diff(vals)[change])) if change.any() else np.inf
    # number runs per class: 0, 1, ... in order of appearance
    ids = np.empty(len(vals), int)
    for c in (0, 1):
        sel = labs == c
        _, ids[sel] = np.unique(run[sel], return_inverse=True)
    out = np.empty(len(vals), int)
    out[order] = ids
    return out[:len(s1)], out[len(s1):], gap


def decompose_1d(scalars_1, scalars_2):
    """Decompose 1-D values into maximal same-class runs."""
    s1 = np.asarray(scalars_1, float).ravel()
    s2 = np.asarray(scalars_2, float).ravel()
    a1, a2, _ = _runs(s1, s2)
    return Decomposition(s1[:, None], s2[:, None], a1, a2)


def _best_projection(R1, R2, n_projections, rng, band):
    """Random unit direction minimising the part counts; None if none is usable."""
    dim = R1.shape[1]
    U = rng.standard_normal((dim, n_projections))
    U /= np.linalg.norm(U, axis=0)
    P1, P2 = R1 @ U, R2 @ U
    vals = np.vstack([P1, P2])
    labs = np.concatenate([np.zeros(len(R1), int), np.ones(len(R2), int)])
    order = np.argsort(vals, axis=0, kind="stable")
    sv = np.take_along_axis(vals, order, axis=0)
    sl = labs[order]
    change = sl[1:] != sl[:-1]
    k = change.sum(axis=0)
    gaps = np.where(change, np.diff(sv, axis=0), np.inf).min(axis=0)
    first = sl[0]
    # runs alternate, so class counts follow from the change count and start
    runs = k + 1
    l1 = np.where(first == 0, (runs + 1) // 2, runs // 2)
    l2 = runs - l1
    valid = gaps > band
    if not valid.any():
        return None
    key = np.lexsort((np.arange(n_projections), l1 + l2, np.maximum(l1, l2)))
    best = key[valid[key]][0]
    return U[:, best]


def estimate_decomposition(X, Y, n_projections=None, seed=0, tol=None):
    """Estimate a disjoint convex hull decomposition of two disjoint sets.

    Parameters
    ----------
    X, Y : array, shape (n_x, dim), (n_y, dim)
        The two classes; they must not share a point.
    n_projections : int, optional
        Random directions tried on the residual overlap. Defaults to
        ``max(200, 2 * dim)``. With 0, residual points become singletons.
    seed : int
        Seed for the random directions.
    tol : float, optional
        Separation tolerance; parts are kept at least ``10 * tol`` apart.
    """
    X, Y = as_points(X, "X"), as_points(Y, "Y")
    if len(X) == 0 or len(Y) == 0:
        raise ValueError("both classes must be nonempty")
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    if shared_points(X, Y):
        raise ValueError("the two classes share a point")
    if n_projections is None:
        n_projections = max(200, 2 * X.shape[1])
    if tol is None:
        tol = separation_tol(X, Y)
    band = 10.0 * tol

    a1 = np.full(len(X), -1)
    a2 = np.full(len(Y), -1)
    next1 = next2 = 0
    idx1, idx2 = np.arange(len(X)), np.arange(len(Y))
    peels = 0
    while len(idx1) and len(idx2):
        try:
            res = peel_overlap(X[idx1], Y[idx2], band)
        except ValueError:
            break
        if res.mask_1.sum() + res.mask_2.sum() >= len(idx1) + len(idx2):
            break
        peels += 1
        if (~res.mask_1).any():
            a1[idx1[~res.mask_1]] = next1
            next1 += 1
        if (~res.mask_2).any():
            a2[idx2[~res.mask_2]] = next2
            next2 += 1
        idx1, idx2 = idx1[res.mask_1], idx2[res.mask_2]
    assert peels <= len(X) + len(Y)

    used = 0
    if len(idx1) and not len(idx2):
        a1[idx1] = next1
    elif len(idx2) and not len(idx1):
        a2[idx2] = next2
    elif len(idx1) and len(idx2):
        rng = np.random.default_rng(seed)
        u = None
        if n_projections > 0:
            u = _best_projection(X[idx1], Y[idx2], n_projections, rng, band)
            used = n_projections
        if u is None:
            a1[idx1] = next1 + np.arange(len(idx1))
            a2[idx2] = next2 + np.arange(len(idx2))
        else:
            r1, r2, _ = _runs(X[idx1] @ u, Y[idx2] @ u)
            a1[idx1] = next1 + r1
            a2[idx2] = next2 + r2
    return Decomposition(X, Y, a1, a2, seed, used, peels)


@dataclass
class ValidationReport:
    valid: bool
    min_distance: float
    distances: np.ndarray  # (L1, L2) hull distances between parts
    offending: list  # (i, j) pairs whose hulls are within tol

    def __bool__(self):
        return self.valid


def validate_decomposition(D, tol=None, n_jobs=1):
    """Check every cross-class pair of parts for strictly separated hulls."""
    if tol is None:
        tol = separation_tol(D.points_1, D.points_2)
    p1, p2 = D.parts_1, D.parts_2
    pairs = [(i, j) for i in range(len(p1)) for j in range(len(p2))]

    def dist(ij):
        return hull_distance(p1[ij[0]], p2[ij[1]]).distance

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as ex:
            vals = list(ex.map(dist, pairs))
    else:
        vals = [dist(ij) for ij in pairs]
    dists = np.asarray(vals).reshape(len(p1), len(p2))
    bad = [ij for ij, d in zip(pairs, vals) if d <= tol]
    return ValidationReport(not bad, float(dists.min()), dists, bad)
