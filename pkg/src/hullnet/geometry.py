"""Convex geometry over finite point sets.

Point sets are plain ``(n_points, dim)`` float arrays. The workhorse is
:func:`hull_distance`, Wolfe's minimum-norm-point method on the Minkowski
difference of the two hulls. Each step needs only inner products with the
data, so it handles thousands of high-dimensional points without forming
the difference set.
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from ._config import DEFAULT, separation_tol


class NotSeparableError(ValueError):
    """Raised when two hulls are not strictly separated."""


def as_points(A, name="points"):
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A.reshape(1, -1)
    if A.ndim != 2:
        raise ValueError(f"{name} must be a 2-D array of points, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains non-finite coordinates")
    return A


def _pair(A, B):
    A = as_points(A, "A")
    B = as_points(B, "B")
    if len(A) == 0 or len(B) == 0:
        raise ValueError("hull operands must be nonempty")
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    return A, B


@dataclass
class HullDistanceResult:
    """Outcome of :func:`hull_distance`.

    ``distance`` is the norm of the current witness difference, an upper
    bound on the true distance; ``lower_bound`` is the certified gap along
    the witness direction. At convergence both agree up to the requested
    relative duality gap.
    """

    distance: float
    witness_a: np.ndarray
    witness_b: np.ndarray
    weights_a: np.ndarray
    weights_b: np.ndarray
    converged: bool
    iterations: int
    lower_bound: float


class _Corral:
    """Support pairs of the Minkowski difference with a Cholesky factor.

    Keeps ``R`` lower triangular with ``R @ R.T = Q @ Q.T + 1``; the affine
    minimum-norm coefficients are then ``M^-1 1`` normalised to sum one.
    """

    def __init__(self, q, pair):
        self.Q = q[None, :].copy()
        self.pairs = [pair]
        self.G = np.array([[q @ q]])
        self.R = np.sqrt(self.G + 1.0)

    def __len__(self):
        return len(self.pairs)

    def add(self, q, pair):
        g = self.Q @ q
        r = solve_triangular(self.R, g + 1.0, lower=True, check_finite=False)
        c = q @ q + 1.0 - r @ r
        if c <= 1e-12 * (q @ q + 1.0):
            return False
        k = len(self.pairs)
        R = np.zeros((k + 1, k + 1))
        R[:k, :k] = self.R
        R[k, :k] = r
        R[k, k] = np.sqrt(c)
        self.R = R
        G = np.empty((k + 1, k + 1))
        G[:k, :k] = self.G
        G[k, :k] = G[:k, k] = g
        G[k, k] = q @ q
        self.G = G
        self.Q = np.vstack([self.Q, q])
        self.pairs.append(pair)
        return True

    def keep(self, mask):
        self.Q = self.Q[mask]
        self.pairs = [p for p, k in zip(self.pairs, mask) if k]
        self.G = self.G[np.ix_(mask, mask)]
        self.R = np.linalg.cholesky(self.G + 1.0)

    def affine_min_norm(self):
        ones = np.ones(len(self.pairs))
        mu = cho_solve((self.R, True), ones, check_finite=False)
        return mu / mu.sum()


def hull_distance(A, B, tol=None, max_iter=None, atol=None, decide=None):
    """Euclidean distance between the convex hulls of two point sets.

    Runs Wolfe's minimum-norm-point iteration on the Minkowski difference
    ``C(A) - C(B)``. Each step queries one support pair ``(a_s, b_t)`` and
    re-solves the affine minimum-norm problem on the current corral, dropping
    corral points whose weights would turn negative.

    Parameters
    ----------
    A, B : array, shape (n_a, dim), (n_b, dim)
        Nonempty point sets of equal dimension.
    tol : float, optional
        Stop when the duality gap falls below ``tol`` times the squared
        current distance. Defaults to 1e-7.
    max_iter : int, optional
        Cap on support queries (default 10,000). Hitting it is reported
        through ``converged=False``; the best iterate is still returned.
    atol : float, optional
        Absolute distance below which the hulls count as touching and the
        search stops. Defaults to 1e-12 times the data scale.
    decide : float, optional
        Predicate mode. Stop as soon as the hulls are certified farther apart
        than ``decide`` or found within ``decide`` of each other.

    Returns
    -------
    HullDistanceResult
    """
    A, B = _pair(A, B)
    return _min_norm_point(A, B, tol, max_iter, atol, decide)


def _min_norm_point(A, B, tol=None, max_iter=None, atol=None, decide=None):
    tol = DEFAULT.mnp_rel_gap if tol is None else tol
    max_iter = DEFAULT.mnp_max_iter if max_iter is None else max_iter
    if tol <= 0:
        raise ValueError("tol must be positive")
    if atol is None:
        atol = 1e-12 * (1.0 + max(np.abs(A).max(), np.abs(B).max()))

    if len(A) == 1 and len(B) == 1:
        p = A[0] - B[0]
        dist = float(np.linalg.norm(p))
        return HullDistanceResult(dist, A[0].copy(), B[0].copy(), np.ones(1), np.ones(1),
                                  True, 0, dist)

    d0 = A.mean(axis=0) - B.mean(axis=0)
    i0, j0 = int(np.argmin(A @ d0)), int(np.argmax(B @ d0))
    corral = _Corral(A[i0] - B[j0], (i0, j0))
    lam = np.ones(1)
    x = corral.Q[0].copy()

    converged = False
    it = 0
    while True:
        sA, sB = A @ x, B @ x
        s, t = int(np.argmin(sA)), int(np.argmax(sB))
        xx = float(x @ x)
        norm = np.sqrt(xx)
        if norm <= atol or xx - (sA[s] - sB[t]) <= tol * xx:
            converged = True
            break
        if decide is not None:
            if norm <= decide or (sA[s] - sB[t]) / norm > decide:
                converged = True
                break
        if it >= max_iter:
            break
        it += 1
        if (s, t) in corral.pairs or not corral.add(A[s] - B[t], (s, t)):
            # the support point adds nothing new: optimal up to rounding
            converged = True
            break
        lam = np.append(lam, 0.0)
        while True:
            mu = corral.affine_min_norm()
            if np.all(mu > 1e-14):
                lam = mu
                break
            neg = mu <= 1e-14
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(neg, lam / (lam - mu), np.inf)
            theta = min(1.0, float(np.min(ratios)))
            lam = lam + theta * (mu - lam)
            mask = lam > 1e-14
            mask[np.argmax(lam)] = True
            corral.keep(mask)
            lam = lam[mask] / lam[mask].sum()
        x = lam @ corral.Q

    pairs = corral.pairs
    alpha = np.zeros(len(A))
    beta = np.zeros(len(B))
    for (i, j), l in zip(pairs, lam):
        alpha[i] += l
        beta[j] += l
    wa = alpha @ A
    wb = beta @ B
    p = wa - wb
    dist = float(np.linalg.norm(p))
    if dist > 0:
        lb = max(0.0, float((A @ p).min() - (B @ p).max()) / dist)
    else:
        lb = 0.0
    return HullDistanceResult(dist, wa, wb, alpha, beta, converged, it, lb)


@dataclass(frozen=True)
class SeparatorPlane:
    """Affine functional ``w @ x + b``; the first set lies on the negative side."""

    w: np.ndarray
    b: float
    margin: float

    def __call__(self, X):
        return np.asarray(X, dtype=float) @ self.w + self.b


def max_margin_separator(A, B, tol=None):
    """Maximum-margin hyperplane with ``A`` strictly negative and ``B`` positive.

    The normal is the unit witness direction from :func:`hull_distance`. The
    offset is placed midway between the extreme projections of the data, so
    the returned margin is the certified gap along that normal.
    """
    A, B = _pair(A, B)
    scale = max(np.abs(A).max(), np.abs(B).max())
    if tol is None:
        tol = DEFAULT.rel_sep * (1.0 + scale)
    res = _min_norm_point(A, B, atol=1e-12 * (1.0 + scale))
    diff = res.witness_b - res.witness_a
    n = np.linalg.norm(diff)
    if n == 0.0 or res.lower_bound <= tol:
        raise NotSeparableError(
            f"hulls not separated (distance {res.distance:.3e}, tol {tol:.3e})")
    w = diff / n
    hi_a = float((A @ w).max())
    lo_b = float((B @ w).min())
    gap = lo_b - hi_a
    if gap <= tol:
        raise NotSeparableError(f"separating gap {gap:.3e} not above tol {tol:.3e}")
    return SeparatorPlane(w, -0.5 * (hi_a + lo_b), gap)


def point_in_hull(p, A, tol=None):
    p = np.asarray(p, dtype=float).reshape(1, -1)
    A = as_points(A, "A")
    if p.shape[1] != A.shape[1]:
        raise ValueError(f"dimension mismatch: {p.shape[1]} vs {A.shape[1]}")
    if tol is None:
        tol = separation_tol(p, A)
    res = hull_distance(p, A, decide=tol)
    if res.lower_bound > tol:
        return False
    return res.distance <= tol


class Separability(str, Enum):
    LINEAR = "linearly_separable"
    CONVEX = "convexly_separable"
    CANDIDATE_INSEPARABLE = "convexly_inseparable_candidate"


def shared_points(A, B):
    """Indices into ``A`` of points that also occur in ``B``."""
    A, B = _pair(A, B)
    common = {tuple(row) for row in A} & {tuple(row) for row in B}
    return [i for i, row in enumerate(A) if tuple(row) in common]


def separability_class(A, B, tol=None):
    A, B = _pair(A, B)
    if shared_points(A, B):
        raise ValueError("the two sets share a point")
    if tol is None:
        tol = separation_tol(A, B)
    res = hull_distance(A, B, decide=tol)
    if res.lower_bound > tol:
        return Separability.LINEAR
    if not any(point_in_hull(b, A, tol) for b in B):
        return Separability.CONVEX
    if not any(point_in_hull(a, B, tol) for a in A):
        return Separability.CONVEX
    return Separability.CANDIDATE_INSEPARABLE


def project_1d(A, direction):
    A = as_points(A, "A")
    direction = np.asarray(direction, dtype=float).ravel()
    if direction.shape[0] != A.shape[1]:
        raise ValueError(f"dimension mismatch: {direction.shape[0]} vs {A.shape[1]}")
    if not np.any(direction):
        raise ValueError("projection direction is zero")
    return A @ direction


def diameter(A, chunk=2048):
    """Largest pairwise Euclidean distance, by a blocked exact scan."""
    A = as_points(A, "A")
    if len(A) == 0:
        raise ValueError("diameter of an empty set")
    sq = np.einsum("ij,ij->i", A, A)
    best, pair = -1.0, (0, 0)
    for start in range(0, len(A), chunk):
        blk = A[start:start + chunk]
        d2 = sq[start:start + chunk, None] + sq[None, :] - 2.0 * blk @ A.T
        k = int(np.argmax(d2))
        if d2.flat[k] > best:
            best = float(d2.flat[k])
            pair = (start + k // len(A), k % len(A))
    return float(np.linalg.norm(A[pair[0]] - A[pair[1]]))
