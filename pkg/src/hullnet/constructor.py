"""Explicit two-hidden-layer networks that linearly separate two point sets.

Given a disjoint convex hull decomposition with ``L1`` and ``L2`` parts, the
first layer holds one calibrated classifier per part pair ``(i, j)``; row
``i * L2 + j`` sits at ``x0`` on part ``i`` of class 1 and at least
``x0 + delta`` on part ``j`` of class 2. After the activation, each class-1
part lands in a small cube on its block while every class-2 image leaves
that cube, so the second layer (``L1`` rows) can put all class-2 images on
the low side of each class-1 part. A final hyperplane separates the two
images.

Pre-activation bounds are enforced with an explicit floating-point
rounding allowance, so the inequalities hold however the dot products are
summed.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._config import DEFAULT
from .activation import (
    ActivationSpec,
    CertificateError,
    MarginCertificate,
    above_asymptote,
    evaluate,
    min_delta,
    solve_x0,
)
from .decomposition import Decomposition
from .geometry import (
    NotSeparableError,
    SeparatorPlane,
    as_points,
    hull_distance,
    max_margin_separator,
)

SCHEMA_VERSION = 1
_EPS = np.finfo(float).eps


class ConstructionError(RuntimeError):
    pass


@dataclass(frozen=True)
class LayerAffine:
    weights: np.ndarray  # (out_dim, in_dim)
    biases: np.ndarray  # (out_dim,)

    def __post_init__(self):
        if self.weights.ndim != 2 or self.biases.shape != (self.weights.shape[0],):
            raise ValueError("weights must be (out, in) and biases (out,)")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.biases))):
            raise ValueError("layer has non-finite entries")

    @property
    def out_dim(self):
        return self.weights.shape[0]

    @property
    def in_dim(self):
        return self.weights.shape[1]

    def preact(self, X):
        return as_points(X) @ self.weights.T + self.biases


def _rounding_bound(X, w, b):
    """Worst-case error of ``X @ w + b`` under any summation order."""
    n = len(w) + 2
    return n * _EPS * (np.abs(X) @ np.abs(w) + abs(b))


def _group_reduce(P, groups, n_groups, ufunc):
    """Row-wise ``ufunc`` reduction of ``P`` within each group label."""
    order = np.argsort(groups, kind="stable")
    counts = np.bincount(groups, minlength=n_groups)
    if np.any(counts == 0):
        raise ValueError("every group needs at least one point")
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    return ufunc.reduceat(P[order], starts, axis=0)


def calibrate_rows(W, b, XA, ga, XB, gb, row_a, row_b, x0, delta):
    """Calibrate many planes at once.

    Row ``r`` of ``(W, b)`` must separate the points of ``XA`` labelled
    ``row_a[r]`` in ``ga`` (low side) from the points of ``XB`` labelled
    ``row_b[r]`` in ``gb``. Each row is rescaled and shifted so its maximum
    over the low set is at most ``x0`` and its minimum over the high set is
    at least ``x0 + delta``, with an explicit rounding allowance.
    """
    W = np.array(W, dtype=float, ndmin=2)
    b = np.array(b, dtype=float, ndmin=1)
    XA, XB = as_points(XA, "A"), as_points(XB, "B")
    if delta <= 0:
        raise ValueError("delta must be positive")
    ga, gb = np.asarray(ga, int), np.asarray(gb, int)
    row_a, row_b = np.asarray(row_a, int), np.asarray(row_b, int)
    cols = np.arange(len(W))
    nA, nB = int(ga.max()) + 1, int(gb.max()) + 1
    n = W.shape[1] + 2
    # |X| @ |w| scales with w, so it is computed once and rescaled
    SA = _group_reduce(np.abs(XA) @ np.abs(W).T, ga, nA, np.maximum)[row_a, cols]
    SB = np.abs(XB) @ np.abs(W).T
    scale = np.ones(len(W))
    base_pad = 16 * _EPS * (1.0 + abs(x0) + delta)

    def levels():
        eA = n * _EPS * (scale * SA + np.abs(b))
        eB = n * _EPS * (scale * SB + np.abs(b))
        hi = _group_reduce(XA @ W.T + b, ga, nA, np.maximum)[row_a, cols] + eA
        lo = _group_reduce(XB @ W.T + b - eB, gb, nB, np.minimum)[row_b, cols]
        eBmax = _group_reduce(eB, gb, nB, np.maximum)[row_b, cols]
        return hi, lo, eA, eBmax

    for _ in range(8):
        hi, lo, eA, eB = levels()
        gap = lo - hi
        if np.any(gap <= 0):
            r = int(np.argmin(gap))
            raise NotSeparableError(f"plane {r} does not separate (gap {gap[r]:.3e})")
        tight = 1e-9 * (1 + abs(x0) + delta) + 4 * eA
        todo = ~((hi <= x0) & (lo >= x0 + delta) & (x0 - hi <= tight))
        if not todo.any():
            return W, b
        # the rounding allowance after rescaling is roughly k times today's;
        # aim that far inside both levels so rounding cannot cross them
        k = delta / gap
        pad = base_pad + 4 * k * np.maximum(eA, eB)
        k = np.where(todo, (delta + 2 * pad) / gap, 1.0)
        W = W * k[:, None]
        b = np.where(todo, k * b + (x0 - pad - k * hi), b)
        scale *= k
    hi, lo, _, _ = levels()
    if np.any(hi > x0) or np.any(lo < x0 + delta):
        raise ConstructionError("calibration did not settle")
    return W, b


def calibrate_plane(p, A, B, x0, delta):
    """Rescale and shift a separating plane onto the certificate levels.

    Returns a plane whose functional never exceeds ``x0`` over ``A`` (and
    reaches it up to rounding whenever the affine fix settles) and is at
    least ``x0 + delta`` on every point of ``B``.
    """
    A, B = as_points(A, "A"), as_points(B, "B")
    W, b = calibrate_rows(np.asarray(p.w, float)[None, :], [float(p.b)],
                          A, np.zeros(len(A), int), B, np.zeros(len(B), int),
                          [0], [0], x0, delta)
    return SeparatorPlane(W[0], float(b[0]), p.margin)


def forward_images(layer, a, X):
    X = as_points(X)
    if len(X) == 0:
        return np.zeros((0, layer.out_dim))
    if X.shape[1] != layer.in_dim:
        raise ValueError(f"dimension mismatch: {X.shape[1]} vs layer input {layer.in_dim}")
    return np.asarray(evaluate(a, layer.preact(X)))


def pair_planes(D, n_jobs=1):
    """Raw max-margin planes for every part pair, keyed ``(i, j)``."""
    p1, p2 = D.parts_1, D.parts_2
    keys = [(i, j) for i in range(len(p1)) for j in range(len(p2))]

    def one(ij):
        try:
            return max_margin_separator(p1[ij[0]], p2[ij[1]])
        except NotSeparableError as exc:
            raise ConstructionError(f"parts {ij} are not separable: {exc}") from exc

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as ex:
            vals = list(ex.map(one, keys))
    else:
        vals = [one(k) for k in keys]
    return dict(zip(keys, vals))


def _stack(planes):
    return LayerAffine(np.vstack([p.w for p in planes]), np.array([p.b for p in planes]))


def required_delta(a, L, slack, D=None, base=None):
    """Pre-activation gap to impose for ``L`` parts, with slack."""
    base = DEFAULT.base_delta if base is None else base
    return max(base, (1 + slack) * min_delta(a, L / (1 - slack), D))


def _certificate(a, L, slack, D=None, base=None):
    delta = required_delta(a, L, slack, D, base)
    return solve_x0(a, delta, L, slack, D)


def _leaky_certificate(a, L, delta, depth, slack):
    """Certificate at a fixed gap; may fail to hold when ``depth`` is large."""
    try:
        return solve_x0(a, delta, L, slack, depth)
    except CertificateError:
        ratio = a.c1 * depth / (delta * a.c2 + a.c1 * depth)
        return MarginCertificate(0.0, delta, a.c1 * depth, L, ratio, depth)


def build_first_layer(D, a, cert, planes=None):
    """Row ``i * L2 + j`` calibrates the plane between part i (class 1) and part j (class 2)."""
    if planes is None:
        planes = pair_planes(D)
    L1, L2 = D.L1, D.L2
    keys = [(i, j) for i in range(L1) for j in range(L2)]
    W = np.vstack([planes[k].w for k in keys])
    b = np.array([planes[k].b for k in keys])
    row_a = np.repeat(np.arange(L1), L2)
    row_b = np.tile(np.arange(L2), L1)
    W, b = calibrate_rows(W, b, D.points_1, D.assign_1, D.points_2, D.assign_2,
                          row_a, row_b, cert.x0, cert.delta)
    return LayerAffine(W, b)


def _block_plane(i, L2, width):
    """Minus the sum of block ``i``: low on class 2, high on part i of class 1."""
    w = np.zeros(width)
    w[i * L2:(i + 1) * L2] = -1.0
    return SeparatorPlane(w, 0.0, 0.0)


def _span_coords(Z):
    """Coordinates of the rows of ``Z`` in an orthonormal basis of their affine hull.

    Returns ``(Y, m, Q)`` with ``Y = (Z - m) @ Q``; ``Q`` is None (and ``Y``
    is ``Z``) when the points already outnumber the dimensions. Hull
    distances are invariant under this change of coordinates, so the
    separators can be found in the smaller space and lifted back.
    """
    if len(Z) >= Z.shape[1]:
        return Z, None, None
    m = Z.mean(axis=0)
    Q, _ = np.linalg.qr((Z - m).T)
    return (Z - m) @ Q, m, Q


def _lift(p, m, Q):
    if Q is None:
        return p
    w = Q @ p.w
    return SeparatorPlane(w, p.b - float(w @ m), p.margin)


def build_second_layer(Z1_parts, Z2, a, cert, L2=None):
    """One row per class-1 part, with ``Z2`` on the low (``x0``) side."""
    Z2 = as_points(Z2)
    Y, m, Q = _span_coords(np.vstack([Z2] + list(Z1_parts)))
    ends = np.cumsum([len(Z2)] + [len(Zi) for Zi in Z1_parts])
    Y2 = Y[:ends[0]]
    planes = []
    for i in range(len(Z1_parts)):
        try:
            p = _lift(max_margin_separator(Y2, Y[ends[i]:ends[i + 1]]), m, Q)
        except NotSeparableError:
            if L2 is None:
                raise ConstructionError(f"class-2 images meet part {i} after layer 1")
            p = _block_plane(i, L2, Z2.shape[1])
        planes.append(p)
    L1 = len(Z1_parts)
    groups = np.repeat(np.arange(L1), [len(Zi) for Zi in Z1_parts])
    try:
        W, b = calibrate_rows(
            np.vstack([p.w for p in planes]), np.array([p.b for p in planes]),
            Z2, np.zeros(len(Z2), int), np.vstack(Z1_parts), groups,
            np.zeros(L1, int), np.arange(L1), cert.x0, cert.delta)
    except NotSeparableError as exc:
        raise ConstructionError(f"class-2 images meet a class-1 part after layer 1: {exc}") from exc
    return LayerAffine(W, b)


def build_joint_second_layer(Z1, Z2, cert, rows):
    """``rows`` copies of one calibrated plane putting all of ``Z2`` below all of ``Z1``.

    Used when the per-part rows leave final images that no hyperplane
    separates, which can happen for the leaky ReLU. It needs the first-layer
    images of the two whole classes to be linearly separable.
    """
    Z1, Z2 = as_points(Z1), as_points(Z2)
    Y, m, Q = _span_coords(np.vstack([Z2, Z1]))
    try:
        p = _lift(max_margin_separator(Y[:len(Z2)], Y[len(Z2):]), m, Q)
    except NotSeparableError as exc:
        raise ConstructionError(f"first-layer images are not linearly separable: {exc}") from exc
    p = calibrate_plane(p, Z2, Z1, cert.x0, cert.delta)
    return _stack([p] * rows)


def _threshold(a, cert):
    """Output threshold on the coordinate sum, between the two image bounds."""
    L = cert.L
    if a.kind == "leaky_relu":
        low = 0.0
        high = evaluate(a, cert.delta) - (L - 1) * cert.epsilon
    else:
        low = L * cert.epsilon
        high = above_asymptote(a, cert.x0 + cert.delta)
        shift = L * a.asymptote
        low, high = low + shift, high + shift
    return low, high


def output_plane(Z_final_1, Z_final_2, a, cert):
    """Plane with class-2 (the small-cube side) negative and class 1 positive.

    Tries the coordinate-sum plane first, with its threshold midway between
    the certified image bounds, and falls back to a max-margin plane on the
    final images.
    """
    Z1, Z2 = as_points(Z_final_1), as_points(Z_final_2)
    low, high = _threshold(a, cert)
    if high > low:
        w = np.ones(Z1.shape[1])
        b = -0.5 * (low + high)
        s1, s2 = Z1 @ w + b, Z2 @ w + b
        e1, e2 = _rounding_bound(Z1, w, b), _rounding_bound(Z2, w, b)
        if np.all(s1 - e1 > 0) and np.all(s2 + e2 < 0):
            return SeparatorPlane(w, b, float(min((s1 - e1).min(), -(s2 + e2).max())))
    try:
        return max_margin_separator(Z2, Z1)
    except NotSeparableError as exc:
        raise ConstructionError(f"final images are not linearly separable: {exc}") from exc


@dataclass
class ConstructedNetwork:
    layer1: LayerAffine
    layer2: LayerAffine
    output: SeparatorPlane
    activation: ActivationSpec
    cert1: MarginCertificate
    cert2: MarginCertificate
    decomposition: Decomposition = field(repr=False)
    raw_delta: float = float("nan")
    # "parts": row i separates class 2 from class-1 part i;
    # "joint": every row separates class 2 from all of class 1
    layer2_mode: str = "parts"

    @property
    def sizes(self):
        return self.layer1.out_dim, self.layer2.out_dim

    def hidden(self, X):
        Z = forward_images(self.layer1, self.activation, X)
        return forward_images(self.layer2, self.activation, Z)

    def decision(self, X):
        """Output functional: positive for class 1, negative for class 2."""
        return self.output(self.hidden(X))

    def predict(self, X):
        return np.where(self.decision(X) > 0, 1, 2)


def construct(X1, X2, D, a, slack=None, base_delta=None, planes=None, n_jobs=1):
    """Build the network for ``X1`` (class 1) against ``X2`` (class 2).

    ``D`` must be a valid decomposition of exactly these two sets.
    """
    X1, X2 = as_points(X1, "X1"), as_points(X2, "X2")
    slack = DEFAULT.slack if slack is None else slack
    if len(X1) != len(D.points_1) or len(X2) != len(D.points_2):
        raise ValueError("decomposition does not match the point sets")
    if planes is None:
        planes = pair_planes(D, n_jobs)
    L1, L2 = D.L1, D.L2
    idx1 = D.part_indices_1()

    if a.kind == "leaky_relu":
        delta1 = required_delta(a, L2, slack, D=0.0, base=base_delta)
        probe = build_first_layer(D, a, MarginCertificate(0.0, delta1, 0.0, L2, 0.0), planes)
        depth = _layer1_depth(probe, X1, X2, idx1, L2)
        cert1 = _leaky_certificate(a, L2, delta1, depth, slack)
        layer1 = probe
    else:
        cert1 = _certificate(a, L2, slack, base=base_delta)
        layer1 = build_first_layer(D, a, cert1, planes)

    Z1 = forward_images(layer1, a, X1)
    Z2 = forward_images(layer1, a, X2)
    Z1_parts = [Z1[ix] for ix in idx1]

    def second(build):
        if a.kind != "leaky_relu":
            cert = _certificate(a, L1, slack, base=base_delta)
            return build(cert), cert
        delta2 = required_delta(a, L1, slack, D=0.0, base=base_delta)
        layer = build(MarginCertificate(0.0, delta2, 0.0, L1, 0.0))
        P = np.vstack([layer.preact(Z1), layer.preact(Z2)])
        depth = float(np.max(-P.min(axis=0)))
        return layer, _leaky_certificate(a, L1, delta2, max(depth, 0.0), slack)

    mode = "parts"
    layer2, cert2 = second(lambda c: build_second_layer(Z1_parts, Z2, a, c, L2))
    F1 = forward_images(layer2, a, Z1)
    F2 = forward_images(layer2, a, Z2)
    try:
        out = output_plane(F1, F2, a, cert2)
    except ConstructionError:
        mode = "joint"
        layer2, cert2 = second(lambda c: build_joint_second_layer(Z1, Z2, c, L1))
        F1 = forward_images(layer2, a, Z1)
        F2 = forward_images(layer2, a, Z2)
        out = output_plane(F1, F2, a, cert2)
    return ConstructedNetwork(layer1, layer2, out, a, cert1, cert2, D, layer2_mode=mode)


def _layer1_depth(layer, X1, X2, idx1, L2):
    """Largest distance below ``x0 = 0`` over the points each block must bound."""
    P2 = layer.preact(X2)
    depth = float(max(0.0, -P2.min()))
    for i, ix in enumerate(idx1):
        P = layer.preact(X1[ix])[:, i * L2:(i + 1) * L2]
        depth = max(depth, float(-P.min()))
    return depth


@dataclass
class SeparationReport:
    all_correct: bool
    misclassified_1: list
    misclassified_2: list
    final_hull_distance: float
    epsilon_1: float
    epsilon_2: float
    delta_used_1: float
    delta_used_2: float

    @property
    def misclassified(self):
        """Misclassified points as ``(class, index)`` pairs."""
        return [(1, i) for i in self.misclassified_1] + [(2, i) for i in self.misclassified_2]


def verify_separation(net, X1, X2):
    """Forward every point and check the sign of the output functional."""
    X1, X2 = as_points(X1, "X1"), as_points(X2, "X2")
    F1, F2 = net.hidden(X1), net.hidden(X2)
    s1, s2 = net.output(F1), net.output(F2)
    bad1 = np.flatnonzero(~(s1 > 0)).tolist()
    bad2 = np.flatnonzero(~(s2 < 0)).tolist()
    dist = hull_distance(F1, F2).distance
    ok = not bad1 and not bad2
    return SeparationReport(
        ok and dist > 0, bad1, bad2, dist,
        net.cert1.epsilon, net.cert2.epsilon, net.cert1.delta, net.cert2.delta)


def _cert_dict(c):
    return {"x0": c.x0, "delta": c.delta, "epsilon": c.epsilon, "L": c.L,
            "ratio": c.ratio, "D": c.D, "holds": c.holds}


def network_to_dict(net, labels=None):
    D = net.decomposition
    return {
        "schema_version": SCHEMA_VERSION,
        "activation": str(net.activation),
        "sizes": list(net.sizes),
        "input_dim": net.layer1.in_dim,
        "layer1": {"weights": net.layer1.weights.tolist(), "biases": net.layer1.biases.tolist()},
        "layer2": {"weights": net.layer2.weights.tolist(), "biases": net.layer2.biases.tolist()},
        "output": {"w": np.asarray(net.output.w).tolist(), "b": float(net.output.b),
                   "margin": float(net.output.margin)},
        "layer2_mode": net.layer2_mode,
        "cert1": _cert_dict(net.cert1),
        "cert2": _cert_dict(net.cert2),
        "decomposition": {"L1": D.L1, "L2": D.L2, "seed": D.seed,
                          "assign_1": D.assign_1.tolist(), "assign_2": D.assign_2.tolist()},
        "labels": None if labels is None else [str(x) for x in labels],
    }


def _cert_from(d):
    return MarginCertificate(d["x0"], d["delta"], d["epsilon"], d["L"], d["ratio"], d.get("D", 0.0))


def network_from_dict(doc, X1=None, X2=None):
    """Rebuild a network; the decomposition gets its points only if given."""
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {doc.get('schema_version')!r}")
    d = doc["decomposition"]
    a1, a2 = np.asarray(d["assign_1"], int), np.asarray(d["assign_2"], int)
    dim = doc["input_dim"]
    P1 = np.zeros((len(a1), dim)) if X1 is None else as_points(X1)
    P2 = np.zeros((len(a2), dim)) if X2 is None else as_points(X2)
    D = Decomposition(P1, P2, a1, a2, d.get("seed", 0))
    out = doc["output"]
    return ConstructedNetwork(
        LayerAffine(np.asarray(doc["layer1"]["weights"], float),
                    np.asarray(doc["layer1"]["biases"], float)),
        LayerAffine(np.asarray(doc["layer2"]["weights"], float),
                    np.asarray(doc["layer2"]["biases"], float)),
        SeparatorPlane(np.asarray(out["w"], float), float(out["b"]), float(out["margin"])),
        ActivationSpec.parse(doc["activation"]),
        _cert_from(doc["cert1"]), _cert_from(doc["cert2"]), D,
        layer2_mode=doc.get("layer2_mode", "parts"))
