"""Activation functions and the margin each one needs to realise a separation.

Every kind is non-decreasing. Sigmoid, tanh and ReLU have a left asymptote
``c`` (0, -1, 0); the leaky ReLU has none and is handled through its own
ratio with an explicit pre-activation depth ``D``.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

KINDS = ("sigmoid", "tanh", "relu", "leaky_relu")


@dataclass(frozen=True)
class ActivationSpec:
    kind: str
    c1: float = 0.0
    c2: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown activation kind {self.kind!r}")
        if self.kind == "leaky_relu" and not (self.c2 > self.c1 > 0):
            raise ValueError(f"leaky_relu needs c2 > c1 > 0, got c1={self.c1}, c2={self.c2}")

    @property
    def asymptote(self):
        """Left asymptote ``f(-inf)``, or None for the leaky ReLU."""
        return {"sigmoid": 0.0, "tanh": -1.0, "relu": 0.0}.get(self.kind)

    def __call__(self, x):
        return evaluate(self, x)

    def __str__(self):
        if self.kind == "leaky_relu":
            return f"leaky_relu:{self.c1:g}:{self.c2:g}"
        return self.kind

    @classmethod
    def parse(cls, text):
        """Parse ``sigmoid``, ``tanh``, ``relu`` or ``leaky_relu[:c1:c2]``."""
        parts = text.strip().split(":")
        kind = parts[0]
        if kind == "leaky_relu":
            if len(parts) == 1:
                return cls(kind, 0.2, 1.0)
            if len(parts) != 3:
                raise ValueError(f"expected leaky_relu:<c1>:<c2>, got {text!r}")
            return cls(kind, float(parts[1]), float(parts[2]))
        if len(parts) != 1:
            raise ValueError(f"{kind} takes no parameters")
        return cls(kind)


SIGMOID = ActivationSpec("sigmoid")
TANH = ActivationSpec("tanh")
RELU = ActivationSpec("relu")
LEAKY_RELU = ActivationSpec("leaky_relu", 0.2, 1.0)


def evaluate(a, x):
    x = np.asarray(x, dtype=float)
    if a.kind == "sigmoid":
        out = expit(x)
    elif a.kind == "tanh":
        out = np.tanh(x)
    elif a.kind == "relu":
        out = np.maximum(x, 0.0)
    else:
        out = np.where(x >= 0, a.c2 * x, a.c1 * x)
    return out if out.ndim else float(out)


def above_asymptote(a, x):
    """``f(x) - c`` computed without cancellation near the asymptote."""
    x = np.asarray(x, dtype=float)
    if a.kind == "sigmoid":
        out = expit(x)
    elif a.kind == "tanh":
        # tanh(x) + 1 == 2 * sigmoid(2x)
        out = 2.0 * expit(2.0 * x)
    elif a.kind == "relu":
        out = np.maximum(x, 0.0)
    else:
        raise ValueError("leaky_relu has no left asymptote")
    return out if out.ndim else float(out)


def derivative(a, x):
    x = np.asarray(x, dtype=float)
    if a.kind == "sigmoid":
        s = expit(x)
        return s * (1.0 - s)
    if a.kind == "tanh":
        return 1.0 - np.tanh(x) ** 2
    if a.kind == "relu":
        return (x > 0).astype(float)
    return np.where(x >= 0, a.c2, a.c1)


def shifted_ratio(a, x0, delta):
    """``(f(x0) - c) / (f(x0 + delta) - c)`` with 0/0 read as 0."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    if a.kind == "leaky_relu":
        raise ValueError("use leaky_ratio for leaky_relu")
    num = above_asymptote(a, x0)
    den = above_asymptote(a, x0 + delta)
    if num == 0.0:
        return 0.0
    return num / den


def leaky_ratio(a, x0, delta, D):
    """``(f(x0) - f(x0 - D)) / (f(x0 + delta) - f(x0 - D))`` for a leaky ReLU."""
    if a.kind != "leaky_relu":
        raise ValueError("leaky_ratio needs a leaky_relu activation")
    if delta <= 0 or D < 0:
        raise ValueError("need delta > 0 and D >= 0")
    lo = evaluate(a, x0 - D)
    return (evaluate(a, x0) - lo) / (evaluate(a, x0 + delta) - lo)


def min_delta(a, L, D=None):
    """Smallest pre-activation gap for which a certificate can exist.

    ``L`` may be fractional; construction code asks for ``L / (1 - slack)``.
    """
    if L < 1:
        raise ValueError(f"L must be at least 1, got {L}")
    if a.kind == "sigmoid":
        return math.log(L)
    if a.kind == "tanh":
        return 0.5 * math.log(L)
    if a.kind == "relu":
        return 0.0
    if D is None:
        raise ValueError("leaky_relu needs the pre-activation depth D")
    # solves D c1 / (delta c2 + D c1) = 1 / L
    return (L - 1) * D * a.c1 / a.c2


@dataclass(frozen=True)
class MarginCertificate:
    """Threshold data for one layer.

    Pre-activations ``<= x0`` land in ``[c, c + epsilon]`` (``[-epsilon, 0]``
    for the leaky ReLU); pre-activations ``>= x0 + delta`` land above
    ``c + L * epsilon`` (above ``(L - 1) * epsilon`` for the leaky ReLU).
    ``ratio`` is the achieved ratio, strictly below ``1 / L`` when ``holds``.
    """

    x0: float
    delta: float
    epsilon: float
    L: int
    ratio: float
    D: float = 0.0

    @property
    def holds(self):
        return self.ratio < 1.0 / self.L


class CertificateError(ValueError):
    """No threshold exists for the requested margin."""


def solve_x0(a, delta, L, slack=0.1, D=None):
    """Find the threshold ``x0`` and bound ``epsilon`` for gap ``delta``.

    For sigmoid and tanh the ratio increases monotonically in ``x0`` from
    its limit at minus infinity, so bisection finds the largest ``x0`` whose
    ratio is at most ``(1 - slack) / L``. ReLU needs no gap beyond a positive
    one and uses ``x0 = 0``; the leaky ReLU also uses ``x0 = 0`` with
    ``epsilon = -f(-D)``.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if L < 1:
        raise ValueError("L must be at least 1")
    if not 0 < slack < 1:
        raise ValueError("slack must lie in (0, 1)")
    target = (1.0 - slack) / L

    if a.kind == "relu":
        return MarginCertificate(0.0, delta, delta / (2.0 * L), L, 0.0)

    if a.kind == "leaky_relu":
        if D is None or D <= 0:
            raise ValueError("leaky_relu needs a positive depth D")
        ratio = leaky_ratio(a, 0.0, delta, D)
        if ratio > target:
            raise CertificateError(
                f"leaky ratio {ratio:.4g} exceeds {target:.4g}; "
                f"need delta > {min_delta(a, L / (1 - slack), D):.4g}")
        return MarginCertificate(0.0, delta, -evaluate(a, -D), L, ratio, D)

    limit = math.exp(-delta) if a.kind == "sigmoid" else math.exp(-2.0 * delta)
    if limit >= target:
        raise CertificateError(
            f"delta {delta:.4g} too small for L={L}: need delta > "
            f"{min_delta(a, L / (1 - slack)):.4g}")
    lo, hi = -700.0, 50.0
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        if shifted_ratio(a, mid, delta) <= target:
            lo = mid
        else:
            hi = mid
    ratio = shifted_ratio(a, lo, delta)
    return MarginCertificate(lo, delta, above_asymptote(a, lo), L, ratio)
