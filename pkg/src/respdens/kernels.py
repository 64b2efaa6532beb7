"""Compactly supported piecewise-polynomial kernels and bandwidth schedules.

The smoothing kernels used throughout are polynomials multiplied by powers of
(1 - u^2) on [-1, 1], which gives exact moments, closed-form derivatives and a
closed-form self-convolution.  The logistic kernel (unbounded support, smooth)
is kept separate since it is only used for score estimation.
"""

from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.polynomial import polynomial as P

__all__ = [
    "Kernel",
    "KernelSmoothnessError",
    "SmoothKernel",
    "BandwidthKind",
    "BandwidthRule",
    "make_third_order_kernel",
    "box_kernel",
    "self_convolve",
    "convolve_kernels",
    "eval_scaled",
    "bandwidth",
    "logistic_kernel",
]

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


class KernelSmoothnessError(ValueError):
    """Requested derivative order exceeds the kernel's smoothness."""


def _piece_quad(func, lo, hi):
    """64-point Gauss-Legendre on [lo, hi]; exact for polynomials here."""
    mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
    return half * np.sum(_GL_WEIGHTS * func(mid + half * _GL_NODES))


@dataclass(frozen=True)
class Kernel:
    """Piecewise polynomial on a compact support, with derivative evaluators.

    breaks are the knots (increasing); coeffs[i] holds ascending polynomial
    coefficients valid on [breaks[i], breaks[i+1]].  The function is zero
    outside [breaks[0], breaks[-1]].
    """

    breaks: np.ndarray
    coeffs: tuple[np.ndarray, ...]
    support_radius: float
    smoothness: int
    order: int
    _deriv_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def pieces(self):
        return [
            ((self.breaks[i], self.breaks[i + 1]), self.coeffs[i])
            for i in range(len(self.coeffs))
        ]

    def _deriv_coeffs(self, d):
        if d not in self._deriv_cache:
            self._deriv_cache[d] = tuple(P.polyder(c, d) for c in self.coeffs)
        return self._deriv_cache[d]

    def __call__(self, u, deriv=0):
        if deriv > self.smoothness:
            raise KernelSmoothnessError(
                f"derivative order {deriv} exceeds kernel smoothness "
                f"{self.smoothness}: kernel too rough"
            )
        u = np.asarray(u, dtype=float)
        scalar = u.ndim == 0
        u = np.atleast_1d(u)
        out = np.zeros_like(u)
        idx = np.searchsorted(self.breaks, u, side="right") - 1
        # points exactly at the right end belong to the last piece
        idx[u == self.breaks[-1]] = len(self.coeffs) - 1
        inside = (idx >= 0) & (idx < len(self.coeffs)) & (np.abs(u) <= self.support_radius)
        coeffs = self._deriv_coeffs(deriv)
        for i in range(len(self.coeffs)):
            sel = inside & (idx == i)
            if np.any(sel):
                out[sel] = P.polyval(u[sel], coeffs[i])
        return out[0] if scalar else out

    def moment(self, m):
        """Exact m-th moment by per-piece Gauss-Legendre quadrature."""
        total = 0.0
        for (lo, hi), _ in self.pieces:
            total += _piece_quad(lambda u: u**m * self(u), lo, hi)
        return total

    def l2_norm_sq(self):
        return sum(
            _piece_quad(lambda u: self(u) ** 2, lo, hi) for (lo, hi), _ in self.pieces
        )


def _knot_jump(breaks, coeffs, d):
    """Largest jump of the d-th derivative across knots (incl. the support edges)."""
    dc = [P.polyder(c, d) for c in coeffs]
    worst = 0.0
    for i in range(len(breaks)):
        left = P.polyval(breaks[i], dc[i - 1]) if i > 0 else 0.0
        right = P.polyval(breaks[i], dc[i]) if i < len(coeffs) else 0.0
        worst = max(worst, abs(left - right))
    return worst


def _make_kernel(breaks, coeffs, max_smoothness=8):
    breaks = np.asarray(breaks, dtype=float)
    coeffs = tuple(np.asarray(c, dtype=float) for c in coeffs)
    smoothness = 0
    for d in range(max_smoothness + 1):
        if _knot_jump(breaks, coeffs, d) < 1e-9:
            smoothness = d
        else:
            break
    k = Kernel(
        breaks=breaks,
        coeffs=coeffs,
        support_radius=float(max(abs(breaks[0]), abs(breaks[-1]))),
        smoothness=smoothness,
        order=0,
    )
    order = 0
    for m in range(1, 11):
        if abs(k.moment(m)) > 1e-9:
            order = m
            break
    object.__setattr__(k, "order", order)
    return k


def make_third_order_kernel():
    """k(u) = (c0 + c2 u^2)(1 - u^2)^3 on [-1, 1] with vanishing 1st/2nd moments.

    The moment system {int k = 1, int u^2 k = 0} has the exact rational
    solution c0 = 945/512, c2 = -3465/512.
    """
    c0, c2 = 945.0 / 512.0, -3465.0 / 512.0
    bump = P.polypow([1.0, 0.0, -1.0], 3)  # (1 - u^2)^3
    coeffs = P.polymul([c0, 0.0, c2], bump)
    return _make_kernel([-1.0, 1.0], [coeffs])


def box_kernel(half_width=0.5):
    """Uniform density on [-half_width, half_width]; test fixture."""
    return _make_kernel(
        [-half_width, half_width], [np.array([1.0 / (2.0 * half_width)])]
    )


def _bivar_from_poly_of_t_minus_u(q):
    """Coefficient table C[j][m] of t^j u^m for q(t - u), exact rationals."""
    deg = len(q) - 1
    C = [[Fraction(0)] * (deg + 1) for _ in range(deg + 1)]
    for j, qj in enumerate(q):
        if qj == 0:
            continue
        for i in range(j + 1):
            C[i][j - i] += qj * math.comb(j, i) * (-1) ** (j - i)
    return C


def _eval_bivar_at_u(C, alpha, beta):
    """Substitute u = alpha + beta*t into sum C[j][m] t^j u^m; poly in t."""
    nj, nm = len(C), len(C[0])
    out = [Fraction(0)] * (nj + nm)
    for j in range(nj):
        for m in range(nm):
            c = C[j][m]
            if c == 0:
                continue
            if beta == 0:
                out[j] += c * alpha**m
            else:
                for i in range(m + 1):
                    out[j + i] += c * math.comb(m, i) * alpha ** (m - i) * beta**i
    return out


def _frac_polymul(a, b):
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        if ai == 0:
            continue
        for j, bj in enumerate(b):
            out[i + j] += ai * bj
    return out


def convolve_kernels(k1: Kernel, k2: Kernel) -> Kernel:
    """Exact piecewise-polynomial convolution of two compact kernels.

    All arithmetic is rational (floats lifted exactly via Fraction), so the
    result is exact up to a single rounding when coefficients are stored.
    """
    br1 = [Fraction(float(x)) for x in k1.breaks]
    br2 = [Fraction(float(x)) for x in k2.breaks]
    pc1 = [
        (br1[i], br1[i + 1], [Fraction(float(v)) for v in k1.coeffs[i]])
        for i in range(len(k1.coeffs))
    ]
    pc2 = [
        (br2[i], br2[i + 1], [Fraction(float(v)) for v in k2.coeffs[i]])
        for i in range(len(k2.coeffs))
    ]
    pts = sorted({a + b for a in br1 for b in br2})
    out_coeffs = []
    for lo, hi in zip(pts[:-1], pts[1:]):
        tm = (lo + hi) / 2
        acc = [Fraction(0)]
        for a1, b1, p in pc1:
            for a2, b2, q in pc2:
                if max(a1, tm - b2) >= min(b1, tm - a2):
                    continue
                C = _bivar_from_poly_of_t_minus_u(q)
                # multiply by p(u) along the u axis, then antidifferentiate in u
                G = [_frac_polymul(row, p) for row in C]
                G = [
                    [Fraction(0)] + [v / (m + 1) for m, v in enumerate(row)]
                    for row in G
                ]
                if a1 >= tm - b2:
                    lower = _eval_bivar_at_u(G, a1, 0)
                else:
                    lower = _eval_bivar_at_u(G, -b2, 1)
                if b1 <= tm - a2:
                    upper = _eval_bivar_at_u(G, b1, 0)
                else:
                    upper = _eval_bivar_at_u(G, -a2, 1)
                term = [u - l for u, l in zip(upper, lower)]
                if len(term) > len(acc):
                    acc = acc + [Fraction(0)] * (len(term) - len(acc))
                for i, v in enumerate(term):
                    acc[i] += v
        while len(acc) > 1 and acc[-1] == 0:
            acc.pop()
        out_coeffs.append(np.array([float(v) for v in acc]))
    return _make_kernel([float(p) for p in pts], out_coeffs)


def self_convolve(k: Kernel) -> Kernel:
    """K = k * k, computed in closed form."""
    return convolve_kernels(k, k)


def eval_scaled(k: Kernel, bandwidth: float, t, deriv_order: int = 0):
    """d-th derivative of the rescaled kernel: k^(d)(t/b) / b^(1+d)."""
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    return k(np.asarray(t, dtype=float) / bandwidth, deriv=deriv_order) / bandwidth ** (
        1 + deriv_order
    )


class BandwidthKind(Enum):
    KDE_BASELINE = "kde-baseline"
    CONVOLUTION = "convolution"
    SMOOTHER = "smoother"
    SCORE = "score"


_EXPONENTS = {
    BandwidthKind.KDE_BASELINE: -1.0 / 7.0,
    BandwidthKind.CONVOLUTION: -1.0 / 5.0,
    BandwidthKind.SMOOTHER: -1.0 / 4.0,
    BandwidthKind.SCORE: -1.0 / 9.0,
}


@dataclass(frozen=True)
class BandwidthRule:
    """Deterministic bandwidth schedule constant * n^exponent.

    Exponents are fixed per kind; only the constant is free.
    """

    kind: BandwidthKind
    constant: float = 1.0

    def __post_init__(self):
        if self.constant <= 0:
            raise ValueError("bandwidth constant must be positive")

    @property
    def exponent(self):
        return _EXPONENTS[self.kind]

    def value_for(self, n: int) -> float:
        if n < 2:
            raise ValueError("sample size must be at least 2")
        return self.constant * float(n) ** self.exponent


def bandwidth(n: int, rule: BandwidthRule) -> float:
    return rule.value_for(n)


@dataclass(frozen=True)
class SmoothKernel:
    """Smooth positive density on the whole line with an exact derivative."""

    name: str

    @staticmethod
    def _sigmoid(x):
        # overflow-safe: single exp of a nonpositive argument
        e = np.exp(-np.abs(x))
        return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))

    def __call__(self, x):
        s = self._sigmoid(np.asarray(x, dtype=float))
        return s * (1.0 - s)

    def deriv(self, x):
        s = self._sigmoid(np.asarray(x, dtype=float))
        return s * (1.0 - s) * (1.0 - 2.0 * s)


def logistic_kernel() -> SmoothKernel:
    """kappa(x) = e^{-x} / (1 + e^{-x})^2, the logistic density."""
    return SmoothKernel(name="logistic")
