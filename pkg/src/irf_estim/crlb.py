"""Cramér-Rao bounds for phase estimation from noncentral chi-squared samples.

The Fisher information per sample is ``(K gamma_bar)^2 sin^2(psi_l + phi)
(1/gamma_l - g(gamma_l))``; ``g`` is a one-dimensional integral evaluated by
quadrature (exact bound) or replaced by a closed form (asymptotic bound).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from .errors import DomainError, NumericalError
from .numerics import QuadratureSpec, bessel_ratio, integrate_positive_halfline

__all__ = [
    "CrlbQuery",
    "g_exact",
    "g_hat",
    "information_gap",
    "crlb_exact",
    "crlb_asymptotic",
    "theorem3_bound",
    "expansion_error",
    "EXPANSION_DELTA",
]

# Sup of |x (1 - R(2 sqrt x)^2) - sqrt(x)/2| used by the relative-error bound.
EXPANSION_DELTA = 0.07
# Below this SNR the exact information gap is replaced by its series.
SMALL_GAMMA = 1e-8


@dataclass(frozen=True)
class CrlbQuery:
    """Phase-estimation scenario fully described by contrast and mean SNR."""

    K: float
    gamma_bar: float
    phi: float = 0.0
    psi: tuple[float, ...] | np.ndarray | None = None
    L: int = 64

    def __post_init__(self):
        if not -1 <= self.K <= 1:
            raise DomainError("K must lie in [-1, 1]")
        if not self.gamma_bar > 0:
            raise DomainError("gamma_bar must be positive")

    @property
    def phases(self) -> np.ndarray:
        if self.psi is None:
            return 2 * np.pi * np.arange(self.L) / self.L
        return np.asarray(self.psi, dtype=float)

    @property
    def gamma_l(self) -> np.ndarray:
        # clip tiny negative rounding at |K| = 1
        return np.maximum(self.gamma_bar * (1 + self.K * np.cos(self.phases + self.phi)), 0.0)


def _g_integrand(gamma):
    def f(t):
        t = np.asarray(t, dtype=float)
        r = np.sqrt(t)
        x = 2 * gamma * r
        # gamma t e^{-gamma(1+t)} I0(x) == gamma t e^{-gamma (1-sqrt t)^2} i0e(x)
        ratio = bessel_ratio(x)
        return gamma * t * np.exp(-gamma * (1 - r) ** 2) * special.i0e(x) * (1 - np.square(ratio))
    return f


@lru_cache(maxsize=8192)
def _g_cached(gamma, spec):
    return integrate_positive_halfline(_g_integrand(gamma), spec)


def g_exact(gamma: float, spec: QuadratureSpec | None = None) -> float:
    """``g(gamma) = E[(1 - R(z)^2) P / lambda]`` by quadrature."""
    if not gamma > 0:
        raise DomainError("g_exact needs gamma > 0")
    return _g_cached(float(gamma), spec or QuadratureSpec())


def g_hat(gamma):
    """Closed-form large-SNR approximation of ``g``.

    ``(1/4) sqrt(pi/gamma) [(1 + 1/gamma) i0e(gamma/2) + i1e(gamma/2)]``, the
    ``e^{-gamma/2}`` factor being absorbed by the scaled Bessel functions.
    """
    gamma = np.asarray(gamma, dtype=float)
    if np.any(~(gamma > 0)) or not np.all(np.isfinite(gamma)):
        raise DomainError("g_hat needs finite gamma > 0")
    h = gamma / 2
    out = 0.25 * np.sqrt(np.pi / gamma) * ((1 + 1 / gamma) * special.i0e(h) + special.i1e(h))
    return float(out) if out.ndim == 0 else out


def information_gap(gamma: float, spec: QuadratureSpec | None = None) -> float:
    """``1/gamma - g(gamma)`` with its ``gamma -> 0`` limit ``1 - gamma/2``."""
    if gamma < 0:
        raise DomainError("gamma must be nonnegative")
    if gamma < SMALL_GAMMA:
        return 1.0 - gamma / 2
    return 1.0 / gamma - g_exact(gamma, spec)


def _bound(q: CrlbQuery, gaps) -> float:
    w = np.sin(q.phases + q.phi) ** 2
    # drop 0 * inf products (zero weight at a vanishing sample)
    terms = np.where(w == 0, 0.0, w * gaps)
    info = q.K**2 * q.gamma_bar**2 * math.fsum(terms)
    if info <= 0:
        return math.inf
    return 1.0 / info


def crlb_exact(q: CrlbQuery, spec: QuadratureSpec | None = None) -> float:
    """Exact CRLB of the phase; ``inf`` when ``K = 0``."""
    if q.K == 0:
        return math.inf
    gaps = np.array([information_gap(g, spec) for g in q.gamma_l])
    if not np.all(np.isfinite(gaps)):
        raise NumericalError("non-finite information term")
    return _bound(q, gaps)


def crlb_asymptotic(q: CrlbQuery) -> float:
    """CRLB with ``g`` replaced by ``g_hat`` and each term clamped at zero."""
    if q.K == 0:
        return math.inf
    gl = q.gamma_l
    gaps = np.zeros_like(gl)
    pos = gl > 0
    gaps[pos] = np.maximum(1 / gl[pos] - g_hat(gl[pos]), 0.0)
    gaps[~pos] = 1.0
    return _bound(q, gaps)


def theorem3_bound(gamma: float) -> float:
    """Upper bound ``0.07 / (gamma/6 - 0.07)`` on the relative error of
    ``1/gamma - g_hat`` as a stand-in for ``1/gamma - g``; valid for
    ``gamma > 0.42``."""
    if not gamma > 6 * EXPANSION_DELTA:
        raise DomainError("bound holds only for gamma > 0.42")
    return EXPANSION_DELTA / (gamma / 6 - EXPANSION_DELTA)


def expansion_error(x):
    """``x (1 - R(2 sqrt x)^2) - sqrt(x)/2``, the error of the large-argument
    expansion used to derive ``g_hat``."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("x must be nonnegative")
    r = np.sqrt(x)
    out = x * (1 - np.square(bessel_ratio(2 * r))) - r / 2
    return float(out) if out.ndim == 0 else out
