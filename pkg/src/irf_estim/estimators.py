"""Amplitude and phase estimators operating on power-only observations.

All phase estimators accept ``samples`` of shape ``(..., L)`` and amplitudes
that broadcast against the leading axes, so a whole Monte-Carlo batch (or a
whole RIS) is estimated in one call.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError, UndefinedPhaseError
from .irf import SensorModel
from .numerics import bessel_ratio, wrap_phase

__all__ = [
    "Method",
    "EstimationResult",
    "VonMisesParams",
    "estimate_amplitude",
    "dft_phase",
    "ml_log_likelihood",
    "ml_derivatives",
    "newton_ml_phase",
    "vm_em_phase",
    "vm_posterior_update",
    "vm_circle_posterior",
]

NEWTON_MAX_STEP = np.pi / 2
NEWTON_HALVINGS = 8


class Method(str, enum.Enum):
    DFT = "DFT"
    NEWTON_ML = "NewtonML"
    VM_EM = "VmEm"


@dataclass
class EstimationResult:
    """Phase estimate(s) in ``(-pi, pi]`` with convergence bookkeeping.

    ``phi_hat`` and ``converged`` are arrays for batched calls.
    """

    phi_hat: float | np.ndarray
    iterations: int
    converged: bool | np.ndarray
    method: Method


@dataclass(frozen=True)
class VonMisesParams:
    """VM(mu, kappa), equivalently the natural parameter ``kappa e^{j mu}``."""

    mu: float
    kappa: float

    def __post_init__(self):
        if self.kappa < 0:
            raise DomainError("kappa must be nonnegative")

    @property
    def natural(self) -> complex:
        return self.kappa * complex(math.cos(self.mu), math.sin(self.mu))

    @classmethod
    def from_natural(cls, eta: complex) -> "VonMisesParams":
        return cls(mu=float(np.angle(eta)), kappa=abs(eta))

    def pdf(self, theta):
        theta = np.asarray(theta, dtype=float)
        # exp(kappa (cos - 1)) / (2 pi i0e(kappa)) avoids overflow at large kappa
        return np.exp(self.kappa * (np.cos(theta - self.mu) - 1)) / (2 * np.pi * special.i0e(self.kappa))


def vm_posterior_update(prior: VonMisesParams, z: complex, variance: float) -> VonMisesParams:
    """Posterior of ``theta ~ VM(prior)`` after observing ``z ~ CN(e^{j theta}, variance)``."""
    if not variance > 0:
        raise DomainError("variance must be positive")
    return VonMisesParams.from_natural(prior.natural + 2 * z / variance)


def vm_circle_posterior(z0: complex, radius: float, variance: float) -> VonMisesParams:
    """Law of ``arg z`` for ``z ~ CN(z0, variance)`` conditioned on ``|z| = radius``."""
    return VonMisesParams(mu=float(np.angle(z0)), kappa=radius * abs(z0) / (variance / 2))


def estimate_amplitude(slot, sensor: SensorModel):
    """Method-of-moments amplitude from a single-transmitter slot.

    Inverts ``E[P] = A (amp^2 + sigma_v^2)``; clamps at zero. The estimate is
    biased by ``O(1 / (L gamma))``.
    """
    slot = np.asarray(slot, dtype=float)
    if slot.shape[-1] != sensor.L:
        raise DomainError("slot length must equal L")
    power = slot.mean(axis=-1) / sensor.amplification - sensor.noise_var
    out = np.sqrt(np.maximum(power, 0.0))
    return float(out) if out.ndim == 0 else out


def _first_harmonic(samples):
    L = samples.shape[-1]
    return samples @ np.exp(-2j * np.pi * np.arange(L) / L)


def dft_phase(samples) -> EstimationResult:
    """Phase of the first DFT harmonic of the power samples."""
    samples = np.asarray(samples, dtype=float)
    if samples.shape[-1] < 3:
        raise DomainError("need L >= 3 samples")
    p1 = _first_harmonic(samples)
    if np.any(p1 == 0):
        raise UndefinedPhaseError("first harmonic vanishes; phase undefined")
    phi = wrap_phase(np.angle(p1))
    conv = True if np.ndim(phi) == 0 else np.ones(np.shape(phi), dtype=bool)
    return EstimationResult(phi_hat=phi, iterations=0, converged=conv, method=Method.DFT)


def _model(phi, alpha, beta, sensor):
    phi = np.asarray(phi, dtype=float)[..., None]
    alpha = np.asarray(alpha, dtype=float)[..., None]
    beta = np.asarray(beta, dtype=float)[..., None]
    arg = sensor.psi + phi
    lam = sensor.amplification * (alpha**2 + beta**2 + 2 * alpha * beta * np.cos(arg))
    return arg, lam, alpha, beta


def ml_log_likelihood(phi, samples, alpha, beta, sensor: SensorModel):
    """Noncentral chi-squared log-likelihood of ``phi`` (``sigma_zeta = 0`` model).

    ``sum_l [-(P_l + lam_l)/a + log I0(2 sqrt(P_l lam_l)/a)] - L log a``.
    Negative samples are clamped to zero.
    """
    P = np.maximum(np.asarray(samples, dtype=float), 0.0)
    _, lam, _, _ = _model(phi, alpha, beta, sensor)
    a = sensor.a
    z = 2 * np.sqrt(P * lam) / a
    terms = -(P + lam) / a + np.log(special.i0e(z)) + z
    out = terms.sum(axis=-1) - P.shape[-1] * math.log(a)
    return float(out) if np.ndim(out) == 0 else out


def ml_derivatives(phi, samples, alpha, beta, sensor: SensorModel):
    """First and second derivative of :func:`ml_log_likelihood` in ``phi``."""
    P = np.maximum(np.asarray(samples, dtype=float), 0.0)
    arg, lam, alpha, beta = _model(phi, alpha, beta, sensor)
    a = sensor.a
    s, c = np.sin(arg), np.cos(arg)
    lam_safe = np.maximum(lam, np.finfo(float).tiny)
    z = 2 * np.sqrt(P * lam) / a
    R = bessel_ratio(z)
    # R(z)/z -> 1/2 as z -> 0
    R_over_z = np.where(z > 1e-8, R / np.where(z > 1e-8, z, 1.0), 0.5)
    bracket = 1 - R * np.sqrt(P / lam_safe)
    coef = 2 * alpha * beta / sensor.noise_var
    d1 = (coef * s * bracket).sum(axis=-1)
    d2 = (coef * c * bracket).sum(axis=-1) + (
        coef**2 * s**2 * (1 - R**2 - 2 * R_over_z) * P / lam_safe
    ).sum(axis=-1)
    return d1, d2


def _degenerate(alpha, beta, shape):
    deg = (np.asarray(alpha) <= 0) | (np.asarray(beta) <= 0)
    return np.broadcast_to(deg, shape)


def newton_ml_phase(samples, alpha, beta, sensor: SensorModel, init=None, max_iters: int = 4) -> EstimationResult:
    """Newton ascent on the exact log-likelihood.

    Starts from the DFT estimate unless ``init`` is given. A Newton step is
    taken as-is when the curvature is negative and the step is at most
    ``pi/2``; otherwise the step (or ``pi/2`` uphill when the curvature has
    the wrong sign) is halved up to 8 times until the likelihood increases,
    and the iterate is kept if none does.
    """
    if sensor.noise_var <= 0:
        raise DomainError("Newton-ML needs sigma_v^2 > 0")
    samples = np.asarray(samples, dtype=float)
    batch = samples.shape[:-1]
    start = dft_phase(samples).phi_hat if init is None else np.broadcast_to(np.asarray(init, float), batch)
    phi = np.array(start, dtype=float)
    deg = _degenerate(alpha, beta, batch)
    ok = np.ones(batch, dtype=bool)
    guarded = np.zeros(batch, dtype=bool)
    step = np.zeros(batch)
    iters = 0
    for _ in range(max_iters):
        iters += 1
        d1, d2 = ml_derivatives(phi, samples, alpha, beta, sensor)
        finite = np.isfinite(d1) & np.isfinite(d2)
        ok &= finite
        with np.errstate(divide="ignore", invalid="ignore"):
            raw = np.where(finite, -d1 / d2, 0.0)
        plain = finite & (d2 < 0) & (np.abs(raw) <= NEWTON_MAX_STEP)
        guarded = finite & ~plain
        step = np.where(plain, raw, 0.0)
        if np.any(guarded):
            trial = np.where(d2 < 0, raw, np.sign(d1) * NEWTON_MAX_STEP)
            base = ml_log_likelihood(phi, samples, alpha, beta, sensor)
            pending = guarded.copy()
            for k in range(NEWTON_HALVINGS + 1):
                cand = trial / 2**k
                fits = pending & (np.abs(cand) <= NEWTON_MAX_STEP)
                if not np.any(fits):
                    continue
                better = ml_log_likelihood(phi + cand, samples, alpha, beta, sensor) > base
                take = fits & better
                step = np.where(take, cand, step)
                pending &= ~take
                if not np.any(pending):
                    break
        phi = wrap_phase(phi + step)
        if np.all(np.abs(step) < 1e-12) and not np.any(guarded):
            break
    phi = np.where(ok, phi, start)
    converged = ok & ((np.abs(step) < 1e-8) | ~guarded)
    if np.any(deg):
        fallback = dft_phase(samples).phi_hat
        phi = np.where(deg, fallback, phi)
        converged = converged & ~deg
    return _pack(phi, iters, converged, Method.NEWTON_ML)


def vm_em_phase(samples, alpha, beta, sensor: SensorModel, max_iters: int = 4, tol: float = 1e-6) -> EstimationResult:
    """Von Mises EM iteration (Bessel-free).

    E-step takes the latent phase of each sample as the phase of its noiseless
    phasor ``alpha + beta e^{j(phi + psi_l)}``; M-step adds the recentred,
    rotated phasors to the running von Mises natural parameter, starting from
    the DFT estimate with concentration 1.
    """
    if sensor.noise_var <= 0:
        raise DomainError("VM-EM needs sigma_v^2 > 0")
    samples = np.asarray(samples, dtype=float)
    batch = samples.shape[:-1]
    alpha_b = np.asarray(alpha, dtype=float)
    beta_b = np.asarray(beta, dtype=float)
    psi = sensor.psi
    s = np.sqrt(np.maximum(samples, 0.0) / sensor.amplification)
    rot = np.exp(-1j * psi)
    phi = np.array(dft_phase(samples).phi_hat, dtype=float)
    kappa = np.ones(batch)
    active = np.ones(batch, dtype=bool)
    ok = np.ones(batch, dtype=bool)
    iters = 0
    for _ in range(max_iters):
        iters += 1
        mu = alpha_b[..., None] + beta_b[..., None] * np.exp(1j * (phi[..., None] + psi))
        w = s * np.exp(1j * np.angle(mu)) - alpha_b[..., None]
        z = kappa * np.exp(1j * phi) + beta_b * (w @ rot) / (sensor.noise_var / 2)
        bad = z == 0
        ok &= ~(bad & active)
        upd = active & ~bad
        new_phi = np.where(upd, np.angle(z), phi)
        delta = np.abs(wrap_phase(new_phi - phi))
        kappa = np.where(upd, np.abs(z), kappa)
        phi = new_phi
        active &= delta >= tol
        if not np.any(active):
            break
    converged = ok & ~active
    deg = _degenerate(alpha, beta, batch)
    if np.any(deg):
        converged = converged & ~deg
        phi = np.where(deg, dft_phase(samples).phi_hat, phi)
    return _pack(wrap_phase(phi), iters, converged, Method.VM_EM)


def _pack(phi, iters, converged, method):
    if np.ndim(phi) == 0:
        return EstimationResult(float(phi), iters, bool(converged), method)
    return EstimationResult(np.asarray(phi), iters, np.asarray(converged), method)
