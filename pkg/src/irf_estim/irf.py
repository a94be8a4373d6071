"""Power waveforms seen by an element's power sensor during the three pilot
slots (BS only, user only, simultaneous rotational signaling).

Sample arrays carry the ``L`` observations on the last axis; any leading axes
index independent trials or elements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization
from .errors import DomainError
from .numerics import _gen, wrap_phase

__all__ = [
    "IrfElementParams",
    "SensorModel",
    "SignalingConfig",
    "InterferenceStats",
    "derive_element_params",
    "derive_stats",
    "generate_irf_samples",
    "generate_amplitude_slot",
    "params_from_contrast",
]


@dataclass(frozen=True)
class IrfElementParams:
    """Interference parameters of one element (fields may be arrays)."""

    alpha: float | np.ndarray
    beta: float | np.ndarray
    phi: float | np.ndarray

    def __post_init__(self):
        if np.any(np.asarray(self.alpha) < 0) or np.any(np.asarray(self.beta) < 0):
            raise DomainError("alpha and beta must be nonnegative")
        if not np.all(np.isfinite(self.phi)):
            raise DomainError("phi must be finite")


@dataclass(frozen=True)
class SignalingConfig:
    """BS sends the constant ``s = 1``; the user rotates ``s'(t) = e^{j psi(t)}``
    on interferential subcarrier ``k`` (``k`` fringe periods per symbol)."""

    bs_symbol: complex = 1.0
    subcarrier: int = 1

    def __post_init__(self):
        if abs(abs(self.bs_symbol) - 1) > 1e-12:
            raise DomainError("BS symbol must have unit modulus")
        if self.subcarrier != 1:
            raise DomainError("only the first interferential subcarrier is supported")

    def rotation_phases(self, L: int) -> np.ndarray:
        return 2 * np.pi * self.subcarrier * np.arange(L) / L


@dataclass(frozen=True)
class SensorModel:
    """Power sensor: ``P[l] = A |E_l + v_l|^2 + zeta_l``.

    ``noise_var`` is the baseband electromagnetic noise variance (sigma_v^2),
    ``sensor_std`` the standard deviation of the additive post-detection noise.
    """

    amplification: float = 1.0
    noise_var: float = 1.0
    sensor_std: float = 0.0
    L: int = 64
    phases: tuple[float, ...] | None = None

    def __post_init__(self):
        if not self.amplification > 0:
            raise DomainError("amplification must be positive")
        if self.noise_var < 0 or self.sensor_std < 0:
            raise DomainError("noise parameters must be nonnegative")
        if self.L < 3:
            raise DomainError("at least 3 samples are needed to identify the fringe")
        if self.phases is not None and len(self.phases) != self.L:
            raise DomainError("phases must have length L")

    @property
    def psi(self) -> np.ndarray:
        if self.phases is None:
            return SignalingConfig().rotation_phases(self.L)
        return np.asarray(self.phases, dtype=float)

    @property
    def uniform_grid(self) -> bool:
        return self.phases is None

    @property
    def a(self) -> float:
        """Scaled noise power ``A * sigma_v^2``."""
        return self.amplification * self.noise_var


@dataclass(frozen=True)
class InterferenceStats:
    """Quantities entering the likelihood and the CRLB."""

    K: float
    gamma_bar: float
    gamma_l: np.ndarray
    lambda_l: np.ndarray
    a: float
    mu_r: np.ndarray
    mu_i: np.ndarray


def params_from_contrast(K: float, gamma_bar: float, noise_var: float = 1.0) -> tuple[float, float]:
    """Amplitudes ``(alpha, beta)`` with ``alpha >= beta`` realizing contrast
    ``K`` and average interferential SNR ``gamma_bar``."""
    if not 0 <= K <= 1:
        raise DomainError("K must lie in [0, 1]")
    s = gamma_bar * noise_var
    hi, lo = math.sqrt(s * (1 + K)), math.sqrt(s * (1 - K))
    return (hi + lo) / 2, (hi - lo) / 2


def derive_element_params(channel: ChannelRealization, w, w_user: complex, n: int) -> IrfElementParams:
    """``alpha = |g_n^T w|``, ``beta = |f_n^* w'|`` and their phase difference.

    ``arg(0)`` is taken as 0, so a vanishing link leaves ``phi`` defined but
    unidentifiable downstream.
    """
    if not 0 <= n < channel.n_ris:
        raise IndexError(f"element index {n} out of range for N={channel.n_ris}")
    bs = complex(channel.G[n] @ np.asarray(w, dtype=complex))
    user = complex(np.conj(channel.f[n]) * w_user)
    phi = (np.angle(user) if user != 0 else 0.0) - (np.angle(bs) if bs != 0 else 0.0)
    return IrfElementParams(alpha=abs(bs), beta=abs(user), phi=wrap_phase(phi))


def derive_stats(params: IrfElementParams, sensor: SensorModel) -> InterferenceStats:
    """Interferential contrast, SNRs, noncentralities and component means.

    ``gamma_bar`` is the arithmetic mean of ``gamma_l``; on the uniform grid it
    equals ``(alpha^2 + beta^2) / sigma_v^2``. With ``sigma_v^2 = 0`` the SNR
    fields are ``inf``.
    """
    alpha, beta, phi = float(params.alpha), float(params.beta), float(params.phi)
    power = alpha**2 + beta**2
    K = 2 * alpha * beta / power if power > 0 else 0.0
    c = np.cos(sensor.psi + phi)
    lam = sensor.amplification * (power + 2 * alpha * beta * c)
    mu_r = alpha + beta * c
    mu_i = beta * np.sin(sensor.psi + phi)
    if sensor.noise_var > 0:
        gamma_l = (power + 2 * alpha * beta * c) / sensor.noise_var
        gamma_bar = float(np.mean(gamma_l))
    else:
        gamma_l = np.full(sensor.L, np.inf)
        gamma_bar = np.inf
    return InterferenceStats(K=K, gamma_bar=gamma_bar, gamma_l=gamma_l, lambda_l=lam,
                             a=sensor.a, mu_r=mu_r, mu_i=mu_i)


def _noisy_power(field, sensor, gen):
    shape = field.shape
    if sensor.noise_var > 0:
        std = math.sqrt(sensor.noise_var / 2)
        field = field + std * (gen.standard_normal(shape) + 1j * gen.standard_normal(shape))
    P = sensor.amplification * np.abs(field) ** 2
    if sensor.sensor_std > 0:
        P = P + sensor.sensor_std * gen.standard_normal(shape)
    return P


def generate_irf_samples(params: IrfElementParams, sensor: SensorModel, rng) -> np.ndarray:
    """IRF slot: ``P[l] = A |alpha + beta e^{j(psi_l + phi)} + v_l|^2 + zeta_l``.

    Array-valued params broadcast; the result has shape ``batch + (L,)``.
    Electromagnetic noise is drawn before sensor noise.
    """
    alpha = np.asarray(params.alpha, dtype=float)[..., None]
    beta = np.asarray(params.beta, dtype=float)[..., None]
    phi = np.asarray(params.phi, dtype=float)[..., None]
    field = alpha + beta * np.exp(1j * (sensor.psi + phi))
    return _noisy_power(field, sensor, _gen(rng))


def generate_amplitude_slot(amplitude, sensor: SensorModel, rng) -> np.ndarray:
    """Single-transmitter slot: ``P[l] = A |amplitude + v_l|^2 + zeta_l``."""
    amp = np.asarray(amplitude, dtype=float)[..., None]
    field = np.broadcast_to(amp, amp.shape[:-1] + (sensor.L,)).astype(complex)
    return _noisy_power(field, sensor, _gen(rng))
