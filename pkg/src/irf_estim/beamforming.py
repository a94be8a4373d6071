"""RIS phase configurations, baselines and link scoring."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization
from .errors import DomainError
from .numerics import _gen

__all__ = [
    "Beamformers",
    "LinkBudget",
    "LsCeData",
    "irf_beamform",
    "oracle_beamform",
    "alternating_beamform",
    "dft_pilot_matrix",
    "simulate_ls_pilots",
    "ls_channel_estimate",
    "snr",
    "spectral_efficiency",
    "random_phase_config",
    "dbm_to_watt",
]


def dbm_to_watt(dbm):
    return 10 ** ((np.asarray(dbm, dtype=float) - 30) / 10)


@dataclass(frozen=True)
class Beamformers:
    """BS precoder ``w`` and user precoding scalar ``w_user`` with their power caps."""

    w: np.ndarray
    w_user: complex
    p_max: float
    p_user_max: float

    def __post_init__(self):
        w = np.asarray(self.w, dtype=complex)
        object.__setattr__(self, "w", w)
        if np.vdot(w, w).real > self.p_max * (1 + 1e-12) + 1e-300:
            raise DomainError("||w||^2 exceeds P_max")
        if abs(self.w_user) ** 2 > self.p_user_max * (1 + 1e-12) + 1e-300:
            raise DomainError("|w_user|^2 exceeds P'_max")


@dataclass(frozen=True)
class LinkBudget:
    """Thermal noise levels derived from a noise density (dBm/Hz)."""

    n0_dbm_hz: float = -174.0
    bandwidth: float = 180e3
    sensor_bandwidth: float = 100e6
    sensor_noise_figure_db: float = 10.0

    @property
    def n0(self) -> float:
        """Noise density in W/Hz."""
        return float(dbm_to_watt(self.n0_dbm_hz))

    @property
    def receiver_noise(self) -> float:
        """User receiver noise ``sigma_z^2 = BW * n0`` in W."""
        return self.bandwidth * self.n0

    @property
    def pilot_noise(self) -> float:
        """BS pilot receiver noise; the same budget as the user receiver."""
        return self.receiver_noise

    @property
    def sensor_noise(self) -> float:
        """Power-sensor field noise ``sigma_v^2 = B_sensor * n0 * F_p`` in W."""
        return self.sensor_bandwidth * self.n0 * 10 ** (self.sensor_noise_figure_db / 10)


def irf_beamform(phi_hat, psi) -> np.ndarray:
    """``theta_n = exp(-j (phi_n + 2 psi_n))`` from estimated phase differences
    and known BS-side phases ``psi_n = arg(g_n^T w)``."""
    phi_hat = np.asarray(phi_hat, dtype=float)
    psi = np.asarray(psi, dtype=float)
    if phi_hat.shape != psi.shape:
        raise DomainError("phi_hat and psi must have the same length")
    return np.exp(-1j * (phi_hat + 2 * psi))


def oracle_beamform(channel: ChannelRealization, w) -> np.ndarray:
    """Perfect-CSI alignment ``theta_n = exp(-j arg(f_n^* g_n^T w))``.

    Elements with a vanishing cascade coefficient get ``theta_n = 1``.
    """
    if isinstance(w, Beamformers):
        w = w.w
    h = channel.H @ np.asarray(w, dtype=complex)
    return np.where(h == 0, 1.0 + 0j, np.exp(-1j * np.angle(h)))


def _objective(H, theta, w):
    return abs(theta @ (H @ w)) ** 2


def alternating_beamform(H, p_max: float, noise_var: float = 1.0, max_rounds: int = 50,
                         w0=None, tol: float = 1e-9, history: list | None = None):
    """Coordinate ascent on ``|theta^T H w|^2`` over unit-modulus ``theta`` and
    ``||w||^2 <= p_max``.

    Each round sets ``theta`` to co-phase the per-element terms for the current
    ``w``, then ``w`` to the matched filter of ``H^T theta``. Both half-steps
    are exact maximizers, so the objective never decreases. The default start
    is the dominant right singular vector of ``H``. If ``history`` is given,
    the SNR after every half-step is appended to it.

    Returns
    -------
    theta : ndarray
    w : ndarray
    """
    H = np.asarray(H, dtype=complex)
    if not np.any(H):
        raise DomainError("H must be nonzero")
    if w0 is None:
        _, _, vh = np.linalg.svd(H, full_matrices=False)
        w = math.sqrt(p_max) * np.conj(vh[0])
    else:
        w = np.asarray(w0, dtype=complex)
    theta = np.ones(H.shape[0], dtype=complex)
    prev = -1.0
    for _ in range(max_rounds):
        hw = H @ w
        theta = np.where(hw == 0, 1.0 + 0j, np.exp(-1j * np.angle(hw)))
        if history is not None:
            history.append(_objective(H, theta, w) / noise_var)
        v = H.T @ theta
        nv = np.linalg.norm(v)
        if nv > 0:
            w = math.sqrt(p_max) * np.conj(v) / nv
        obj = _objective(H, theta, w)
        if history is not None:
            history.append(obj / noise_var)
        if prev > 0 and abs(obj - prev) <= tol * prev:
            break
        prev = obj
    return theta, w


def dft_pilot_matrix(n: int, p: int) -> np.ndarray:
    """First ``p`` columns of the ``n``-point DFT matrix (RIS pilot configs)."""
    if not 1 <= p <= n:
        raise DomainError("pilot count must satisfy 1 <= P <= N")
    k = np.arange(n)[:, None] * np.arange(p)[None, :]
    return np.exp(-2j * np.pi * k / n)


@dataclass
class LsCeData:
    """Uplink pilot block ``Y_bs = H^T F_{N,P} w' s' + noise`` (M x P)."""

    configs: np.ndarray
    y_bs: np.ndarray
    user_gain: complex = 1.0

    @property
    def pilots(self) -> int:
        return self.configs.shape[1]


def simulate_ls_pilots(H, pilots: int, noise_var: float, rng, user_gain: complex = 1.0) -> LsCeData:
    """Received pilot block at the BS for the first ``pilots`` DFT configurations."""
    H = np.asarray(H, dtype=complex)
    F = dft_pilot_matrix(H.shape[0], pilots)
    y = H.T @ F * user_gain
    if noise_var > 0:
        gen = _gen(rng)
        y = y + math.sqrt(noise_var / 2) * (gen.standard_normal(y.shape) + 1j * gen.standard_normal(y.shape))
    return LsCeData(configs=F, y_bs=y, user_gain=user_gain)


def ls_channel_estimate(data: LsCeData) -> np.ndarray:
    """``H_ls = (1/P) F_{N,P}^* Y_bs^T``, with the known ``w' s'`` divided out."""
    F, Y = data.configs, np.asarray(data.y_bs, dtype=complex)
    if Y.shape[1] != F.shape[1]:
        raise DomainError("Y_bs must have one column per pilot configuration")
    return np.conj(F) @ Y.T / (data.pilots * data.user_gain)


def snr(channel: ChannelRealization, theta, w, noise_var: float) -> float:
    """``|f^H diag(theta) G w|^2 / sigma_z^2``."""
    if isinstance(w, Beamformers):
        w = w.w
    return _objective(channel.H, np.asarray(theta), np.asarray(w, dtype=complex)) / noise_var


def spectral_efficiency(snr_value):
    """Shannon rate ``log2(1 + snr)`` in bit/s/Hz."""
    out = np.log2(1 + np.asarray(snr_value, dtype=float))
    return float(out) if out.ndim == 0 else out


def random_phase_config(n: int, rng) -> np.ndarray:
    """I.i.d. uniform phases on ``(-pi, pi]``."""
    if n < 1:
        raise DomainError("N must be >= 1")
    u = _gen(rng).uniform(-np.pi, np.pi, size=n)
    return np.exp(1j * u)
