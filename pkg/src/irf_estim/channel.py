"""Geometry-driven Rician channels for a BS -> RIS -> user link.

Array convention: every planar array lies in the local y-z plane with its
normal along +x. Element ``(p, q)`` sits at ``spacing * (q * y_hat + p * z_hat)``
and is stored at flat index ``p * cols + q``. A plane wave arriving from unit
direction ``u`` picks up phase ``2*pi/lambda * <position, u>``, i.e.
``2*pi*d*(p*sin(el) + q*cos(el)*sin(az))`` with ``u = (cos el cos az,
cos el sin az, sin el)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .numerics import _gen

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class Geometry:
    """Positions (meters) and array sizes of BS, RIS and user.

    ``spacing`` defaults to half a wavelength.
    """

    bs_position: tuple[float, float, float]
    user_position: tuple[float, float, float]
    ris_position: tuple[float, float, float] = (0.0, 0.0, 0.0)
    ris_dims: tuple[int, int] = (8, 4)
    bs_dims: tuple[int, int] = (2, 2)
    carrier_frequency: float = 10e9
    spacing: float | None = None

    def __post_init__(self):
        if min(*self.ris_dims, *self.bs_dims) < 1:
            raise DomainError("array dimensions must be >= 1")
        if self.carrier_frequency <= 0:
            raise DomainError("carrier frequency must be positive")
        if self.spacing is None:
            object.__setattr__(self, "spacing", self.wavelength / 2)
        if self.spacing <= 0:
            raise DomainError("element spacing must be positive")
        pts = [np.asarray(p, float) for p in (self.bs_position, self.user_position, self.ris_position)]
        for i in range(3):
            for j in range(i + 1, 3):
                if np.allclose(pts[i], pts[j]):
                    raise DomainError("BS, RIS and user positions must be pairwise distinct")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency

    @property
    def n_ris(self) -> int:
        return self.ris_dims[0] * self.ris_dims[1]

    @property
    def n_bs(self) -> int:
        return self.bs_dims[0] * self.bs_dims[1]

    def array_center(self, origin, dims) -> np.ndarray:
        rows, cols = dims
        return np.asarray(origin, float) + self.spacing * np.array([0.0, (cols - 1) / 2, (rows - 1) / 2])


@dataclass(frozen=True)
class FadingSpec:
    """Small- and large-scale fading parameters.

    ``ref_pathloss_db`` is the loss at 1 m; ``None`` selects the free-space
    value ``20 log10(4 pi / lambda)``.
    """

    kappa: float = 2.0
    n_los: int = 1
    n_nlos: int = 4
    pathloss_exponent: float = 2.0
    ref_pathloss_db: float | None = None

    def __post_init__(self):
        if not self.kappa >= 0:
            raise DomainError("Rician kappa must be >= 0")
        if self.n_los not in (0, 1):
            raise DomainError("n_los must be 0 or 1")
        if self.n_nlos < 0:
            raise DomainError("n_nlos must be >= 0")


@dataclass
class ChannelRealization:
    """BS->RIS matrix ``G`` (N x M) and RIS->user vector ``f`` (N,).

    The user receives ``f^H diag(theta) G w``; ``conj(f[n])`` is the physical
    user<->element coefficient.
    """

    G: np.ndarray
    f: np.ndarray
    H: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.G = np.asarray(self.G, dtype=complex)
        self.f = np.asarray(self.f, dtype=complex)
        if self.G.ndim != 2 or self.f.shape != (self.G.shape[0],):
            raise DomainError("G must be N x M and f must have length N")
        self.H = np.conj(self.f)[:, None] * self.G

    @property
    def n_ris(self) -> int:
        return self.G.shape[0]


def upa_steering(azimuth, elevation, dims, spacing_over_wavelength=0.5):
    """Unit-modulus steering vector of a ``rows x cols`` planar array."""
    rows, cols = dims
    if rows < 1 or cols < 1:
        raise DomainError("array dimensions must be >= 1")
    p = np.arange(rows)[:, None]
    q = np.arange(cols)[None, :]
    phase = 2 * np.pi * spacing_over_wavelength * (
        p * math.sin(elevation) + q * math.cos(elevation) * math.sin(azimuth)
    )
    return np.exp(1j * phase).ravel()


def direction_angles(src, dst):
    """Azimuth/elevation of the unit vector pointing from ``src`` to ``dst``."""
    d = np.asarray(dst, float) - np.asarray(src, float)
    u = d / np.linalg.norm(d)
    return math.atan2(u[1], u[0]), math.asin(float(np.clip(u[2], -1.0, 1.0)))


def _path_amplitude(distance, geom: Geometry, fading: FadingSpec) -> float:
    if fading.ref_pathloss_db is None:
        ref = (geom.wavelength / (4 * np.pi)) ** 2
    else:
        ref = 10 ** (-fading.ref_pathloss_db / 10)
    return math.sqrt(ref * distance ** (-fading.pathloss_exponent))


def _los_pair(geom, fading, far_pos, far_dims):
    """LOS response ``(amplitude * propagation phase, a_ris, a_far)``."""
    ris_c = geom.array_center(geom.ris_position, geom.ris_dims)
    far_c = geom.array_center(far_pos, far_dims)
    dist = float(np.linalg.norm(far_c - ris_c))
    d_over_l = geom.spacing / geom.wavelength
    a_ris = upa_steering(*direction_angles(ris_c, far_c), geom.ris_dims, d_over_l)
    a_far = upa_steering(*direction_angles(far_c, ris_c), far_dims, d_over_l)
    rho = _path_amplitude(dist, geom, fading) * np.exp(-2j * np.pi * dist / geom.wavelength)
    return rho, a_ris, a_far, dist


def los_bs_ris(geom: Geometry, fading: FadingSpec | None = None) -> np.ndarray:
    """Deterministic LOS component of ``G`` (before the Rician weighting)."""
    fading = fading or FadingSpec()
    rho, a_ris, a_bs, _ = _los_pair(geom, fading, geom.bs_position, geom.bs_dims)
    return rho * np.outer(a_ris, a_bs)


def los_ris_user(geom: Geometry, fading: FadingSpec | None = None) -> np.ndarray:
    """Deterministic LOS component of ``f`` (before the Rician weighting)."""
    fading = fading or FadingSpec()
    rho, a_ris, _, _ = _los_pair(geom, fading, geom.user_position, (1, 1))
    return np.conj(rho * a_ris)


def _nlos(gen, n_paths, ris_dims, far_dims, d_over_l, amp):
    n = ris_dims[0] * ris_dims[1]
    m = far_dims[0] * far_dims[1]
    out = np.zeros((n, m), dtype=complex)
    if n_paths == 0:
        return out
    for _ in range(n_paths):
        az_r, el_r, az_f, el_f = gen.uniform(-np.pi / 2, np.pi / 2, size=4)
        gain = amp * math.sqrt(1.0 / n_paths) * (gen.standard_normal() + 1j * gen.standard_normal()) / math.sqrt(2)
        out += gain * np.outer(upa_steering(az_r, el_r, ris_dims, d_over_l),
                               upa_steering(az_f, el_f, far_dims, d_over_l))
    return out


def _rician(los, nlos, fading):
    if fading.n_los == 0:
        return nlos
    if math.isinf(fading.kappa):
        return los
    k = fading.kappa
    return math.sqrt(k / (k + 1)) * los + math.sqrt(1 / (k + 1)) * nlos


def generate_channels(geom: Geometry, fading: FadingSpec, rng) -> ChannelRealization:
    """Draw one Rician realization of ``G`` and ``f``.

    NLOS paths have uniform angles on the front half-space and CN gains
    normalized so that ``E||G_nlos||_F^2 = ||G_los||_F^2`` (same for ``f``).
    """
    gen = _gen(rng)
    d_over_l = geom.spacing / geom.wavelength

    rho_g, a_ris_g, a_bs, _ = _los_pair(geom, fading, geom.bs_position, geom.bs_dims)
    G_los = rho_g * np.outer(a_ris_g, a_bs)
    G_nlos = _nlos(gen, fading.n_nlos, geom.ris_dims, geom.bs_dims, d_over_l, abs(rho_g))

    rho_f, a_ris_f, _, _ = _los_pair(geom, fading, geom.user_position, (1, 1))
    f_los = np.conj(rho_f * a_ris_f)
    f_nlos = np.conj(_nlos(gen, fading.n_nlos, geom.ris_dims, (1, 1), d_over_l, abs(rho_f))[:, 0])

    return ChannelRealization(G=_rician(G_los, G_nlos, fading), f=_rician(f_los, f_nlos, fading))


def bs_steering_beam(geom: Geometry, p_max: float) -> np.ndarray:
    """BS precoder steering full power at the RIS centre (used during CSI
    acquisition and by the IRF branch)."""
    bs_c = geom.array_center(geom.bs_position, geom.bs_dims)
    ris_c = geom.array_center(geom.ris_position, geom.ris_dims)
    a = upa_steering(*direction_angles(bs_c, ris_c), geom.bs_dims, geom.spacing / geom.wavelength)
    return math.sqrt(p_max / geom.n_bs) * np.conj(a)


def los_link_phase(geom: Geometry, w, n=None):
    """Geometry-derived phase ``arg(g_los[n]^T w)`` assumed known by the IRF
    beamformer. ``n=None`` returns the phases of all elements."""
    G_los = los_bs_ris(geom)
    w = np.asarray(w, dtype=complex)
    if n is None:
        return np.angle(G_los @ w)
    if not 0 <= n < geom.n_ris:
        raise IndexError(f"element index {n} out of range for N={geom.n_ris}")
    return float(np.angle(G_los[n] @ w))


def sample_geometry(rng, ris_dims=(8, 4), bs_dims=(2, 2), carrier_frequency=10e9,
                    bs_range=(20.0, 100.0), user_range=(10.0, 100.0)) -> Geometry:
    """Random scenario: RIS at the origin, BS and user at uniform distances
    with directions uniform over the RIS front half-space."""
    gen = _gen(rng)

    def point(lo, hi):
        d = gen.uniform(lo, hi)
        az, el = gen.uniform(-np.pi / 2, np.pi / 2, size=2)
        return (d * math.cos(el) * math.cos(az), d * math.cos(el) * math.sin(az), d * math.sin(el))

    return Geometry(bs_position=point(*bs_range), user_position=point(*user_range),
                    ris_dims=tuple(ris_dims), bs_dims=tuple(bs_dims),
                    carrier_frequency=carrier_frequency)


__all__ = [
    "Geometry", "FadingSpec", "ChannelRealization",
    "upa_steering", "direction_angles", "generate_channels", "los_bs_ris",
    "los_ris_user", "los_link_phase", "bs_steering_beam", "sample_geometry",
]
