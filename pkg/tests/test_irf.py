import math

import numpy as np
import pytest

from irf_estim.channel import ChannelRealization
from irf_estim.errors import DomainError
from irf_estim.irf import (IrfElementParams, SensorModel, SignalingConfig, derive_element_params, derive_stats,
                           generate_amplitude_slot, generate_irf_samples, params_from_contrast)
from irf_estim.numerics import SeededRng

import oracles


def test_contrast_and_snr_example():
    stats = derive_stats(IrfElementParams(3.0, 1.0, 0.4), SensorModel(noise_var=0.5, L=64))
    assert stats.gamma_bar == pytest.approx(20.0, rel=1e-14)
    assert stats.K == pytest.approx(0.6)
    assert stats.a == 0.5
    assert np.allclose(stats.gamma_l, stats.lambda_l / stats.a)


def test_derive_stats_noiseless_gives_infinite_snr():
    stats = derive_stats(IrfElementParams(1.0, 1.0, 0.0), SensorModel(noise_var=0.0))
    assert stats.gamma_bar == math.inf
    assert np.all(np.isinf(stats.gamma_l))


def test_nonuniform_grid_uses_arithmetic_mean():
    phases = tuple(np.linspace(0, 1, 8))
    sensor = SensorModel(noise_var=1.0, L=8, phases=phases)
    stats = derive_stats(IrfElementParams(2.0, 1.0, 0.0), sensor)
    assert not sensor.uniform_grid
    assert stats.gamma_bar == pytest.approx(np.mean(stats.gamma_l))
    assert stats.gamma_bar != pytest.approx(5.0)


@pytest.mark.parametrize("K,gb,nv", [(0.0, 3.0, 1.0), (0.6, 20.0, 1.0), (0.9, 100.0, 0.25), (1.0, 7.0, 2.0)])
def test_params_from_contrast_round_trip(K, gb, nv):
    a, b = params_from_contrast(K, gb, nv)
    assert a >= b >= 0
    assert 2 * a * b / (a * a + b * b) == pytest.approx(K, abs=1e-12)
    assert (a * a + b * b) / nv == pytest.approx(gb, rel=1e-12)


def test_params_from_contrast_rejects_out_of_range():
    with pytest.raises(DomainError):
        params_from_contrast(1.1, 10.0)


def test_noiseless_samples_match_closed_form():
    sensor = SensorModel(amplification=2.5, noise_var=0.0, L=16)
    P = generate_irf_samples(IrfElementParams(1.3, 0.4, -2.0), sensor, SeededRng(0))
    assert np.allclose(P, oracles.noiseless_samples(1.3, 0.4, -2.0, 16, A=2.5), rtol=1e-14)


def test_batched_samples_shape_and_mean():
    sensor = SensorModel(amplification=1.5, noise_var=0.7, sensor_std=0.1, L=32)
    alpha, beta, phi = 1.2, 0.9, 0.3
    P = generate_irf_samples(IrfElementParams(np.full(20000, alpha), beta, phi), sensor, SeededRng(1))
    assert P.shape == (20000, 32)
    stats = derive_stats(IrfElementParams(alpha, beta, phi), sensor)
    expected = stats.lambda_l + stats.a
    se = P.std(axis=0) / math.sqrt(P.shape[0])
    assert np.all(np.abs(P.mean(axis=0) - expected) < 4 * se)


def test_amplitude_slot_statistics():
    sensor = SensorModel(amplification=2.0, noise_var=0.5, L=64)
    slot = generate_amplitude_slot(np.full(50000, 1.5), sensor, SeededRng(2))
    assert slot.mean() == pytest.approx(2.0 * (1.5**2 + 0.5), rel=2e-3)


def test_derive_element_params_from_channel():
    G = np.array([[1 + 1j, 0.5], [0, 0]])
    f = np.array([2j, 0])
    ch = ChannelRealization(G=G, f=f)
    w = np.array([1.0, -1j])
    p = derive_element_params(ch, w, 0.5, 0)
    bs = G[0] @ w
    user = np.conj(f[0]) * 0.5
    assert p.alpha == pytest.approx(abs(bs))
    assert p.beta == pytest.approx(abs(user))
    assert np.exp(1j * p.phi) == pytest.approx(np.exp(1j * (np.angle(user) - np.angle(bs))))
    dead = derive_element_params(ch, w, 0.5, 1)
    assert dead.alpha == 0 and dead.beta == 0 and dead.phi == 0.0
    with pytest.raises(IndexError):
        derive_element_params(ch, w, 0.5, 2)


def test_validation():
    with pytest.raises(DomainError):
        IrfElementParams(-1.0, 1.0, 0.0)
    with pytest.raises(DomainError):
        IrfElementParams(1.0, 1.0, math.nan)
    with pytest.raises(DomainError):
        SensorModel(L=2)
    with pytest.raises(DomainError):
        SensorModel(amplification=0.0)
    with pytest.raises(DomainError):
        SensorModel(L=4, phases=(0.0, 1.0))
    with pytest.raises(DomainError):
        SignalingConfig(subcarrier=2)
    with pytest.raises(DomainError):
        SignalingConfig(bs_symbol=2.0)


def test_rotation_phases_cover_one_period():
    psi = SignalingConfig().rotation_phases(8)
    assert psi[0] == 0 and psi[-1] == pytest.approx(2 * math.pi * 7 / 8)
    assert abs(np.exp(1j * psi).sum()) < 1e-12
