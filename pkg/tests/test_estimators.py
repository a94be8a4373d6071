import math

import numpy as np
import pytest
from scipy import integrate, stats

from irf_estim.crlb import CrlbQuery, crlb_exact
from irf_estim.errors import DomainError, UndefinedPhaseError
from irf_estim.estimators import (Method, VonMisesParams, dft_phase, estimate_amplitude, ml_derivatives,
                                  ml_log_likelihood, newton_ml_phase, vm_circle_posterior, vm_em_phase,
                                  vm_posterior_update)
from irf_estim.irf import IrfElementParams, SensorModel, generate_irf_samples, params_from_contrast
from irf_estim.numerics import SeededRng, circular_squared_error, wrap_phase

import oracles


def _batch(K, gb, n, seed, L=64, sensor_std=0.0):
    sensor = SensorModel(noise_var=1.0, sensor_std=sensor_std, L=L)
    a, b = params_from_contrast(K, gb)
    gen = SeededRng(seed).generator
    phi = wrap_phase(gen.uniform(0, 2 * np.pi, n))
    P = generate_irf_samples(IrfElementParams(a, b, phi), sensor, gen)
    return P, phi, a, b, sensor


def test_dft_noiseless_exact():
    P = oracles.noiseless_samples(1.0, 0.7, 2.5, 12)
    res = dft_phase(P)
    assert res.phi_hat == pytest.approx(2.5, abs=1e-12)
    assert res.iterations == 0 and res.converged is True and res.method is Method.DFT


def test_dft_undefined_phase():
    with pytest.raises(UndefinedPhaseError):
        dft_phase(np.zeros(8))
    with pytest.raises(DomainError):
        dft_phase(np.ones(2))


def test_dft_mse_between_crlb_and_crlb_plus_3db():
    P, phi, *_ = _batch(0.9, 20.0, 10_000, seed=4)
    mse = np.mean(circular_squared_error(dft_phase(P).phi_hat, phi))
    bound = crlb_exact(CrlbQuery(0.9, 20.0))
    assert bound <= mse <= 2 * bound


def test_log_likelihood_matches_independent_density():
    P, phi, a, b, sensor = _batch(0.7, 5.0, 1, seed=3, L=16)
    for trial_phi in (phi[0], phi[0] + 0.4, -1.0):
        ours = ml_log_likelihood(trial_phi, P[0], a, b, sensor)
        ref = float(oracles.log_likelihood(trial_phi, P[0], a, b, 1.0, 1.0))
        assert ours == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("K,gb,seed", [(0.9, 20.0, 1), (0.5, 3.0, 2), (0.99, 200.0, 3)])
def test_likelihood_derivatives_against_finite_differences(K, gb, seed):
    P, phi, a, b, sensor = _batch(K, gb, 1, seed=seed)
    x = float(phi[0]) + 0.1
    h = 1e-4
    f = lambda t: ml_log_likelihood(t, P[0], a, b, sensor)
    d1, d2 = ml_derivatives(x, P[0], a, b, sensor)
    fd1 = (f(x + h) - f(x - h)) / (2 * h)
    fd2 = (f(x + h) - 2 * f(x) + f(x - h)) / h**2
    assert float(d1) == pytest.approx(fd1, rel=1e-5)
    assert float(d2) == pytest.approx(fd2, rel=1e-4)


def test_newton_matches_grid_search_ml():
    P, phi, a, b, sensor = _batch(0.9, 20.0, 1000, seed=8)
    est = newton_ml_phase(P, a, b, sensor).phi_hat
    grid = np.linspace(-np.pi, np.pi, 100_000, endpoint=False)
    hits = 0
    for k in range(P.shape[0]):
        # coarse then fine search on the exact likelihood
        ll = np.array([ml_log_likelihood(g, P[k], a, b, sensor) for g in grid[::100]])
        centre = grid[::100][np.argmax(ll)]
        local = centre + np.linspace(-0.01, 0.01, 201)
        best = local[np.argmax(ml_log_likelihood(local, np.broadcast_to(P[k], (201, 64)), a, b, sensor))]
        hits += abs(wrap_phase(est[k] - best)) <= 1e-3
    assert hits >= 990


def test_newton_degenerate_amplitudes_fall_back_to_dft():
    P, _, _, _, sensor = _batch(0.5, 10.0, 5, seed=1)
    res = newton_ml_phase(P, 0.0, 1.0, sensor)
    assert np.allclose(res.phi_hat, dft_phase(P).phi_hat)
    assert not np.any(res.converged)
    with pytest.raises(DomainError):
        newton_ml_phase(P, 1.0, 1.0, SensorModel(noise_var=0.0))


def test_newton_respects_iteration_cap_and_init():
    P, phi, a, b, sensor = _batch(0.9, 20.0, 50, seed=2)
    res = newton_ml_phase(P, a, b, sensor, init=phi, max_iters=2)
    assert res.iterations <= 2
    assert np.all(np.isfinite(res.phi_hat))


def test_vmem_basic_contract():
    P, phi, a, b, sensor = _batch(0.9, 20.0, 200, seed=5)
    res = vm_em_phase(P, a, b, sensor, max_iters=4)
    assert res.method is Method.VM_EM
    assert 1 <= res.iterations <= 4
    assert np.all((res.phi_hat > -np.pi) & (res.phi_hat <= np.pi))
    scalar = vm_em_phase(P[0], a, b, sensor)
    assert isinstance(scalar.phi_hat, float)
    assert scalar.phi_hat == pytest.approx(res.phi_hat[0], abs=1e-12)


def test_vmem_noiseless_high_snr_recovers_phase():
    a, b = params_from_contrast(0.8, 1e6)
    sensor = SensorModel(noise_var=1.0, L=32)
    P = oracles.noiseless_samples(a, b, -1.2, 32)
    assert vm_em_phase(P, a, b, sensor).phi_hat == pytest.approx(-1.2, abs=1e-6)


@pytest.mark.parametrize("estimator", ["dft", "newton", "vmem"])
def test_rotation_equivariance(estimator):
    # shifting phi by 2 pi m / L and rolling the noise shifts the estimate
    L, m = 64, 5
    sensor = SensorModel(noise_var=1.0, L=L)
    a, b = params_from_contrast(0.8, 15.0)
    gen = np.random.default_rng(11)
    v = (gen.standard_normal((20, L)) + 1j * gen.standard_normal((20, L))) / math.sqrt(2)
    psi = sensor.psi
    phi = gen.uniform(-np.pi, np.pi, 20)
    delta = 2 * np.pi * m / L
    P1 = np.abs(a + b * np.exp(1j * (psi + phi[:, None])) + v) ** 2
    # psi_l + delta = psi_{l+m}, so P2[l] reproduces P1[l+m]
    P2 = np.abs(a + b * np.exp(1j * (psi + phi[:, None] + delta)) + np.roll(v, -m, axis=1)) ** 2
    run = {"dft": lambda P: dft_phase(P).phi_hat,
           "newton": lambda P: newton_ml_phase(P, a, b, sensor).phi_hat,
           "vmem": lambda P: vm_em_phase(P, a, b, sensor).phi_hat}[estimator]
    e1, e2 = run(P1), run(P2)
    assert np.allclose(wrap_phase(e2 - e1 - delta), 0.0, atol=1e-9)


def test_amplitude_estimate():
    sensor = SensorModel(amplification=2.0, noise_var=0.5, L=64)
    slot = np.full(64, 2.0 * (1.5**2 + 0.5))
    assert estimate_amplitude(slot, sensor) == pytest.approx(1.5)
    assert estimate_amplitude(np.zeros(64), sensor) == 0.0
    with pytest.raises(DomainError):
        estimate_amplitude(np.zeros(10), sensor)


def test_von_mises_params():
    vm = VonMisesParams(0.5, 3.0)
    back = VonMisesParams.from_natural(vm.natural)
    assert back.mu == pytest.approx(0.5) and back.kappa == pytest.approx(3.0)
    theta = np.linspace(-np.pi, np.pi, 20001)
    assert integrate.trapezoid(vm.pdf(theta), theta) == pytest.approx(1.0, abs=1e-9)
    assert np.allclose(vm.pdf(theta), stats.vonmises.pdf(theta, 3.0, loc=0.5))
    assert np.isfinite(VonMisesParams(0.0, 1e6).pdf(0.0))
    with pytest.raises(DomainError):
        VonMisesParams(0.0, -1.0)


def test_vm_posterior_update_matches_grid_posterior():
    prior = VonMisesParams(0.7, 2.0)
    z, var = 0.3 - 0.8j, 0.6
    post = vm_posterior_update(prior, z, var)
    theta = np.linspace(-np.pi, np.pi, 100_001)
    dtheta = theta[1] - theta[0]
    like = np.exp(-np.abs(z - np.exp(1j * theta)) ** 2 / var)
    grid = prior.pdf(theta) * like
    grid /= np.sum(grid[:-1]) * dtheta
    tv = 0.5 * np.sum(np.abs(grid - post.pdf(theta))[:-1]) * dtheta
    assert tv < 1e-6
    with pytest.raises(DomainError):
        vm_posterior_update(prior, z, 0.0)


def test_vm_circle_posterior_goodness_of_fit():
    z0, var, r = 1.0 + 0.5j, 1.0, 1.2
    gen = np.random.default_rng(21)
    z = z0 + math.sqrt(var / 2) * (gen.standard_normal(3_000_000) + 1j * gen.standard_normal(3_000_000))
    ang = np.angle(z[np.abs(np.abs(z) - r) < 0.01])
    post = vm_circle_posterior(z0, r, var)
    edges = np.linspace(-np.pi, np.pi, 21)
    cdf = stats.vonmises.cdf(edges, post.kappa, loc=post.mu)
    expected = np.diff(cdf) * ang.size
    observed, _ = np.histogram(ang, edges)
    assert stats.chisquare(observed, expected * observed.sum() / expected.sum()).pvalue > 0.01
