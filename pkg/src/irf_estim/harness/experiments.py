"""The five experiments. Each takes an :class:`ExperimentConfig` and returns a
:class:`ResultTable`.

Monte-Carlo work is split into fixed blocks, each with its own random stream,
so results are bitwise identical for any thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

from ..beamforming import (LinkBudget, alternating_beamform, dbm_to_watt, irf_beamform,
                           ls_channel_estimate, random_phase_config, simulate_ls_pilots, snr,
                           spectral_efficiency)
from ..channel import FadingSpec, bs_steering_beam, generate_channels, los_link_phase, sample_geometry
from ..crlb import CrlbQuery, crlb_asymptotic, crlb_exact, expansion_error
from ..estimators import dft_phase, estimate_amplitude, newton_ml_phase, vm_em_phase
from ..irf import IrfElementParams, SensorModel, generate_amplitude_slot, generate_irf_samples, params_from_contrast
from ..numerics import SeededRng, circular_squared_error, wrap_phase
from .config import ExperimentConfig
from .results import ResultTable, build_id

IRF_PILOT_SLOTS = 3
ESTIMATORS = ("dft", "newton", "vmem")
# stream index reserved for the per-trial streams of the SE experiment
_SE_STREAM = 0


def _map(fn: Callable, items: Sequence, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _blocks(trials: int, size: int) -> list[tuple[int, int]]:
    return [(b, min(size, trials - b * size)) for b in range(math.ceil(trials / size))]


def _mean_se(chunks: list[np.ndarray]) -> tuple[float, float]:
    """Order-independent mean and standard error of the concatenated chunks."""
    x = np.concatenate(chunks)
    n = x.size
    mean = math.fsum(x) / n
    if n < 2:
        return mean, 0.0
    var = math.fsum((x - mean) ** 2) / (n - 1)
    return mean, math.sqrt(var / n)


def _db(x: float) -> float:
    return math.inf if x == math.inf else 10 * math.log10(x)


def _metadata(cfg: ExperimentConfig, **extra) -> dict:
    return {"experiment": cfg.experiment, "seed": cfg.seed, "build_id": build_id(),
            "config": cfg.echo(), **extra}


def _sensor(cfg: ExperimentConfig) -> SensorModel:
    return SensorModel(amplification=cfg.A, noise_var=cfg.noise_var, sensor_std=cfg.sigma_zeta, L=cfg.L)


def estimator_block(alpha: float, beta: float, sensor: SensorModel, iterations: int,
                    rng: SeededRng, n: int) -> np.ndarray:
    """Squared circular errors of DFT, Newton-ML and VM-EM on ``n`` trials.

    The true phase is uniform on the circle in every trial. Returns shape
    ``(3, n)`` in the order of :data:`ESTIMATORS`.
    """
    gen = rng.generator
    phi = wrap_phase(gen.uniform(0.0, 2 * np.pi, n))
    P = generate_irf_samples(IrfElementParams(alpha, beta, phi), sensor, gen)
    est = (
        dft_phase(P).phi_hat,
        newton_ml_phase(P, alpha, beta, sensor, max_iters=iterations).phi_hat,
        vm_em_phase(P, alpha, beta, sensor, max_iters=iterations).phi_hat,
    )
    return np.stack([circular_squared_error(e, phi) for e in est])


def _mse_sweep(cfg: ExperimentConfig, points: list[tuple[float, float]], threads: int):
    """Per point ``(K, gamma_bar)``: MSE and standard error of each estimator."""
    sensor = _sensor(cfg)
    tasks = [(i, b, n) for i in range(len(points)) for b, n in _blocks(cfg.trials, cfg.block_size)]

    def work(task):
        i, b, n = task
        K, gb = points[i]
        alpha, beta = params_from_contrast(K, gb, cfg.noise_var)
        return estimator_block(alpha, beta, sensor, cfg.iterations, SeededRng(cfg.seed, (i, b)), n)

    out = _map(work, tasks, threads)
    stats = []
    for i in range(len(points)):
        chunks = [r for (j, _, _), r in zip(tasks, out) if j == i]
        stats.append([_mean_se([c[k] for c in chunks]) for k in range(len(ESTIMATORS))])
    return stats


def _mse_table(cfg: ExperimentConfig, lead: str, lead_values, points, threads) -> ResultTable:
    stats = _mse_sweep(cfg, points, threads)
    cols = [lead] + [f"mse_{e}" for e in ESTIMATORS] + [f"mse_{e}_se" for e in ESTIMATORS] + [
        "crlb_exact", "crlb_asymptotic"]
    rows = []
    for v, (K, gb), st in zip(lead_values, points, stats):
        q = CrlbQuery(K=K, gamma_bar=gb, phi=0.0, L=cfg.L)
        rows.append([v] + [_db(m) for m, _ in st] + [s for _, s in st]
                    + [_db(crlb_exact(q)), _db(crlb_asymptotic(q))])
    meta = _metadata(cfg, units="mse_* and crlb_* in dB re 1 rad^2; mse_*_se in rad^2 (linear)")
    return ResultTable(cols, rows, meta, inf_columns=("crlb_exact", "crlb_asymptotic"))


def run_mse_vs_k(cfg: ExperimentConfig, threads: int = 1) -> ResultTable:
    """MSE of the three estimators against contrast ``K`` at fixed ``gamma_bar``."""
    points = [(K, cfg.gamma_bar) for K in cfg.grid]
    return _mse_table(cfg, "K", cfg.grid, points, threads)


def run_mse_vs_gamma(cfg: ExperimentConfig, threads: int = 1) -> ResultTable:
    """MSE against ``gamma_bar`` (grid in dB) at fixed ``K``."""
    points = [(cfg.K, 10 ** (g / 10)) for g in cfg.grid]
    return _mse_table(cfg, "gamma_bar_db", cfg.grid, points, threads)


def crlb_map_flags(Ks, gammas_db, inv: np.ndarray) -> dict[str, bool]:
    """Shape checks on a ``1/CRLB`` map indexed ``[K, gamma]``.

    Monotonicity in ``|K|`` is checked at ``gamma_bar >= 5`` only.
    """
    Ks = np.asarray(Ks, dtype=float)
    g_lin = 10 ** (np.asarray(gammas_db, dtype=float) / 10)
    absK = np.abs(Ks)
    order = np.argsort(absK, kind="stable")
    nonzero = absK > 0
    mono_gamma = bool(np.all(np.diff(inv[nonzero], axis=1) >= 0))
    hi = g_lin >= 5
    mono_k = bool(np.all(np.diff(inv[order][:, hi], axis=0) >= 0))
    best = absK[np.argmax(inv, axis=0)]
    return {
        "nondecreasing_in_gamma": mono_gamma,
        "nondecreasing_in_abs_K_at_gamma_ge_5": mono_k,
        "argmax_abs_K_is_one": bool(np.all(best == 1.0)) if np.any(absK == 1.0) else False,
        "K0_row_zero": bool(np.all(inv[~nonzero] == 0)),
    }


def run_crlb_map(cfg: ExperimentConfig, threads: int = 1) -> ResultTable:
    """``1/CRLB`` over the ``K`` grid times the ``gamma_bar`` dB grid."""
    pairs = [(K, g) for K in cfg.grid for g in cfg.gamma_db_grid]

    def work(pair):
        K, g = pair
        return 1.0 / crlb_exact(CrlbQuery(K=K, gamma_bar=10 ** (g / 10), phi=cfg.phi, L=cfg.L))

    inv = _map(work, pairs, threads)
    grid = np.array(inv).reshape(len(cfg.grid), len(cfg.gamma_db_grid))
    flags = crlb_map_flags(cfg.grid, cfg.gamma_db_grid, grid)
    rows = [[K, g, v] for (K, g), v in zip(pairs, inv)]
    meta = _metadata(cfg, **{f"flag_{k}": int(v) for k, v in flags.items()})
    return ResultTable(["K", "gamma_bar_db", "inv_crlb"], rows, meta)


def se_trial(cfg: ExperimentConfig, trial: int) -> np.ndarray:
    """Spectral efficiencies ``(oracle, irf_vmem, lsce, random)`` at every power point."""
    fading = FadingSpec(kappa=cfg.kappa)
    budget = LinkBudget(n0_dbm_hz=cfg.n0, bandwidth=cfg.bw, sensor_bandwidth=cfg.sensor_bandwidth,
                        sensor_noise_figure_db=cfg.f_p)
    sv2, sz2 = budget.sensor_noise, budget.receiver_noise
    # amplifier normalizes the field noise to unit power at the detector
    sensor = SensorModel(amplification=1 / sv2, noise_var=sv2, sensor_std=cfg.sigma_zeta, L=cfg.L)
    root = SeededRng(cfg.seed, (_SE_STREAM, trial))
    geom = sample_geometry(root.child(0), ris_dims=cfg.ris_dims, bs_dims=cfg.bs_dims,
                           carrier_frequency=cfg.f_c)
    ch = generate_channels(geom, fading, root.child(1))
    n = geom.n_ris
    pilots = cfg.pilots or n
    w_user = math.sqrt(cfg.p_user_max)
    psi = None
    out = np.empty((len(cfg.grid), 4))
    for i, p_dbm in enumerate(cfg.grid):
        gen = root.child(2 + i).generator
        p_max = float(dbm_to_watt(p_dbm))
        w = bs_steering_beam(geom, p_max)
        if psi is None:
            psi = los_link_phase(geom, w)  # scale-invariant in p_max
        # IRF: two amplitude slots and one rotational slot
        bs_field = ch.G @ w
        user_field = np.conj(ch.f) * w_user
        a_hat = estimate_amplitude(generate_amplitude_slot(np.abs(bs_field), sensor, gen), sensor)
        b_hat = estimate_amplitude(generate_amplitude_slot(np.abs(user_field), sensor, gen), sensor)
        truth = IrfElementParams(np.abs(bs_field), np.abs(user_field),
                                 wrap_phase(np.angle(user_field) - np.angle(bs_field)))
        samples = generate_irf_samples(truth, sensor, gen)
        phi_hat = vm_em_phase(samples, a_hat, b_hat, sensor, max_iters=cfg.iterations).phi_hat
        s_irf = snr(ch, irf_beamform(phi_hat, psi), w, sz2)
        # oracle from the same starting beam, so it can only improve on it
        th_o, w_o = alternating_beamform(ch.H, p_max, sz2, w0=w)
        s_oracle = snr(ch, th_o, w_o, sz2)
        data = simulate_ls_pilots(ch.H, pilots, budget.pilot_noise, gen, user_gain=w_user)
        th_l, w_l = alternating_beamform(ls_channel_estimate(data), p_max, sz2, w0=w)
        s_ls = snr(ch, th_l, w_l, sz2)
        s_rand = snr(ch, random_phase_config(n, gen), w, sz2)
        out[i] = spectral_efficiency(np.array([s_oracle, s_irf, s_ls, s_rand]))
    return out


def run_spectral_efficiency(cfg: ExperimentConfig, threads: int = 1) -> ResultTable:
    """Trial-mean spectral efficiency of the oracle, IRF (VM-EM), LS-CE and
    random configurations against the BS power budget (grid in dBm)."""
    blocks = _blocks(cfg.trials, cfg.block_size)

    def work(block):
        b, n = block
        start = b * cfg.block_size
        return np.stack([se_trial(cfg, t) for t in range(start, start + n)])

    per_trial = np.concatenate(_map(work, blocks, threads))  # (trials, points, 4)
    n = cfg.ris_dims[0] * cfg.ris_dims[1]
    pilots = cfg.pilots or n
    rows = []
    for i, p in enumerate(cfg.grid):
        means = [math.fsum(per_trial[:, i, k]) / cfg.trials for k in range(4)]
        rows.append([p, *means, IRF_PILOT_SLOTS, pilots])
    cols = ["P_max_dBm", "se_oracle", "se_irf_vmem", "se_lsce", "se_random", "pilots_irf", "pilots_lsce"]
    return ResultTable(cols, rows, _metadata(cfg, n_ris=n, units="bit/s/Hz"))


def pilot_overhead(n_elements: int, lsce_pilots: int | None = None) -> dict[str, int]:
    """CSI-acquisition slots of each scheme for an ``n_elements`` RIS."""
    return {"irf": IRF_PILOT_SLOTS, "lsce": lsce_pilots or n_elements}


def run_expansion_error(cfg: ExperimentConfig, threads: int = 1) -> ResultTable:
    """Tabulate ``x (1 - R(2 sqrt x)^2) - sqrt(x)/2`` and its maximum magnitude."""
    x = np.asarray(cfg.grid, dtype=float)
    d = np.atleast_1d(expansion_error(x))
    rows = [[xi, di] for xi, di in zip(x.tolist(), d.tolist())]
    meta = _metadata(cfg, max_abs_delta=repr(float(np.max(np.abs(d)))))
    return ResultTable(["x", "delta"], rows, meta)


RUNNERS = {
    "crlb-map": run_crlb_map,
    "mse-vs-k": run_mse_vs_k,
    "mse-vs-gamma": run_mse_vs_gamma,
    "spectral-efficiency": run_spectral_efficiency,
    "expansion-error": run_expansion_error,
}


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> ResultTable:
    table = RUNNERS[cfg.experiment](cfg, threads=threads)
    table.validate()
    return table
