"""Experiment configuration: flat key-value files (TOML or JSON) or the config
echo embedded in a previously written result CSV."""

from __future__ import annotations

import dataclasses
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..errors import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

EXPERIMENTS = ("crlb-map", "mse-vs-k", "mse-vs-gamma", "spectral-efficiency", "expansion-error")

_DEFAULT_TRIALS = {
    "crlb-map": 1,
    "mse-vs-k": 10_000,
    "mse-vs-gamma": 10_000,
    "spectral-efficiency": 500,
    "expansion-error": 1,
}


def default_grid(experiment: str) -> list[float]:
    """Primary sweep of each experiment (K, gamma_bar in dB, P_max in dBm or x)."""
    if experiment == "mse-vs-k":
        return [round(0.1 * k, 10) for k in range(1, 10)] + [0.95]
    if experiment == "mse-vs-gamma":
        return [10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0]
    if experiment == "crlb-map":
        return [float(k) for k in np.linspace(0.0, 1.0, 20)]
    if experiment == "spectral-efficiency":
        return [0.0, 10.0, 20.0, 30.0, 40.0, 50.0]
    if experiment == "expansion-error":
        return [round(1e-3 * k, 10) for k in range(5001)]
    raise ConfigError(f"unknown experiment {experiment!r}")


@dataclass
class ExperimentConfig:
    """Every knob of the five experiments.

    ``grid`` is the primary sweep: contrast ``K`` (mse-vs-k, crlb-map),
    ``gamma_bar`` in dB (mse-vs-gamma), ``P_max`` in dBm (spectral-efficiency)
    or ``x`` (expansion-error). ``gamma_db_grid`` is the second axis of the
    CRLB map. ``trials`` and ``grid`` default per experiment.
    """

    experiment: str
    seed: int = 0
    trials: int | None = None
    grid: list[float] | None = None
    # phase-estimation scenario
    L: int = 64
    A: float = 1.0
    sigma_zeta: float = 0.05
    noise_var: float = 1.0
    gamma_bar: float = 20.0
    K: float = 0.6
    iterations: int = 4
    phi: float = 0.0
    gamma_db_grid: list[float] = field(default_factory=lambda: [2.0 * k for k in range(20)])
    # beamforming scenario
    ris_dims: list[int] = field(default_factory=lambda: [8, 4])
    bs_dims: list[int] = field(default_factory=lambda: [2, 2])
    kappa: float = 2.0
    f_c: float = 10e9
    bw: float = 180e3
    n0: float = -174.0
    f_p: float = 10.0
    sensor_bandwidth: float = 100e6
    p_user_max: float = 0.3
    pilots: int | None = None
    # Monte-Carlo bookkeeping; changing it changes the random streams
    block_size: int = 1000

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        if self.trials is None:
            self.trials = _DEFAULT_TRIALS[self.experiment]
        if self.grid is None:
            self.grid = default_grid(self.experiment)
        self._validate()

    def _validate(self):
        ints = {"seed": self.seed, "trials": self.trials, "L": self.L, "iterations": self.iterations,
                "block_size": self.block_size}
        for name, v in ints.items():
            if isinstance(v, bool) or not isinstance(v, int):
                raise ConfigError(f"{name} must be an integer")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.L < 3:
            raise ConfigError("L must be >= 3")
        if self.iterations < 1 or self.block_size < 1:
            raise ConfigError("iterations and block_size must be >= 1")
        for name in ("grid", "gamma_db_grid"):
            g = getattr(self, name)
            if not isinstance(g, list) or not g:
                raise ConfigError(f"{name} must be a nonempty list")
            try:
                g = [float(x) for x in g]
            except (TypeError, ValueError):
                raise ConfigError(f"{name} must contain numbers") from None
            if not all(math.isfinite(x) for x in g):
                raise ConfigError(f"{name} must be finite")
            if any(b < a for a, b in zip(g, g[1:])):
                raise ConfigError(f"{name} must be sorted ascending")
            setattr(self, name, g)
        floats = ("A", "sigma_zeta", "noise_var", "gamma_bar", "K", "phi", "kappa", "f_c", "bw", "n0",
                  "f_p", "sensor_bandwidth", "p_user_max")
        for name in floats:
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"{name} must be a number")
            setattr(self, name, float(v))
        for name in ("A", "noise_var", "gamma_bar", "f_c", "bw", "sensor_bandwidth", "p_user_max"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.sigma_zeta < 0 or self.kappa < 0:
            raise ConfigError("sigma_zeta and kappa must be nonnegative")
        if not 0 <= self.K <= 1:
            raise ConfigError("K must lie in [0, 1]")
        if self.experiment in ("mse-vs-k", "crlb-map") and not all(-1 <= k <= 1 for k in self.grid):
            raise ConfigError("K grid values must lie in [-1, 1]")
        if self.experiment == "mse-vs-k" and any(k < 0 for k in self.grid):
            raise ConfigError("mse-vs-k needs K >= 0 (amplitudes are nonnegative)")
        if self.experiment == "expansion-error" and self.grid[0] < 0:
            raise ConfigError("expansion-error grid must be nonnegative")
        for name in ("ris_dims", "bs_dims"):
            d = getattr(self, name)
            if (not isinstance(d, (list, tuple)) or len(d) != 2
                    or not all(isinstance(x, int) and not isinstance(x, bool) and x >= 1 for x in d)):
                raise ConfigError(f"{name} must be two positive integers")
            setattr(self, name, [int(x) for x in d])
        if self.pilots is not None:
            n = self.ris_dims[0] * self.ris_dims[1]
            if isinstance(self.pilots, bool) or not isinstance(self.pilots, int) or not 1 <= self.pilots <= n:
                raise ConfigError("pilots must be an integer in [1, N]")

    @classmethod
    def from_mapping(cls, data: dict[str, Any], **overrides) -> "ExperimentConfig":
        """Build from a flat mapping; unknown keys are rejected."""
        merged = {**data, **{k: v for k, v in overrides.items() if v is not None}}
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(merged) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        for k, v in merged.items():
            if isinstance(v, dict):
                raise ConfigError(f"config must be flat; {k!r} is a table")
        if "experiment" not in merged:
            raise ConfigError("experiment id missing")
        return cls(**merged)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def echo(self) -> str:
        """Canonical one-line JSON used as the config echo in result files."""
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def read_config_file(path: str | Path) -> dict[str, Any]:
    """Parse a TOML/JSON config, or the ``# config:`` echo of a result CSV."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    suffix = path.suffix.lower()
    try:
        if suffix == ".json":
            data = json.loads(text)
        elif suffix == ".csv":
            for line in text.splitlines():
                if line.startswith("# config:"):
                    data = json.loads(line[len("# config:"):])
                    break
            else:
                raise ConfigError(f"{path} carries no config echo")
        else:
            data = tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a key-value mapping")
    return data


def load_config(path: str | Path | None, experiment: str | None = None, **overrides) -> ExperimentConfig:
    """Load a config file (optional) and apply command-line overrides.

    An experiment id given on the command line must agree with the file.
    """
    data = read_config_file(path) if path is not None else {}
    if experiment is not None:
        if "experiment" in data and data["experiment"] != experiment:
            raise ConfigError(f"config is for {data['experiment']!r}, not {experiment!r}")
        data = {**data, "experiment": experiment}
    return ExperimentConfig.from_mapping(data, **overrides)
