"""Synthetic wells drawn from known regression models.

Temperatures and responses use separate PRNG streams of the same seed, so
changing the coefficients never changes the temperature trajectories.
When no coefficients are given they are drawn so that the linear
predictor has a chosen mean and spread on the generated temperatures.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .dataset import WellSeries
from .errors import SimulationSpecError
from .features import FeatureSpec, expand, n_columns
from .glm import FAMILIES, NORMAL, POISSON
from .rng import Xoshiro256

TEMP_MIN = 0.0
TEMP_MAX = 700.0
ETA_LIMIT = 25.0

_TEMP_STREAM = 0
_FLUID_STREAM = 1
_GAS_STREAM = 2
_BETA_STREAM = 3
_MISSING_STREAM = 4


@dataclass(frozen=True)
class TempModel:
    """Each thermocouple follows ``base + offset + ramp * day + wave + noise``.

    ``offset`` is uniform in ``[-spread, spread]``, the per-sensor ramp is
    ``ramp`` scaled by a factor uniform in ``[0.5, 1.5]``, and ``wave`` is a
    sinusoid of amplitude up to ``amplitude`` with a period between 150 and
    600 days.
    """

    base: float = 350.0
    ramp: float = 0.05
    noise_std: float = 15.0
    amplitude: float = 60.0
    spread: float = 80.0


@dataclass(frozen=True)
class SimSpec:
    seed: int
    n_rows: int
    p: int
    true_family: str = POISSON
    true_degree: int = 1
    true_beta: tuple[float, ...] | None = None
    temp_model: TempModel = field(default_factory=TempModel)
    response_noise_sigma: float = 1.0
    gas_beta: tuple[float, ...] | None = None
    fluid_eta: tuple[float, float] = (2.5, 0.8)
    gas_eta: tuple[float, float] = (3.5, 0.8)
    gas_missing_rate: float = 0.0
    well_id: str = "W01"
    start_day: int = 0

    def __post_init__(self):
        if self.n_rows < 1:
            raise SimulationSpecError("n_rows must be >= 1")
        if self.p < 1:
            raise SimulationSpecError("p must be >= 1")
        if self.true_family not in FAMILIES:
            raise SimulationSpecError(f"unknown family {self.true_family!r}")
        if self.true_degree not in (1, 2):
            raise SimulationSpecError("true_degree must be 1 or 2")
        m = n_columns(self.p, self.true_degree)
        for name in ("true_beta", "gas_beta"):
            beta = getattr(self, name)
            if beta is not None and len(beta) != m:
                raise SimulationSpecError(f"{name} has {len(beta)} entries; degree {self.true_degree} with p={self.p} needs {m}")
        if not 0.0 <= self.gas_missing_rate < 1.0:
            raise SimulationSpecError("gas_missing_rate must lie in [0, 1)")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(f"THERMOCOUPLE {j + 1}" for j in range(self.p))


@dataclass(frozen=True, eq=False)
class GroundTruth:
    well_id: str
    family: str
    degree: int
    feature_spec: FeatureSpec
    fluid_beta: np.ndarray
    gas_beta: np.ndarray
    fluid_eta: np.ndarray
    gas_eta: np.ndarray

    def to_dict(self) -> dict:
        return {
            "well_id": self.well_id,
            "family": self.family,
            "degree": self.degree,
            "predictor_labels": list(self.feature_spec.predictor_labels),
            "centering_means": None
            if self.feature_spec.centering_means is None
            else list(self.feature_spec.centering_means),
            "term_labels": self.feature_spec.labels,
            "fluid_beta": [float(b) for b in self.fluid_beta],
            "gas_beta": [float(b) for b in self.gas_beta],
        }


def simulate_temperatures(spec: SimSpec) -> np.ndarray:
    tm = spec.temp_model
    rng = Xoshiro256(spec.seed, _TEMP_STREAM)
    day = np.arange(spec.start_day, spec.start_day + spec.n_rows, dtype=float)
    temps = np.empty((spec.n_rows, spec.p))
    for j in range(spec.p):
        offset = tm.spread * (2.0 * rng.uniform() - 1.0)
        ramp = tm.ramp * (0.5 + rng.uniform())
        amp = tm.amplitude * rng.uniform()
        period = 150.0 + 450.0 * rng.uniform()
        phase = 2.0 * math.pi * rng.uniform()
        noise = np.array([rng.normal() for _ in range(spec.n_rows)])
        temps[:, j] = (
            tm.base + offset + ramp * day + amp * np.sin(2.0 * math.pi * day / period + phase) + tm.noise_std * noise
        )
    return np.clip(temps, TEMP_MIN, TEMP_MAX)


def scaled_beta(design: np.ndarray, center: float, scale: float, rng: Xoshiro256) -> np.ndarray:
    """Random coefficients giving a linear predictor of mean ``center`` and spread about ``scale``."""
    m = design.shape[1]
    beta = np.zeros(m)
    if m > 1:
        sd = design[:, 1:].std(axis=0)
        sd[sd == 0] = 1.0
        weights = np.array([rng.normal() for _ in range(m - 1)])
        beta[1:] = scale * weights / (sd * math.sqrt(m - 1))
    beta[0] = center - float(np.mean(design[:, 1:] @ beta[1:])) if m > 1 else center
    return beta


def _sample(family: str, eta: np.ndarray, sigma: float, rng: Xoshiro256, label: str) -> np.ndarray:
    if family == NORMAL:
        return eta + sigma * np.array([rng.normal() for _ in range(eta.shape[0])])
    worst = int(np.argmax(eta))
    if eta[worst] > ETA_LIMIT:
        raise SimulationSpecError(
            f"{label}: linear predictor reaches {eta[worst]:.3g} at row {worst}, above the "
            f"overflow cap {ETA_LIMIT}; use smaller coefficients"
        )
    return np.array([rng.poisson(math.exp(e)) for e in eta], dtype=float)


def simulate_well(spec: SimSpec) -> tuple[WellSeries, GroundTruth]:
    """Generate one well and the model that produced its responses."""
    temps = simulate_temperatures(spec)
    fspec = FeatureSpec.fitted(temps, spec.labels, spec.true_degree)
    D = expand(temps, fspec).values
    beta_rng = Xoshiro256(spec.seed, _BETA_STREAM)
    fluid_beta = (
        np.asarray(spec.true_beta, dtype=float)
        if spec.true_beta is not None
        else scaled_beta(D, *spec.fluid_eta, beta_rng)
    )
    gas_beta = (
        np.asarray(spec.gas_beta, dtype=float) if spec.gas_beta is not None else scaled_beta(D, *spec.gas_eta, beta_rng)
    )
    fluid_eta = D @ fluid_beta
    gas_eta = D @ gas_beta
    fluid = _sample(spec.true_family, fluid_eta, spec.response_noise_sigma, Xoshiro256(spec.seed, _FLUID_STREAM), "fluid")
    gas = _sample(spec.true_family, gas_eta, spec.response_noise_sigma, Xoshiro256(spec.seed, _GAS_STREAM), "gas")
    if spec.gas_missing_rate > 0:
        rng = Xoshiro256(spec.seed, _MISSING_STREAM)
        missing = np.array([rng.uniform() < spec.gas_missing_rate for _ in range(spec.n_rows)])
        gas = np.where(missing, np.nan, gas)
    day = np.arange(spec.start_day, spec.start_day + spec.n_rows, dtype=np.int64)
    series = WellSeries(spec.well_id, day, temps, spec.labels, fluid, gas)
    truth = GroundTruth(spec.well_id, spec.true_family, spec.true_degree, fspec, fluid_beta, gas_beta, fluid_eta, gas_eta)
    return series, truth


def spec_to_dict(spec: SimSpec) -> dict:
    d = asdict(spec)
    for key in ("true_beta", "gas_beta", "fluid_eta", "gas_eta"):
        if d[key] is not None:
            d[key] = list(d[key])
    return d
