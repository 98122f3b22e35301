"""Synthetic municipality datasets with a known first-percentile envelope.

Each municipality gets y = max(0, b0 + b1 * ln P + eta) with eta exponential,
so the ground-truth line is the lower envelope of the cloud and its first
percentile sits only -m * ln(0.99) above it.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .data_io import Dataset, Municipality
from .errors import InvalidArgumentError
from .strata import DEFAULT_BOUNDARIES, REFERENCE_1999_COEFFICIENTS, StratumSpec

OPEN_STRATUM_SPAN = 30.0


@dataclass(frozen=True)
class GeneratorSpec:
    coefficients: tuple[tuple[float, float], ...] = REFERENCE_1999_COEFFICIENTS
    per_stratum: int = 1000
    population_range: tuple[int, int] = (50, 4999)
    noise_mean: float = 0.05
    seed: int = 0
    years: tuple[str, ...] = ("1999",)
    boundaries: tuple[float, ...] = DEFAULT_BOUNDARIES

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple((float(a), float(b)) for a, b in self.coefficients))
        object.__setattr__(self, "population_range", tuple(int(v) for v in self.population_range))
        object.__setattr__(self, "years", tuple(str(y) for y in self.years))
        object.__setattr__(self, "boundaries", tuple(float(b) for b in self.boundaries))
        lo, hi = self.population_range
        if lo < 1 or hi < lo:
            raise InvalidArgumentError(f"invalid population range {self.population_range}")
        if self.per_stratum <= 0:
            raise InvalidArgumentError("per_stratum must be positive")
        if not (math.isfinite(self.noise_mean) and self.noise_mean > 0):
            raise InvalidArgumentError("noise_mean must be > 0")
        if not self.years:
            raise InvalidArgumentError("at least one year is required")
        if len(self.coefficients) != len(self.spec):
            raise InvalidArgumentError(
                f"{len(self.coefficients)} coefficient pairs for {len(self.spec)} strata"
            )
        if not 0 <= self.seed < 2**64:
            raise InvalidArgumentError("seed must be a 64-bit unsigned integer")

    @property
    def spec(self) -> StratumSpec:
        return StratumSpec(self.boundaries)

    def to_dict(self) -> dict:
        return {
            "coefficients": [list(c) for c in self.coefficients],
            "per_stratum": self.per_stratum,
            "population_range": list(self.population_range),
            "noise_mean": self.noise_mean,
            "seed": self.seed,
            "years": list(self.years),
            "boundaries": list(self.boundaries),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise InvalidArgumentError(f"unknown generator fields: {sorted(unknown)}")
        kwargs = dict(d)
        for key in ("coefficients", "population_range", "years", "boundaries"):
            if key in kwargs:
                kwargs[key] = tuple(tuple(v) if isinstance(v, list) else v for v in kwargs[key])
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path: str | os.PathLike) -> "GeneratorSpec":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class StratumSample:
    """Raw draws for one stratum and year, before quantizing jobs."""

    population: np.ndarray
    y: np.ndarray
    noise: np.ndarray
    jobs: np.ndarray = field(init=False)

    def __post_init__(self):
        self.jobs = np.rint(self.y * self.population).astype(np.int64)


def sample_stratum(rng: np.random.Generator, intercept: float, slope: float, count: int,
                   population_range: tuple[int, int], noise_mean: float) -> StratumSample:
    lo, hi = population_range
    pop = np.rint(np.exp(rng.uniform(math.log(lo), math.log(hi), count)))
    pop = np.clip(pop, lo, hi)
    noise = rng.exponential(noise_mean, count)
    y = np.maximum(0.0, intercept + slope * np.log(pop) + noise)
    return StratumSample(pop.astype(np.int64), y, noise)


def draw_tmfm(rng: np.random.Generator, lo: float, hi: float, count: int) -> np.ndarray:
    """Uniform draws on ]lo, hi]."""
    t = lo + (hi - lo) * (1.0 - rng.random(count))
    # guard the open end against rounding onto lo
    return np.where(t > lo, t, hi)


def generate(spec: GeneratorSpec) -> Dataset:
    """Build a synthetic Dataset; identical specs give identical datasets."""
    rng = np.random.default_rng(spec.seed)
    strata = spec.spec
    municipalities: list[Municipality] = []
    for s in strata.strata:
        lo, hi = strata.interval(s.index)
        if math.isinf(hi):
            hi = lo + OPEN_STRATUM_SPAN
        b0, b1 = spec.coefficients[s.index]
        tmfm = draw_tmfm(rng, lo, hi, spec.per_stratum)
        samples = {
            year: sample_stratum(rng, b0, b1, spec.per_stratum, spec.population_range, spec.noise_mean)
            for year in spec.years
        }
        for i in range(spec.per_stratum):
            municipalities.append(
                Municipality(
                    id=f"S{s.index}-{i:05d}",
                    population={y: int(samples[y].population[i]) for y in spec.years},
                    service_jobs={y: int(samples[y].jobs[i]) for y in spec.years},
                    tmfm_minutes=float(tmfm[i]),
                )
            )
    provenance = "synthetic: " + json.dumps(spec.to_dict(), sort_keys=True)
    return Dataset(municipalities, spec.years, provenance)
