"""Travel-time strata and the per-stratum estimation pipeline."""

from __future__ import annotations

import bisect
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import DegenerateDesignError, IncompatibleModelsError, InvalidArgumentError, OutOfDomainError
from .quantreg import Observation, QuantileFit, fit_quantile_line, predict

logger = logging.getLogger(__name__)

DEFAULT_BOUNDARIES = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
DEFAULT_TAU = 0.01

# Published 1999 first-percentile coefficients, (intercept, slope) per stratum.
REFERENCE_1999_COEFFICIENTS = (
    (-0.084, 0.016),
    (-0.083, 0.016),
    (-0.079, 0.015),
    (-0.094, 0.018),
    (-0.097, 0.019),
    (-0.099, 0.019),
    (-0.112, 0.021),
)

SKIP_INSUFFICIENT = "insufficient observations"
SKIP_DEGENERATE = "degenerate design"


def _fmt(v: float) -> str:
    return f"{v:g}"


@dataclass(frozen=True)
class StratumId:
    index: int
    label: str


@dataclass(frozen=True)
class StratumSpec:
    """Left-open, right-closed travel-time intervals; the last one is open-ended."""

    boundaries: tuple[float, ...] = DEFAULT_BOUNDARIES

    def __post_init__(self):
        b = tuple(float(v) for v in self.boundaries)
        if not b:
            raise InvalidArgumentError("at least one boundary is required")
        if any(not math.isfinite(v) or v < 0 for v in b):
            raise InvalidArgumentError(f"boundaries must be finite and >= 0: {b}")
        if any(hi <= lo for lo, hi in zip(b, b[1:])):
            raise InvalidArgumentError(f"boundaries must be strictly increasing: {b}")
        object.__setattr__(self, "boundaries", b)

    def __len__(self) -> int:
        return len(self.boundaries)

    def label(self, index: int) -> str:
        if not 0 <= index < len(self):
            raise InvalidArgumentError(f"stratum index {index} out of range")
        b = self.boundaries
        if index == len(b) - 1:
            return f">{_fmt(b[-1])}"
        return f"]{_fmt(b[index])},{_fmt(b[index + 1])}]"

    def stratum(self, index: int) -> StratumId:
        return StratumId(index, self.label(index))

    @property
    def strata(self) -> list[StratumId]:
        return [self.stratum(i) for i in range(len(self))]

    def by_label(self, label: str) -> StratumId:
        for s in self.strata:
            if s.label == label:
                return s
        raise InvalidArgumentError(f"unknown stratum label {label!r}")

    def interval(self, index: int) -> tuple[float, float]:
        """(lo, hi] for a stratum; hi is infinite for the last one."""
        b = self.boundaries
        hi = b[index + 1] if index + 1 < len(b) else math.inf
        return b[index], hi


def stratum_of(spec: StratumSpec, tmfm_minutes: float) -> StratumId:
    """Stratum whose interval ]lo, hi] contains ``tmfm_minutes``."""
    if not math.isfinite(tmfm_minutes):
        raise InvalidArgumentError(f"travel time must be finite, got {tmfm_minutes!r}")
    if tmfm_minutes <= spec.boundaries[0]:
        raise OutOfDomainError(
            f"travel time {tmfm_minutes} is not above the first boundary {spec.boundaries[0]}"
        )
    return spec.stratum(bisect.bisect_left(spec.boundaries, tmfm_minutes) - 1)


@dataclass
class ModelSet:
    """Per-stratum fits for one census year."""

    year: str
    tau: float
    spec: StratumSpec
    fits: dict[StratumId, QuantileFit] = field(default_factory=dict)
    skipped: dict[StratumId, str] = field(default_factory=dict)

    def fit_for(self, stratum: StratumId | str) -> QuantileFit:
        if isinstance(stratum, str):
            stratum = self.spec.by_label(stratum)
        return self.fits[stratum]

    def to_dict(self) -> dict:
        strata = []
        for s in self.spec.strata:
            entry = {"index": s.index, "label": s.label}
            if s in self.fits:
                entry["fit"] = self.fits[s].to_dict()
            else:
                entry["skipped"] = self.skipped.get(s, SKIP_INSUFFICIENT)
            strata.append(entry)
        return {
            "year": self.year,
            "tau": self.tau,
            "boundaries": list(self.spec.boundaries),
            "strata": strata,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSet":
        spec = StratumSpec(tuple(d["boundaries"]))
        ms = cls(year=str(d["year"]), tau=float(d["tau"]), spec=spec)
        for entry in d["strata"]:
            s = spec.stratum(int(entry["index"]))
            if entry.get("label", s.label) != s.label:
                raise InvalidArgumentError(f"label {entry['label']!r} does not match boundaries")
            if "fit" in entry:
                ms.fits[s] = QuantileFit.from_dict(entry["fit"])
            else:
                ms.skipped[s] = str(entry.get("skipped", SKIP_INSUFFICIENT))
        for s in spec.strata:
            if s not in ms.fits and s not in ms.skipped:
                ms.skipped[s] = SKIP_INSUFFICIENT
        return ms


def reference_modelset(year: str = "1999") -> ModelSet:
    """ModelSet holding the published 1999 coefficients, without diagnostics."""
    spec = StratumSpec()
    fits = {
        s: QuantileFit(tau=DEFAULT_TAU, intercept=b0, slope=b1)
        for s, (b0, b1) in zip(spec.strata, REFERENCE_1999_COEFFICIENTS)
    }
    return ModelSet(year=year, tau=DEFAULT_TAU, spec=spec, fits=fits)


def _fit_one(points: Sequence[Observation], tau: float):
    if len(points) < 2:
        return None, SKIP_INSUFFICIENT
    try:
        return fit_quantile_line(points, tau), None
    except DegenerateDesignError:
        return None, SKIP_DEGENERATE


def fit_all_strata(
    observations: Mapping[StratumId, Sequence[Observation]],
    tau: float = DEFAULT_TAU,
    year: str = "1999",
    spec: StratumSpec | None = None,
    workers: int = 1,
) -> ModelSet:
    """Fit every stratum independently; strata that cannot be fitted are skipped."""
    spec = spec or StratumSpec()
    if not (0.0 < tau < 1.0):
        raise InvalidArgumentError(f"tau must lie in (0, 1), got {tau!r}")
    strata = spec.strata
    jobs = [observations.get(s, ()) for s in strata]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda pts: _fit_one(pts, tau), jobs))
    else:
        results = [_fit_one(pts, tau) for pts in jobs]

    ms = ModelSet(year=str(year), tau=tau, spec=spec)
    for s, (fit, reason) in zip(strata, results):
        if fit is None:
            logger.info("stratum %s skipped: %s", s.label, reason)
            ms.skipped[s] = reason
        else:
            ms.fits[s] = fit
    return ms


@dataclass(frozen=True)
class PredictionRow:
    year: str
    stratum: StratumId
    population: float
    raw: float
    clamped: float


@dataclass(frozen=True)
class DifferenceRow:
    year: str
    population: float
    stratum_a: StratumId
    stratum_b: StratumId
    value: float


@dataclass
class ComparisonTable:
    """Predictions per (year, stratum, population) plus pairwise stratum gaps."""

    spec: StratumSpec
    clamp: bool
    rows: list[PredictionRow] = field(default_factory=list)
    differences: list[DifferenceRow] = field(default_factory=list)

    @property
    def years(self) -> list[str]:
        return list(dict.fromkeys(r.year for r in self.rows))

    @property
    def populations(self) -> list[float]:
        return list(dict.fromkeys(r.population for r in self.rows))

    def value(self, year: str, stratum: StratumId | str, population: float, clamped: bool | None = None) -> float:
        if isinstance(stratum, str):
            stratum = self.spec.by_label(stratum)
        use_clamped = self.clamp if clamped is None else clamped
        for r in self.rows:
            if r.year == year and r.stratum == stratum and r.population == population:
                return r.clamped if use_clamped else r.raw
        raise KeyError((year, stratum.label, population))

    def difference(self, year: str, population: float, a: StratumId | str, b: StratumId | str) -> float:
        if isinstance(a, str):
            a = self.spec.by_label(a)
        if isinstance(b, str):
            b = self.spec.by_label(b)
        for d in self.differences:
            if d.year == year and d.population == population and d.stratum_a == a and d.stratum_b == b:
                return d.value
        raise KeyError((year, population, a.label, b.label))


def compare_populations(
    modelsets: Iterable[ModelSet], populations: Sequence[float], clamp: bool = True
) -> ComparisonTable:
    """Evaluate every ModelSet at each population and tabulate stratum differences."""
    modelsets = list(modelsets)
    populations = list(populations)
    if not modelsets:
        raise InvalidArgumentError("at least one ModelSet is required")
    if not populations:
        raise InvalidArgumentError("populations must be non-empty")
    spec = modelsets[0].spec
    for ms in modelsets[1:]:
        if ms.spec != spec:
            raise IncompatibleModelsError(
                f"model sets use different strata: {spec.boundaries} vs {ms.spec.boundaries}"
            )

    table = ComparisonTable(spec=spec, clamp=clamp)
    for ms in modelsets:
        for pop in populations:
            values = {}
            for s in spec.strata:
                if s not in ms.fits:
                    continue
                raw = predict(ms.fits[s], pop)
                clamped = predict(ms.fits[s], pop, clamp_nonnegative=True)
                table.rows.append(PredictionRow(ms.year, s, pop, raw, clamped))
                values[s] = clamped if clamp else raw
            for a in values:
                for b in values:
                    if a != b:
                        table.differences.append(DifferenceRow(ms.year, pop, a, b, values[a] - values[b]))
    return table
