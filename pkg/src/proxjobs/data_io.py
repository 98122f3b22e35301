"""Municipality census records: CSV loading, validation and stratified observations.

CSV schema (UTF-8, comma-separated, header required)::

    id,population_1999,jobs_1999,population_2006,jobs_2006,population_2008,jobs_2008,tmfm_minutes

Any ``population_<year>`` / ``jobs_<year>`` column pair defines a census year,
so non-standard years work unchanged.  Empty cells mean "no data for that year".
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

from .errors import DataError
from .quantreg import Observation
from .strata import StratumId, StratumSpec, stratum_of

logger = logging.getLogger(__name__)

POPULATION_CAP = 5000

EXCLUDE_MISSING = "missing year data"
EXCLUDE_ZERO_POPULATION = "zero population"
EXCLUDE_CAP = "population cap"
EXCLUDE_TMFM = "tmfm not positive"

_YEAR_COLUMN = re.compile(r"^(population|jobs)_(.+)$")


@dataclass(frozen=True)
class Municipality:
    id: str
    population: dict[str, int]
    service_jobs: dict[str, int]
    tmfm_minutes: float


@dataclass
class Dataset:
    municipalities: list[Municipality]
    years: tuple[str, ...]
    provenance: str = ""
    row_warnings: list[tuple[int, str]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.municipalities)


def _parse_count(raw: str, column: str) -> int:
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"unparseable {column}") from None
    if value < 0:
        raise ValueError(f"negative {column}")
    return value


def _parse_tmfm(raw: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ValueError("unparseable tmfm_minutes") from None
    if not math.isfinite(value):
        raise ValueError("non-finite tmfm_minutes")
    if value < 0:
        raise ValueError("negative tmfm_minutes")
    return value


def _years_from_header(header: list[str]) -> tuple[str, ...]:
    found: dict[str, set[str]] = {}
    for col in header:
        m = _YEAR_COLUMN.match(col)
        if m:
            found.setdefault(m.group(2), set()).add(m.group(1))
    for year, kinds in found.items():
        if kinds != {"population", "jobs"}:
            missing = ({"population", "jobs"} - kinds).pop()
            raise DataError(f"missing required column {missing}_{year}")
    return tuple(found)


def read_municipalities(stream: Iterable[str], provenance: str = "") -> Dataset:
    """Parse CSV text; malformed rows are skipped and recorded in ``row_warnings``."""
    reader = csv.reader(stream)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DataError("empty file: header row required") from None
    for col in ("id", "tmfm_minutes"):
        if col not in header:
            raise DataError(f"missing required column {col}")
    years = _years_from_header(header)
    if not years:
        raise DataError("no population_<year>/jobs_<year> column pair found")
    pos = {c: i for i, c in enumerate(header)}

    municipalities: list[Municipality] = []
    warnings: list[tuple[int, str]] = []
    seen: dict[str, int] = {}
    # row numbers count the header as row 1
    for rowno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            warnings.append((rowno, f"expected {len(header)} fields, got {len(row)}"))
            continue
        cells = {c: row[i].strip() for c, i in pos.items()}
        mid = cells["id"]
        if not mid:
            warnings.append((rowno, "empty id"))
            continue
        try:
            tmfm = _parse_tmfm(cells["tmfm_minutes"])
            population, jobs = {}, {}
            for year in years:
                p_raw, j_raw = cells[f"population_{year}"], cells[f"jobs_{year}"]
                if not p_raw and not j_raw:
                    continue
                if not p_raw or not j_raw:
                    raise ValueError(f"incomplete data for year {year}")
                population[year] = _parse_count(p_raw, f"population_{year}")
                jobs[year] = _parse_count(j_raw, f"jobs_{year}")
        except ValueError as exc:
            warnings.append((rowno, str(exc)))
            continue
        if mid in seen:
            raise DataError(f"duplicate id {mid!r} on rows {seen[mid]} and {rowno}")
        seen[mid] = rowno
        municipalities.append(Municipality(mid, population, jobs, tmfm))

    for rowno, reason in warnings:
        logger.warning("row %d skipped: %s", rowno, reason)
    return Dataset(municipalities, years, provenance, warnings)


def load_municipalities(path: str | os.PathLike) -> Dataset:
    """Load a census CSV file."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            return read_municipalities(fh, provenance=str(path))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def format_municipalities(dataset: Dataset) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["id"]
    for year in dataset.years:
        header += [f"population_{year}", f"jobs_{year}"]
    writer.writerow(header + ["tmfm_minutes"])
    for m in dataset.municipalities:
        row = [m.id]
        for year in dataset.years:
            if year in m.population:
                row += [str(m.population[year]), str(m.service_jobs[year])]
            else:
                row += ["", ""]
        writer.writerow(row + [repr(float(m.tmfm_minutes))])
    return buf.getvalue()


def write_municipalities(dataset: Dataset, path: str | os.PathLike) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(format_municipalities(dataset))


@dataclass
class StratifiedObservations:
    """Observations grouped by stratum, with exclusion accounting."""

    year: str
    spec: StratumSpec
    strata: dict[StratumId, list[Observation]]
    excluded: Counter
    warnings: list[str] = field(default_factory=list)

    @property
    def included(self) -> int:
        return sum(len(v) for v in self.strata.values())

    def __getitem__(self, stratum: StratumId | str) -> list[Observation]:
        if isinstance(stratum, str):
            stratum = self.spec.by_label(stratum)
        return self.strata[stratum]


def to_observations(
    dataset: Dataset,
    year: str,
    spec: StratumSpec | None = None,
    population_cap: int = POPULATION_CAP,
) -> StratifiedObservations:
    """Build (ln P, jobs / P) observations for one year, grouped by stratum.

    Kept: 1 <= P < ``population_cap`` and tmfm above the first boundary.
    """
    spec = spec or StratumSpec()
    year = str(year)
    if year not in dataset.years:
        raise DataError(f"unknown year {year!r}; dataset has {list(dataset.years)}")
    strata: dict[StratumId, list[Observation]] = {s: [] for s in spec.strata}
    excluded: Counter = Counter()
    warnings: list[str] = []
    for m in dataset.municipalities:
        if year not in m.population:
            excluded[EXCLUDE_MISSING] += 1
            continue
        pop = m.population[year]
        if pop == 0:
            excluded[EXCLUDE_ZERO_POPULATION] += 1
            continue
        if pop >= population_cap:
            excluded[EXCLUDE_CAP] += 1
            continue
        if m.tmfm_minutes <= spec.boundaries[0]:
            excluded[EXCLUDE_TMFM] += 1
            continue
        y = m.service_jobs[year] / pop
        if y > 1.0:
            warnings.append(f"{m.id}: {y:.3f} service jobs per inhabitant in {year}")
        strata[stratum_of(spec, m.tmfm_minutes)].append(Observation(math.log(pop), y))
    if excluded[EXCLUDE_TMFM]:
        logger.warning("%d municipalities with tmfm <= %g excluded", excluded[EXCLUDE_TMFM], spec.boundaries[0])
    return StratifiedObservations(year, spec, strata, excluded, warnings)
