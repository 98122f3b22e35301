"""Tables and plot-ready data series built from fitted model sets.

Rendering only reads fits and predictions; nothing here refits.

Plot documents follow ``PLOT_SCHEMA``::

    {"series": [{"name": str, "x": [...], "y": [...], "meta": {...}}]}
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data_io import Dataset, StratifiedObservations
from .errors import InvalidArgumentError
from .quantreg import Observation, QuantileFit, predict
from .strata import ComparisonTable, ModelSet, StratumId

PLOT_SCHEMA = {
    "type": "object",
    "required": ["series"],
    "additionalProperties": False,
    "properties": {
        "series": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "x", "y", "meta"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string"},
                    "x": {"type": "array", "items": {"type": "number"}},
                    "y": {"type": "array", "items": {"type": "number"}},
                    "meta": {"type": "object"},
                },
            },
        }
    },
}

COEFFICIENT_COLUMNS = ("stratum", "intercept", "slope", "n", "skipped")


def validate_plot_document(doc: dict) -> None:
    """Raise ``jsonschema.ValidationError`` if ``doc`` breaks the plot schema."""
    import jsonschema

    jsonschema.validate(doc, PLOT_SCHEMA)
    for s in doc["series"]:
        if len(s["x"]) != len(s["y"]):
            raise jsonschema.ValidationError(f"series {s['name']!r}: x and y lengths differ")


def _series(name: str, x, y, **meta) -> dict:
    return {"name": name, "x": [float(v) for v in x], "y": [float(v) for v in y], "meta": meta}


def plot_to_json(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def plot_to_csv(doc: dict) -> str:
    """Long format: one line per (series, point)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["series", "x", "y"])
    for s in doc["series"]:
        for x, y in zip(s["x"], s["y"]):
            w.writerow([s["name"], repr(x), repr(y)])
    return buf.getvalue()


@dataclass(frozen=True)
class CoefficientRow:
    stratum: str
    intercept: float | None
    slope: float | None
    n: int | None
    skipped: str = ""


@dataclass
class CoefficientTable:
    year: str
    tau: float
    rows: list[CoefficientRow]
    decimals: int | None = 3

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COEFFICIENT_COLUMNS)
        for r in self.rows:
            if r.skipped:
                w.writerow([r.stratum, "", "", "", r.skipped])
            else:
                w.writerow([r.stratum, repr(r.intercept), repr(r.slope), r.n, ""])
        return buf.getvalue()

    def to_text(self) -> str:
        header = ["Distance to MFM (min)", "Intercept", "Slope", "n"]
        body = []
        for r in self.rows:
            if r.skipped:
                body.append([r.stratum, "-", "-", f"skipped: {r.skipped}"])
            else:
                fmt = f"{{:.{self.decimals}f}}" if self.decimals is not None else "{!r}"
                body.append([r.stratum, fmt.format(r.intercept), fmt.format(r.slope), str(r.n)])
        widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]
        lines = [f"year {self.year}, tau = {self.tau:g}"]
        for row in [header] + body:
            lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        doc = {
            "year": self.year,
            "tau": self.tau,
            "decimals": self.decimals,
            "rows": [r.__dict__ for r in self.rows],
        }
        return json.dumps(doc, indent=2) + "\n"


def coefficients_table(modelset: ModelSet, decimals: int | None = 3) -> CoefficientTable:
    """One row per stratum; coefficients rounded to ``decimals`` (None keeps full precision)."""
    if not modelset.fits:
        raise InvalidArgumentError("model set has no fitted stratum")
    rows = []
    for s in modelset.spec.strata:
        fit = modelset.fits.get(s)
        if fit is None:
            rows.append(CoefficientRow(s.label, None, None, None, modelset.skipped.get(s, "not fitted")))
            continue
        b0, b1 = fit.intercept, fit.slope
        if decimals is not None:
            b0, b1 = round(b0, decimals), round(b1, decimals)
        rows.append(CoefficientRow(s.label, b0, b1, fit.n))
    return CoefficientTable(modelset.year, modelset.tau, rows, decimals)


def parse_coefficients_csv(text: str) -> list[CoefficientRow]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != COEFFICIENT_COLUMNS:
        raise InvalidArgumentError(f"unexpected coefficient columns {reader.fieldnames}")
    rows = []
    for rec in reader:
        if rec["skipped"]:
            rows.append(CoefficientRow(rec["stratum"], None, None, None, rec["skipped"]))
        else:
            rows.append(CoefficientRow(rec["stratum"], float(rec["intercept"]), float(rec["slope"]), int(rec["n"])))
    return rows


def scatter_with_line(
    observations: Sequence[Observation],
    fit: QuantileFit,
    *,
    stratum: StratumId | None = None,
    fit_stratum: StratumId | None = None,
    resolution: int = 64,
) -> dict:
    """Scatter of (P, y) and the fitted line sampled log-evenly over the observed P range."""
    if stratum is not None and fit_stratum is not None and stratum != fit_stratum:
        raise InvalidArgumentError(f"observations are from {stratum.label}, fit is for {fit_stratum.label}")
    if fit.n and fit.n != len(observations):
        raise InvalidArgumentError(f"fit used {fit.n} observations, got {len(observations)}")
    if not observations:
        raise InvalidArgumentError("no observations to plot")
    if resolution < 2:
        raise InvalidArgumentError("resolution must be >= 2")
    x = np.array([o.x for o in observations])
    y = np.array([o.y for o in observations])
    pop = np.exp(x)
    p_lo, p_hi = float(pop.min()), float(pop.max())
    line_p = np.exp(np.linspace(math.log(p_lo), math.log(p_hi), resolution))
    line_p[0], line_p[-1] = p_lo, p_hi
    line_y = [predict(fit, p) for p in line_p]
    label = stratum.label if stratum else (fit_stratum.label if fit_stratum else "")
    return {
        "series": [
            _series("observations", pop, y, stratum=label, kind="scatter"),
            _series(
                "quantile line", line_p, line_y,
                stratum=label, kind="line", tau=fit.tau, intercept=fit.intercept, slope=fit.slope,
            ),
        ]
    }


def stratum_scatters(modelset: ModelSet, observations: StratifiedObservations, resolution: int = 64) -> dict[StratumId, dict]:
    """Scatter-with-line documents for every fitted stratum."""
    if observations.spec != modelset.spec:
        raise InvalidArgumentError("observations and model set use different strata")
    return {
        s: scatter_with_line(observations.strata[s], fit, stratum=s, fit_stratum=s, resolution=resolution)
        for s, fit in modelset.fits.items()
    }


def tmfm_profile(comparison: ComparisonTable, clamped: bool | None = None) -> dict:
    """One series per (year, population): predicted jobs per inhabitant against stratum index."""
    if not comparison.rows:
        raise InvalidArgumentError("comparison table is empty")
    use_clamped = comparison.clamp if clamped is None else clamped
    series = []
    for year in comparison.years:
        for pop in comparison.populations:
            rows = sorted(
                (r for r in comparison.rows if r.year == year and r.population == pop),
                key=lambda r: r.stratum.index,
            )
            if not rows:
                continue
            series.append(
                _series(
                    f"{year} P={pop:g}",
                    [r.stratum.index for r in rows],
                    [r.clamped if use_clamped else r.raw for r in rows],
                    year=year, population=pop, labels=[r.stratum.label for r in rows], clamped=use_clamped,
                )
            )
    return {"series": series}


def comparison_to_csv(comparison: ComparisonTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["year", "stratum", "population", "raw", "clamped"])
    for r in comparison.rows:
        w.writerow([r.year, r.stratum.label, f"{r.population:g}", repr(r.raw), repr(r.clamped)])
    return buf.getvalue()


def differences_to_csv(comparison: ComparisonTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["year", "population", "stratum_a", "stratum_b", "difference"])
    for d in comparison.differences:
        w.writerow([d.year, f"{d.population:g}", d.stratum_a.label, d.stratum_b.label, repr(d.value)])
    return buf.getvalue()


def comparison_to_text(comparison: ComparisonTable) -> str:
    pops = comparison.populations
    header = ["year", "stratum"] + [f"P={p:g}" for p in pops]
    body = []
    for year in comparison.years:
        for s in comparison.spec.strata:
            vals = []
            for p in pops:
                try:
                    vals.append(f"{comparison.value(year, s, p):.4f}")
                except KeyError:
                    vals.append("-")
            if any(v != "-" for v in vals):
                body.append([year, s.label] + vals)
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in [header] + body) + "\n"


def population_scatter(observations: StratifiedObservations) -> dict:
    """Jobs per inhabitant against population for all strata pooled."""
    x, y = [], []
    for obs in observations.strata.values():
        x += [math.exp(o.x) for o in obs]
        y += [o.y for o in obs]
    return {"series": [_series("all municipalities", x, y, year=observations.year, kind="scatter")]}


def tmfm_histogram(dataset: Dataset, bin_width: float = 1.0, upper: float | None = None) -> dict:
    """Binned counts of travel times; bins are ]k*w, (k+1)*w], zero in its own bin at 0."""
    if bin_width <= 0:
        raise InvalidArgumentError("bin_width must be positive")
    values = [m.tmfm_minutes for m in dataset.municipalities]
    if upper is not None:
        values = [v for v in values if v <= upper]
    counts: Counter = Counter()
    for v in values:
        counts[0 if v == 0 else math.ceil(v / bin_width)] += 1
    bins = range(0, max(counts, default=0) + 1)
    return {
        "series": [
            _series(
                "tmfm histogram", [k * bin_width for k in bins], [counts.get(k, 0) for k in bins],
                bin_width=bin_width, kind="histogram", edge="right",
            )
        ]
    }
