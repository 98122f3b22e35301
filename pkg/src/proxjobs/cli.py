"""Command-line entry point: ``proxjobs {generate,fit,predict,compare,report}``.

Log verbosity comes from the ``PROXJOBS_LOG_LEVEL`` environment variable
(default ``WARNING``); the effective configuration of every run is logged
at INFO.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

from . import data_io, report, synthgen
from .errors import ProxJobsError
from .quantreg import predict
from .strata import DEFAULT_TAU, ModelSet, StratumSpec, compare_populations, fit_all_strata

logger = logging.getLogger("proxjobs")


def _tau(s: str) -> float:
    v = float(s)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"tau must lie in (0, 1), got {s}")
    return v


def _populations(s: str) -> list[float]:
    try:
        vals = [float(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad population list {s!r}") from None
    if not vals or any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError("populations must be a non-empty list of values >= 1")
    return vals


def _boundaries(s: str) -> tuple[float, ...]:
    try:
        return StratumSpec(tuple(float(v) for v in s.split(","))).boundaries
    except (ValueError, ProxJobsError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="proxjobs",
        description="Estimate proximity-service jobs per inhabitant by stratified first-percentile regression.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic census CSV")
    g.add_argument("--spec", type=Path, help="generator spec JSON")
    g.add_argument("--seed", type=int)
    g.add_argument("--per-stratum", type=int)
    g.add_argument("--noise-mean", type=float)
    g.add_argument("--years", help="comma-separated year tags")
    g.add_argument("--boundaries", type=_boundaries)
    g.add_argument("--output", "-o", type=Path, default=Path("synthetic.csv"))

    f = sub.add_parser("fit", help="fit per-stratum quantile lines")
    f.add_argument("--input", "-i", type=Path, required=True)
    f.add_argument("--year", action="append", help="year tag (repeatable; default: every year in the file)")
    f.add_argument("--tau", type=_tau, default=DEFAULT_TAU)
    f.add_argument("--boundaries", type=_boundaries)
    f.add_argument("--output-dir", "-o", type=Path, default=Path("."))
    f.add_argument("--format", choices=("csv", "json", "text"), default="csv", help="coefficient table format")
    f.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("predict", help="evaluate a model set at given populations")
    p.add_argument("--model", "-m", type=Path, required=True)
    p.add_argument("--populations", type=_populations, required=True)
    p.add_argument("--stratum", help="restrict to one stratum label, e.g. ']0,5]'")
    p.add_argument("--no-clamp", dest="clamp", action="store_false")
    p.add_argument("--format", choices=("csv", "json", "text"), default="text")
    p.add_argument("--output", "-o", type=Path, help="write here instead of stdout")

    c = sub.add_parser("compare", help="join model sets into a comparison table and tmfm profile")
    c.add_argument("--models", nargs="+", type=Path, required=True)
    c.add_argument("--populations", type=_populations, default=[500.0, 3000.0])
    c.add_argument("--no-clamp", dest="clamp", action="store_false")
    c.add_argument("--output-dir", "-o", type=Path, default=Path("."))
    c.add_argument("--format", choices=("csv", "json", "text"), default="csv")

    r = sub.add_parser("report", help="plot data per stratum plus descriptive series")
    r.add_argument("--input", "-i", type=Path, required=True)
    r.add_argument("--model", "-m", type=Path, required=True)
    r.add_argument("--resolution", type=int, default=64)
    r.add_argument("--output-dir", "-o", type=Path, default=Path("."))
    r.add_argument("--format", choices=("csv", "json"), default="json")
    return parser


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    logger.info("wrote %s", path)


def _plot_text(doc: dict, fmt: str) -> str:
    return report.plot_to_csv(doc) if fmt == "csv" else report.plot_to_json(doc)


def _load_modelset(path: Path) -> ModelSet:
    try:
        with open(path, encoding="utf-8") as fh:
            return ModelSet.from_dict(json.load(fh))
    except OSError as exc:
        raise ProxJobsError(f"cannot read {path}: {exc}") from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise ProxJobsError(f"{path} is not a model set: {exc}") from exc


def cmd_generate(args) -> None:
    spec = synthgen.GeneratorSpec.from_json(args.spec) if args.spec else synthgen.GeneratorSpec()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.per_stratum is not None:
        overrides["per_stratum"] = args.per_stratum
    if args.noise_mean is not None:
        overrides["noise_mean"] = args.noise_mean
    if args.years:
        overrides["years"] = tuple(y.strip() for y in args.years.split(",") if y.strip())
    if args.boundaries:
        overrides["boundaries"] = args.boundaries
    if overrides:
        spec = synthgen.GeneratorSpec.from_dict({**spec.to_dict(), **overrides})
    logger.info("generator spec: %s", json.dumps(spec.to_dict(), sort_keys=True))
    dataset = synthgen.generate(spec)
    args.output.parent.mkdir(parents=True, exist_ok=True)
    data_io.write_municipalities(dataset, args.output)
    logger.info("wrote %d municipalities to %s", len(dataset), args.output)


def cmd_fit(args) -> None:
    dataset = data_io.load_municipalities(args.input)
    spec = StratumSpec(args.boundaries) if args.boundaries else StratumSpec()
    years = args.year or list(dataset.years)
    ext = {"csv": "csv", "json": "json", "text": "txt"}[args.format]
    for year in years:
        obs = data_io.to_observations(dataset, year, spec)
        logger.info(
            "year %s: %d observations, excluded %s", year, obs.included, dict(sorted(obs.excluded.items()))
        )
        ms = fit_all_strata(obs.strata, args.tau, year, spec, workers=args.workers)
        suffix = "" if len(years) == 1 else f"_{year}"
        _write(args.output_dir / f"modelset{suffix}.json", json.dumps(ms.to_dict(), indent=2) + "\n")
        table = report.coefficients_table(ms)
        text = {"csv": table.to_csv, "json": table.to_json, "text": table.to_text}[args.format]()
        _write(args.output_dir / f"coefficients{suffix}.{ext}", text)


def cmd_predict(args) -> None:
    ms = _load_modelset(args.model)
    strata = [ms.spec.by_label(args.stratum)] if args.stratum else list(ms.fits)
    rows = []
    for s in strata:
        if s not in ms.fits:
            raise ProxJobsError(f"stratum {s.label} was skipped: {ms.skipped.get(s)}")
        for pop in args.populations:
            rows.append({
                "year": ms.year,
                "stratum": s.label,
                "population": pop,
                "prediction": predict(ms.fits[s], pop, clamp_nonnegative=args.clamp),
                "raw": predict(ms.fits[s], pop),
            })
    if args.format == "json":
        text = json.dumps(rows, indent=2) + "\n"
    elif args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["year", "stratum", "population", "prediction", "raw"])
        w.writerows([r["year"], r["stratum"], f"{r['population']:g}", repr(r["prediction"]), repr(r["raw"])] for r in rows)
        text = buf.getvalue()
    else:
        text = "".join(f"{r['year']}  {r['stratum']:<8} P={r['population']:<8g} {r['prediction']:.4f}\n" for r in rows)
    if args.output:
        _write(args.output, text)
    else:
        sys.stdout.write(text)


def cmd_compare(args) -> None:
    modelsets = [_load_modelset(p) for p in args.models]
    table = compare_populations(modelsets, args.populations, clamp=args.clamp)
    if args.format == "text":
        _write(args.output_dir / "comparison.txt", report.comparison_to_text(table))
    else:
        _write(args.output_dir / "comparison.csv", report.comparison_to_csv(table))
        _write(args.output_dir / "differences.csv", report.differences_to_csv(table))
    profile = report.tmfm_profile(table)
    _write(args.output_dir / "profile.json", report.plot_to_json(profile))
    if args.format == "csv":
        _write(args.output_dir / "profile.csv", report.plot_to_csv(profile))


def cmd_report(args) -> None:
    ms = _load_modelset(args.model)
    dataset = data_io.load_municipalities(args.input)
    obs = data_io.to_observations(dataset, ms.year, ms.spec)
    ext = args.format
    for s, doc in report.stratum_scatters(ms, obs, args.resolution).items():
        _write(args.output_dir / f"scatter_stratum{s.index}.{ext}", _plot_text(doc, ext))
    _write(args.output_dir / f"population_scatter.{ext}", _plot_text(report.population_scatter(obs), ext))
    _write(args.output_dir / f"tmfm_histogram.{ext}", _plot_text(report.tmfm_histogram(dataset), ext))


COMMANDS = {
    "generate": cmd_generate,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "compare": cmd_compare,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = os.environ.get("PROXJOBS_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    config = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()}
    logger.info("config: %s", json.dumps(config, sort_keys=True, default=str))
    try:
        COMMANDS[args.command](args)
    except ProxJobsError as exc:
        print(f"proxjobs: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
