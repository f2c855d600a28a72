"""mortstat: survival curves, Cox fits, KS tests and media phrase counts.

    mortstat analyze data/uk.csv data/usa.csv --out report/
    mortstat scan corpus/ --out counts.csv
    mortstat km cohort.csv --out curves/km
    mortstat cox cohort.csv --out fit.json
    mortstat simulate sim.cfg --out bias.json

Exit codes: 0 success, 2 input error, 3 numerical failure. Set
MORTSTAT_LOG_LEVEL (e.g. DEBUG) for more logging.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from . import __version__
from .cox import CovariateSpec, cox_fit
from .errors import InputError, MortstatError, SchemaError
from .media import (
    PublisherCounts,
    incorrect_proportion,
    macro_average,
    pooled_proportion,
    read_counts_csv,
    counts_csv,
    scan_directory,
)
from .plots import least_squares, scatter_svg, survival_svg
from .simulation import (
    SimConfig,
    bias_experiment,
    death_records_csv,
    england_indicators,
    simulate_death_records,
)
from .stats import (
    STANDARD_LOGNORMAL,
    fit_lognormal,
    ks_one_sample,
    ks_two_sample,
    pearson,
)
from .survival import Cohort, curve_to_csv, curve_to_json, kaplan_meier, read_cohort_csv

log = logging.getLogger("mortstat")

INSUFFICIENT = "insufficient-data"


@dataclass
class RunManifest:
    command: str
    inputs: list[str]
    outputs: list[str]
    version: str = __version__
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds"))

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def _write_all(files: dict[Path, str]) -> list[str]:
    """Write prepared contents; nothing is written until everything is computed."""
    for path, text in files.items():
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(text, encoding="utf-8", newline="")
        tmp.replace(path)
    return [str(p) for p in files]


def _finish(command: str, inputs: Sequence, files: dict[Path, str], manifest_path: Path) -> RunManifest:
    outputs = _write_all(files)
    manifest = RunManifest(command, [str(p) for p in inputs], outputs)
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    manifest_path.write_text(manifest.to_json() + "\n", encoding="utf-8")
    return manifest


def _insufficient(reason: str) -> dict:
    return {"status": INSUFFICIENT, "reason": reason}


# -- analyze -------------------------------------------------------------------


def _pct(v):
    return f"{100 * v:.1f}%"


def country_report(publishers: Sequence[PublisherCounts]) -> dict:
    """Every per-country statistic of the media analysis as plain JSON data."""
    totals = [p.total for p in publishers]
    incorrect = [p.incorrect for p in publishers]
    props = [incorrect_proportion(p) for p in publishers]
    rep = {
        "n_publishers": len(publishers),
        "per_publisher": [
            {
                "name": p.name,
                "medium": p.medium,
                "with": p.with_count,
                "from": p.from_count,
                "of": p.of_count,
                "total": p.total,
                "incorrect": p.incorrect,
                "incorrect_proportion": prop,
            }
            for p, prop in zip(publishers, props)
        ],
        "pooled": pooled_proportion(publishers),
    }
    display = {"pooled": _pct(rep["pooled"])}

    if len(publishers) < 2:
        why = "fewer than 2 publishers"
        for key in ("macro_average", "macro_sample_std", "lognormal_fit", "ks_one_sample_fitted",
                    "ks_one_sample_standard", "pearson_total_incorrect",
                    "pearson_log_total_incorrect", "pearson_total_proportion", "least_squares"):
            rep[key] = _insufficient(why)
        rep["display"] = display
        return rep

    mean, std = macro_average(publishers)
    rep["macro_average"] = mean
    rep["macro_sample_std"] = std
    display.update(macro_average=_pct(mean), macro_sample_std=_pct(std))

    try:
        params = fit_lognormal(props)
    except MortstatError as exc:
        rep["lognormal_fit"] = _insufficient(str(exc))
        rep["ks_one_sample_fitted"] = _insufficient(str(exc))
    else:
        rep["lognormal_fit"] = {"mu": params.mu, "sigma": params.sigma}
        fitted = ks_one_sample(props, params, params_estimated=True)
        rep["ks_one_sample_fitted"] = fitted.to_dict()
        display["ks_one_sample_fitted_p"] = f"{fitted.p_value:.4f}"
    standard = ks_one_sample(props, STANDARD_LOGNORMAL, params_estimated=False)
    rep["ks_one_sample_standard"] = standard.to_dict()
    display["ks_one_sample_standard_p"] = f"{standard.p_value:.4f}"

    pairs = {
        "pearson_total_incorrect": (totals, incorrect),
        "pearson_total_proportion": (totals, props),
    }
    if min(incorrect) > 0:
        pairs["pearson_log_total_incorrect"] = (
            [math.log(v) for v in totals], [math.log(v) for v in incorrect]
        )
    else:
        rep["pearson_log_total_incorrect"] = _insufficient("zero incorrect count has no logarithm")
    for key, (xs, ys) in pairs.items():
        try:
            rho = pearson(xs, ys)
        except MortstatError as exc:
            rep[key] = _insufficient(str(exc))
        else:
            rep[key] = rho
            display[key] = f"{rho:.3f}"
    try:
        slope, intercept = least_squares(totals, incorrect)
        rep["least_squares"] = {"slope": slope, "intercept": intercept}
    except ValueError as exc:
        rep["least_squares"] = _insufficient(str(exc))
    rep["display"] = display
    return rep


def media_report(publishers: Sequence[PublisherCounts]) -> dict:
    by_country: dict[str, list[PublisherCounts]] = {}
    for p in publishers:
        by_country.setdefault(p.country, []).append(p)
    report = {"countries": {c: country_report(rows) for c, rows in by_country.items()}}
    if len(by_country) == 2:
        (ca, ra), (cb, rb) = by_country.items()
        res = ks_two_sample([incorrect_proportion(p) for p in ra], [incorrect_proportion(p) for p in rb])
        report["ks_two_sample"] = {"samples": [ca, cb], **res.to_dict(), "p_value_display": f"{res.p_value:.4f}"}
    else:
        report["ks_two_sample"] = _insufficient(f"needs exactly 2 countries, got {len(by_country)}")
    return report


def _scatter_csv(publishers: Sequence[PublisherCounts]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["name", "total", "incorrect", "incorrect_proportion"])
    for p in publishers:
        w.writerow([p.name, p.total, p.incorrect, repr(incorrect_proportion(p))])
    return buf.getvalue()


def report_text(report: dict) -> str:
    lines = []
    for country, rep in report["countries"].items():
        d = rep["display"]
        lines.append(f"{country} ({rep['n_publishers']} publishers)")
        for row in rep["per_publisher"]:
            lines.append(f"  {row['name']:<20} {_pct(row['incorrect_proportion']):>7}")
        for key in ("macro_average", "macro_sample_std", "pooled", "ks_one_sample_fitted_p",
                    "ks_one_sample_standard_p", "pearson_total_incorrect",
                    "pearson_log_total_incorrect", "pearson_total_proportion"):
            lines.append(f"  {key:<28} {d.get(key, INSUFFICIENT)}")
    ks = report["ks_two_sample"]
    if "statistic" in ks:
        lines.append(f"two-sample KS {ks['samples'][0]} vs {ks['samples'][1]}: "
                     f"D={ks['statistic']:.4f} p={ks['p_value_display']}")
    else:
        lines.append(f"two-sample KS: {INSUFFICIENT}")
    return "\n".join(lines) + "\n"


def cmd_analyze(counts_csvs: Sequence[str | Path], out_dir: str | Path) -> RunManifest:
    publishers = []
    for path in counts_csvs:
        publishers.extend(read_counts_csv(path))
    if not publishers:
        raise SchemaError("no publisher rows in input")
    report = media_report(publishers)
    out_dir = Path(out_dir)
    files = {out_dir / "report.json": json.dumps(report, indent=2) + "\n",
             out_dir / "report.txt": report_text(report)}
    for country, rep in report["countries"].items():
        rows = [p for p in publishers if p.country == country]
        files[out_dir / f"scatter_{country}.csv"] = _scatter_csv(rows)
        if isinstance(rep.get("pearson_total_incorrect"), float):
            files[out_dir / f"scatter_{country}.svg"] = scatter_svg(
                [p.total for p in rows],
                [p.incorrect for p in rows],
                title=f"{country}: incorrect vs total articles",
                labels=[p.name for p in rows],
                annotation=f"Pearson rho = {rep['pearson_total_incorrect']:.3f}",
            )
    return _finish("analyze", counts_csvs, files, out_dir / "manifest.json")


# -- scan ----------------------------------------------------------------------


def cmd_scan(corpus_dir: str | Path, out_csv: str | Path, country: str = "UK", medium: str = "newspaper") -> RunManifest:
    corpus_dir = Path(corpus_dir)
    if not corpus_dir.is_dir():
        raise InputError(f"corpus directory not found: {corpus_dir}")
    tallies = scan_directory(corpus_dir)
    rows = [t.counts(name, country, medium) for name, t in tallies.items()]
    out = Path(out_csv)
    skipped = sum(t.skipped for t in tallies.values())
    if skipped:
        log.warning("%d undecodable document(s) skipped", skipped)
    return _finish("scan", [corpus_dir], {out: counts_csv(rows)}, out.with_name(out.name + ".manifest.json"))


# -- km / cox ------------------------------------------------------------------


def _groups(cohort: Cohort, names: list[str]) -> dict[str, Cohort]:
    if "group" not in names:
        return {cohort.label or "all": cohort}
    k = names.index("group")
    values = sorted({s.covariates[k] for s in cohort.subjects})
    if len(values) > 2:
        raise SchemaError(f"group column must be binary, found {len(values)} levels", column="group")
    return {
        f"group={v:g}": Cohort(tuple(s for s in cohort.subjects if s.covariates[k] == v), f"group={v:g}")
        for v in values
    }


def cmd_km(cohort_csv: str | Path, out_prefix: str | Path) -> RunManifest:
    cohort, names = read_cohort_csv(cohort_csv)
    curves = {label: kaplan_meier(c) for label, c in _groups(cohort, names).items()}
    prefix = Path(out_prefix)
    files = {}
    if len(curves) == 1:
        (curve,) = curves.values()
        files[prefix.with_name(prefix.name + ".csv")] = curve_to_csv(curve)
        files[prefix.with_name(prefix.name + ".json")] = curve_to_json(curve) + "\n"
    else:
        for label, curve in curves.items():
            tag = label.replace("=", "")
            files[prefix.with_name(f"{prefix.name}.{tag}.csv")] = curve_to_csv(curve)
        files[prefix.with_name(prefix.name + ".json")] = json.dumps(
            {label: curve.to_records() for label, curve in curves.items()}, indent=2
        ) + "\n"
    files[prefix.with_name(prefix.name + ".svg")] = survival_svg(curves, title="Kaplan-Meier estimate")
    return _finish("km", [cohort_csv], files, prefix.with_name(prefix.name + ".manifest.json"))


def cmd_cox(cohort_csv: str | Path, out_json: str | Path) -> RunManifest:
    cohort, names = read_cohort_csv(cohort_csv)
    if not names:
        raise SchemaError("cohort CSV has no covariate columns", row=1)
    fit = cox_fit(cohort, CovariateSpec(tuple(names)))
    out = Path(out_json)
    return _finish("cox", [cohort_csv], {out: fit.to_json() + "\n"}, out.with_name(out.name + ".manifest.json"))


# -- simulate ------------------------------------------------------------------


def cmd_simulate(
    config_path: str | Path,
    out_json: str | Path,
    seed: int | None = None,
    replicates: int | None = None,
    workers: int | None = None,
) -> RunManifest:
    config, extra = SimConfig.from_file(config_path)
    if seed is not None:
        config = replace(config, seed=seed)
    try:
        configured = int(extra.pop("replicates", "200"))
    except ValueError:
        raise SchemaError("replicates must be an integer", column="replicates") from None
    if replicates is None:
        replicates = configured
    if extra:
        raise SchemaError(f"unknown config keys: {', '.join(sorted(extra))}")
    result = bias_experiment(config, replicates, workers=workers)
    records = simulate_death_records(config)
    any_prior, within_28, within_60 = england_indicators(records)
    payload = {
        "config": asdict(config),
        "bias": result.to_dict(),
        "indicators": {
            "deaths": len(records),
            "any_prior": any_prior,
            "within_28": within_28,
            "within_60_or_cert": within_60,
        },
    }
    out = Path(out_json)
    deaths_csv = out.with_name(out.stem + ".deaths.csv")
    files = {out: json.dumps(payload, indent=2) + "\n", deaths_csv: death_records_csv(records)}
    return _finish("simulate", [config_path], files, out.with_name(out.name + ".manifest.json"))


# -- entry point ---------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output path (directory for analyze, prefix for km)")
    common.add_argument("--seed", type=lambda s: int(s, 0), help="override the simulation seed")
    common.add_argument("--format", choices=("json", "csv", "text"), default="text",
                        help="format of the summary printed to stdout")

    parser = argparse.ArgumentParser(prog="mortstat", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common], help="aggregate publisher phrase counts")
    p.add_argument("counts", nargs="+", help="counts CSV file(s)")
    p = sub.add_parser("scan", parents=[common], help="count phrases in a corpus directory")
    p.add_argument("corpus")
    p.add_argument("--country", choices=("UK", "USA"), default="UK")
    p.add_argument("--medium", choices=("newspaper", "tv"), default="newspaper")
    p = sub.add_parser("km", parents=[common], help="Kaplan-Meier curve(s) from a cohort CSV")
    p.add_argument("cohort")
    p = sub.add_parser("cox", parents=[common], help="Cox regression on a cohort CSV")
    p.add_argument("cohort")
    p = sub.add_parser("simulate", parents=[common], help="contamination bias experiment")
    p.add_argument("config")
    p.add_argument("--replicates", type=int)
    p.add_argument("--workers", type=int)
    return parser


DEFAULT_OUT = {"analyze": "out", "scan": "counts.csv", "km": "km", "cox": "cox.json", "simulate": "simulation.json"}


def _summary(manifest: RunManifest, fmt: str) -> str:
    if fmt == "json":
        return manifest.to_json()
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["command", "output"])
        for o in manifest.outputs:
            w.writerow([manifest.command, o])
        return buf.getvalue().rstrip("\n")
    return "\n".join(f"wrote {o}" for o in manifest.outputs)


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("MORTSTAT_LOG_LEVEL", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = _parser().parse_args(argv)
    out = args.out or DEFAULT_OUT[args.command]
    try:
        if args.command == "analyze":
            manifest = cmd_analyze(args.counts, out)
        elif args.command == "scan":
            manifest = cmd_scan(args.corpus, out, args.country, args.medium)
        elif args.command == "km":
            manifest = cmd_km(args.cohort, out)
        elif args.command == "cox":
            manifest = cmd_cox(args.cohort, out)
        else:
            manifest = cmd_simulate(args.config, out, seed=args.seed,
                                    replicates=args.replicates, workers=args.workers)
    except MortstatError as exc:
        print(f"mortstat {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (FileNotFoundError, IsADirectoryError, UnicodeDecodeError) as exc:
        print(f"mortstat {args.command}: {exc}", file=sys.stderr)
        return 2
    print(_summary(manifest, args.format))
    return 0


if __name__ == "__main__":
    sys.exit(main())
