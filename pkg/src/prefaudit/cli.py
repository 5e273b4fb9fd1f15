"""Command-line front end: one subcommand per pipeline stage.

Every subcommand writes its outputs into ``--out`` and exits nonzero with a
diagnostic on any failure.  JSON reports embed the invoking flags and input
digests; seeded commands are byte-reproducible.  ``PREFAUDIT_THREADS`` caps
process-level parallelism.
"""

from __future__ import annotations

import dataclasses
import functools
import json
from pathlib import Path

import click
import pandas as pd

from . import __version__
from .errors import PrefauditError
from .feglm import ModelSpec
from .panel import emit_observations, ingest_observations, lag_covariates, summary_stats
from .report import coefficient_plot, load_report_json, wrap_report, write_report_json
from .robustness import (
    buybox_change_sensitivity,
    ratio_cutoff_sensitivity,
    seller_rating_sensitivity,
    write_sensitivity_csv,
)
from .simulate import SimulationConfig, simulate_panel
from .sptests import coo_spec, coo_test, ob_spec, ob_test
from .visibility import (
    compute_visibility_table,
    load_ecp_curve,
    load_keyword_ranks,
    write_visibility_csv,
)


def friendly_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except PrefauditError as exc:
            raise click.ClickException(str(exc)) from exc
        except FileNotFoundError as exc:
            raise click.ClickException(f"cannot read {exc.filename}") from exc

    return wrapper


def _outdir(out: str) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _unit_option(fn):
    return click.option(
        "--unit",
        type=click.Choice(["product_id", "comparison_group_id"]),
        default="product_id",
        show_default=True,
        help="Fixed-effect unit: products (study A) or comparison groups (study B).",
    )(fn)


@click.group()
@click.version_option(version=__version__, prog_name="prefaudit")
def main():
    """Self-preferencing audit toolkit."""


@main.command()
@click.option("--keywords", required=True, type=click.Path(exists=True), help="keyword_ranks.csv input.")
@click.option("--ecp", required=True, type=click.Path(exists=True), help="ecp.csv rank->click-probability table.")
@click.option("--out", required=True, help="Output directory.")
@click.option("--cycle-length", default=365, show_default=True, help="Seasonal window (days).")
@click.option("--scale", default=1_000_000.0, show_default=True, help="Relative visibility scale constant.")
@friendly_errors
def visibility(keywords, ecp, out, cycle_length, scale):
    """Compute relative visibility shares from keyword-rank logs."""
    outdir = _outdir(out)
    records, period_dates = load_keyword_ranks(keywords)
    curve = load_ecp_curve(ecp)
    table = compute_visibility_table(records, curve, cycle_length=cycle_length, scale=scale)
    write_visibility_csv(table, period_dates, outdir / "visibility.csv")
    report = wrap_report(
        "visibility",
        {
            "n_records": len(records),
            "n_offers": int(table.per_offer["offer_id"].nunique()),
            "n_periods": int(table.per_offer["period"].nunique()),
        },
        config={"cycle_length": cycle_length, "scale": scale},
        inputs={"keywords": keywords, "ecp": ecp},
    )
    write_report_json(report, outdir / "visibility.json")
    click.echo(f"wrote {outdir / 'visibility.csv'} ({report['result']['n_offers']} offers)")


@main.command()
@click.option("--panel", required=True, type=click.Path(exists=True), help="panel.csv input.")
@click.option("--out", required=True, help="Output directory.")
@click.option("--currency-rate", default=1.0, show_default=True, help="Multiplier for foreign-market prices.")
@click.option("--foreign-market", multiple=True, default=("UK",), show_default=True)
@friendly_errors
def ingest(panel, out, currency_rate, foreign_market):
    """Validate a panel file, normalize currencies, emit summary statistics."""
    outdir = _outdir(out)
    frame = ingest_observations(panel, currency_rate=currency_rate, foreign_markets=foreign_market)
    emit_observations(frame, outdir / "panel.csv")
    summary_stats(frame).to_csv(outdir / "summary.csv", index=False)
    report = wrap_report(
        "ingest",
        {
            "n_rows": int(len(frame)),
            "n_products": int(frame["product_id"].nunique()),
            "markets": frame.attrs.get("markets", []),
            "gap_products": frame.attrs.get("gap_products", []),
        },
        config={"currency_rate": currency_rate, "foreign_markets": list(foreign_market)},
        inputs={"panel": panel},
    )
    write_report_json(report, outdir / "ingest.json")
    click.echo(f"ingested {len(frame)} rows -> {outdir / 'panel.csv'}")


def _load_panel_for_test(panel_path, seller_rating_impute):
    frame = ingest_observations(panel_path)
    if seller_rating_impute != "none":
        level = float(seller_rating_impute)
        frame.loc[frame["is_amazon"], "rating_seller"] = level
    return frame


def _spec_without_seller_rating(spec: ModelSpec) -> ModelSpec:
    return spec.with_covariates(tuple((c, t) for c, t in spec.covariates if c != "rating_seller"))


@main.command("test-coo")
@click.option("--panel", required=True, type=click.Path(exists=True))
@click.option("--out", required=True)
@click.option("--lag", default=1, show_default=True, help="Covariate lag in days.")
@_unit_option
@click.option(
    "--seller-rating-impute",
    type=click.Choice(["none", "80", "90", "95", "100"]),
    default="100",
    show_default=True,
    help="Platform seller-rating imputation; 'none' drops the regressor.",
)
@friendly_errors
def test_coo(panel, out, lag, unit, seller_rating_impute):
    """Conditioning-on-observables self-preferencing test."""
    outdir = _outdir(out)
    frame = _load_panel_for_test(panel, seller_rating_impute)
    spec = coo_spec(unit=unit)
    if seller_rating_impute == "none":
        spec = _spec_without_seller_rating(spec)
    result = coo_test(lag_covariates(frame, lag), spec)
    report = wrap_report(
        "coo-test",
        result.to_dict(),
        config={"lag": lag, "unit": unit, "seller_rating_impute": seller_rating_impute},
        inputs={"panel": panel},
    )
    write_report_json(report, outdir / "coo_report.json")
    click.echo(result.summary())


@main.command("test-ob")
@click.option("--panel", required=True, type=click.Path(exists=True))
@click.option("--out", required=True)
@click.option("--lag", default=1, show_default=True, help="Regressor lag in days.")
@_unit_option
@friendly_errors
def test_ob(panel, out, lag, unit):
    """Outcome-based self-preferencing test (sales rank on visibility)."""
    outdir = _outdir(out)
    frame = ingest_observations(panel)
    result = ob_test(frame, ob_spec(unit=unit), lag_days=lag)
    report = wrap_report(
        "ob-test",
        result.to_dict(),
        config={"lag": lag, "unit": unit},
        inputs={"panel": panel},
    )
    write_report_json(report, outdir / "ob_report.json")
    click.echo(result.summary())


@main.command()
@click.option("--seed", required=True, type=int, help="Generator seed (mandatory).")
@click.option("--out", required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), help="JSON file with SimulationConfig fields.")
@click.option("--products", type=int, default=None, help="Override n_products.")
@click.option("--days", type=int, default=None, help="Override n_days.")
@click.option("--delta", type=float, default=None, help="Override delta_true.")
@click.option("--study", type=click.Choice(["A", "B"]), default=None)
@friendly_errors
def simulate(seed, out, config_path, products, days, delta, study):
    """Generate a synthetic marketplace panel with known ground truth."""
    outdir = _outdir(out)
    fields = json.loads(Path(config_path).read_text()) if config_path else {}
    overrides = {"n_products": products, "n_days": days, "delta_true": delta, "study": study}
    fields.update({k: v for k, v in overrides.items() if v is not None})
    fields["seed"] = seed
    config = SimulationConfig(**fields)
    frame, truth = simulate_panel(config)
    emit_observations(frame, outdir / "panel.csv")
    ground_truth = {
        "delta_true": truth.delta_true,
        "betas": truth.betas,
        "unit_effects": {str(k): v for k, v in truth.unit_effects.items()},
        "date_effects": {str(k.date()): v for k, v in truth.date_effects.items()},
    }
    report = wrap_report("simulate", ground_truth, config=dataclasses.asdict(config))
    write_report_json(report, outdir / "ground_truth.json")
    click.echo(f"simulated {len(frame)} rows -> {outdir / 'panel.csv'}")


@main.command()
@click.option("--panel", required=True, type=click.Path(exists=True))
@click.option("--out", required=True)
@click.option(
    "--analysis",
    type=click.Choice(["buybox", "ratio-cutoff", "seller-rating", "all"]),
    default="all",
    show_default=True,
)
@click.option("--cutoffs", default="1:30", show_default=True, help="Ratio cutoffs as lo:hi or comma list.")
@click.option("--lag", default=1, show_default=True)
@_unit_option
@friendly_errors
def robustness(panel, out, analysis, cutoffs, lag, unit):
    """Run the sensitivity battery and export sensitivity.csv."""
    outdir = _outdir(out)
    frame = ingest_observations(panel)
    spec = coo_spec(unit=unit)
    results = {}
    summaries = {}
    if analysis in ("buybox", "all"):
        reports = buybox_change_sensitivity(frame, spec, lag_days=lag)
        results["buybox_change"] = reports
        summaries["buybox_change"] = {"variants": {k: v.to_dict() for k, v in reports.items()}}
    if analysis in ("ratio-cutoff", "all"):
        table = ratio_cutoff_sensitivity(frame, coo_spec(unit="comparison_group_id"), _parse_cutoffs(cutoffs), lag_days=lag)
        results["ratio_cutoff"] = table
        summaries["ratio_cutoff"] = {"cells": table.to_dict(orient="records")}
    if analysis in ("seller-rating", "all"):
        reports = seller_rating_sensitivity(frame, spec, lag_days=lag)
        results["seller_rating"] = reports
        summaries["seller_rating"] = {"variants": {k: v.to_dict() for k, v in reports.items()}}
    write_sensitivity_csv(results, outdir / "sensitivity.csv")
    report = wrap_report(
        "robustness",
        summaries,
        config={"analysis": analysis, "cutoffs": cutoffs, "lag": lag, "unit": unit},
        inputs={"panel": panel},
    )
    write_report_json(report, outdir / "robustness.json")
    click.echo(f"wrote {outdir / 'sensitivity.csv'}")


def _parse_cutoffs(text: str) -> list[int]:
    text = text.strip()
    if ":" in text:
        lo, hi = text.split(":", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(part) for part in text.split(",") if part]


@main.command()
@click.argument("reports", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--out", required=True)
@click.option("--title", default="Self-preferencing estimates", show_default=True)
@friendly_errors
def report(reports, out, title):
    """Render a coefficient-and-CI plot (SVG + plot-data CSV) from report JSONs."""
    outdir = _outdir(out)
    loaded = [load_report_json(p) for p in reports]
    plottable = []
    for blob in loaded:
        kind = blob.get("kind", "")
        if kind in ("coo-test", "ob-test"):
            plottable.append(blob)
        elif kind == "robustness":
            for name, payload in blob["result"].items():
                if "variants" in payload:
                    plottable.append({"kind": name, "result": payload})
        else:
            raise click.ClickException(f"report kind {kind!r} has nothing to plot")
    coefficient_plot(plottable, outdir / "estimates.svg", outdir / "estimates.csv", title=title)
    click.echo(f"wrote {outdir / 'estimates.svg'} and {outdir / 'estimates.csv'}")


if __name__ == "__main__":
    main()
