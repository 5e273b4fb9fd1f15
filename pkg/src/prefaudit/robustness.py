"""Sensitivity analyses: buy-box changes, group similarity, rating imputation.

Every variant is a plain refit through the same estimator; conclusions are
pure functions of the returned confidence intervals.  Results serialize to a
long-format ``sensitivity.csv`` with one row per (analysis, variant).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import ValidationError
from .feglm import ModelSpec
from .panel import lag_covariates
from .sptests import TestReport, coo_spec, coo_test

logger = logging.getLogger(__name__)

BUYBOX_VARIANTS = ("baseline", "indicator_t", "indicator_t_t1", "exclude_t", "exclude_t_t1")
SELLER_RATING_LEVELS = (None, 80, 90, 95, 100)


def _change_flags(panel: pd.DataFrame) -> pd.DataFrame:
    """Per (product, date): did the buy-box seller change at t, or at t-1?"""
    sellers = panel[["product_id", "date", "buybox_seller_id"]].sort_values(
        ["product_id", "date"], kind="mergesort"
    )
    grouped = sellers.groupby("product_id", sort=False)["buybox_seller_id"]
    change_t = (sellers["buybox_seller_id"] != grouped.shift(1)) & grouped.shift(1).notna()
    flags = sellers.assign(change_t=change_t.to_numpy())
    flags["change_t1"] = flags.groupby("product_id", sort=False)["change_t"].shift(1, fill_value=False)
    return flags[["product_id", "date", "change_t", "change_t1"]]


def buybox_change_sensitivity(
    panel: pd.DataFrame,
    spec: ModelSpec | None = None,
    lag_days: int = 1,
    *,
    z: float = 1.96,
) -> dict[str, TestReport]:
    """The original fit plus four measurement-error variants.

    A change at t means the buy-box seller on day t differs from day t-1.
    The change indicators flag outcome days where the visibility snapshot
    may straddle a seller switch, so they enter unlagged: (i) indicator at
    t; (ii) indicators at t and t-1; (iii) excluding the change day;
    (iv) excluding the change day and the day before.  Indicator columns
    with no variation (a panel without seller changes) are skipped, making
    those variants exact no-ops.
    """
    if "buybox_seller_id" not in panel.columns or panel["buybox_seller_id"].isna().all():
        raise ValidationError("buy-box sensitivity needs the buybox_seller_id column")
    spec = spec or coo_spec()
    flags = _change_flags(panel)
    lagged = lag_covariates(panel, lag_days)
    attrs = dict(lagged.attrs)
    merged = lagged.merge(flags, on=["product_id", "date"], how="left", sort=False)
    for col in ("change_t", "change_t1"):
        if merged[col].isna().any():
            merged[col] = merged[col].where(merged[col].notna(), False)
        merged[col] = merged[col].astype(bool)
    merged.attrs = attrs
    sample = None

    def refit(frame: pd.DataFrame, extra: Sequence[str]) -> TestReport:
        usable = [c for c in extra if frame[c].to_numpy(dtype=float).std() > 0]
        skipped = set(extra) - set(usable)
        if skipped:
            logger.info("no variation in %s; indicator dropped from this variant", sorted(skipped))
        variant_spec = spec.with_covariates(spec.covariates + tuple((c, "identity") for c in usable))
        frame = frame.copy()
        frame.attrs = attrs
        return coo_test(frame, variant_spec, z=z, sample=sample)

    reports: dict[str, TestReport] = {}
    reports["baseline"] = refit(merged, ())
    sample = reports["baseline"].sample
    merged_f = merged.assign(
        change_t=merged["change_t"].astype(float), change_t1=merged["change_t1"].astype(float)
    )
    merged_f.attrs = attrs
    reports["indicator_t"] = refit(merged_f, ("change_t",))
    reports["indicator_t_t1"] = refit(merged_f, ("change_t", "change_t1"))
    reports["exclude_t"] = refit(merged[~merged["change_t"]], ())
    reports["exclude_t_t1"] = refit(merged[~(merged["change_t"] | merged["change_t1"])], ())
    return reports


def _group_visibility_ratio(panel: pd.DataFrame) -> pd.Series:
    """Per group: platform mean visibility over the mean of substitute means.

    Window means are taken per product first.  Groups whose two sides are
    both zero count as ratio 1 (no difference); a single zero side is an
    infinite ratio, dropped at every finite cutoff.
    """
    means = panel.groupby(["comparison_group_id", "product_id"], sort=True).agg(
        vis=("organic_visibility", "mean"), is_amazon=("is_amazon", "any")
    )
    ratios = {}
    for gid, sub in means.groupby(level=0, sort=True):
        platform = sub[sub["is_amazon"]]["vis"]
        third = sub[~sub["is_amazon"]]["vis"]
        if platform.empty or third.empty:
            raise ValidationError(f"comparison group {gid!r} lacks a platform product or substitutes")
        a, b = float(platform.mean()), float(third.mean())
        if a == 0.0 and b == 0.0:
            ratios[gid] = 1.0
        elif a == 0.0 or b == 0.0:
            ratios[gid] = np.inf
        else:
            ratios[gid] = max(a / b, b / a)
    return pd.Series(ratios, name="ratio")


def ratio_cutoff_sensitivity(
    panel: pd.DataFrame,
    spec: ModelSpec | None = None,
    cutoffs: Iterable[int] = range(1, 31),
    lag_days: int = 1,
    *,
    z: float = 1.96,
) -> pd.DataFrame:
    """Refit after dropping groups with dissimilar visibility levels.

    For each integer cutoff x, comparison groups whose platform/third-party
    mean-visibility ratio (or its inverse) exceeds x are dropped before the
    refit.  Returns one row per cutoff with the estimate, its percent CI and
    the share of dropped groups; a cutoff that drops every group yields an
    empty (NaN) row.
    """
    if "comparison_group_id" not in panel.columns or (panel["comparison_group_id"] == "").all():
        raise ValidationError("ratio-cutoff sensitivity needs comparison groups")
    spec = spec or coo_spec(unit="comparison_group_id")
    ratio = _group_visibility_ratio(panel)
    lagged = lag_covariates(panel, lag_days)
    attrs = dict(lagged.attrs)
    n_groups = len(ratio)

    rows = []
    for x in cutoffs:
        keep = set(ratio.index[ratio <= float(x)])
        share_dropped = 1.0 - len(keep) / n_groups
        row = {"cutoff": int(x), "share_dropped": share_dropped, "n_groups": len(keep)}
        if not keep:
            row.update({"delta": np.nan, "se": np.nan, "percent": np.nan, "ci_low": np.nan, "ci_high": np.nan})
            logger.warning("cutoff %d drops every comparison group; cell left empty", x)
        else:
            sub = lagged[lagged["comparison_group_id"].isin(keep)].reset_index(drop=True)
            sub.attrs = attrs
            report = coo_test(sub, spec, z=z)
            row.update(
                {
                    "delta": report.delta,
                    "se": report.se,
                    "percent": report.percent,
                    "ci_low": report.ci_low,
                    "ci_high": report.ci_high,
                }
            )
        rows.append(row)
    return pd.DataFrame(rows)


def seller_rating_sensitivity(
    panel: pd.DataFrame,
    spec: ModelSpec | None = None,
    imputations: Sequence[int | None] = SELLER_RATING_LEVELS,
    lag_days: int = 1,
    *,
    z: float = 1.96,
) -> dict[str, TestReport]:
    """Refit with the platform's seller rating imputed at each level.

    ``None`` drops the seller-rating regressor entirely; numeric levels
    overwrite ``rating_seller`` on platform rows before the lag is applied.
    """
    spec = spec or coo_spec()
    reports: dict[str, TestReport] = {}
    sample = None
    for level in imputations:
        if level is None:
            variant_spec = spec.with_covariates(
                tuple((c, t) for c, t in spec.covariates if c != "rating_seller")
            )
            frame = panel
            label = "none"
        else:
            if not 0 <= level <= 100:
                raise ValidationError(f"seller rating imputation {level} outside [0, 100]")
            variant_spec = spec
            frame = panel.copy()
            frame.loc[frame["is_amazon"], "rating_seller"] = float(level)
            frame.attrs = dict(panel.attrs)
            label = str(level)
        lagged = lag_covariates(frame, lag_days)
        report = coo_test(lagged, variant_spec, z=z, sample=sample)
        sample = sample or report.sample
        reports[label] = report
    return reports


def write_sensitivity_csv(
    results: Mapping[str, Mapping[str, TestReport] | pd.DataFrame], path
) -> None:
    """Long-format export: ``analysis,variant,delta,se,ci_low,ci_high,share_dropped``."""
    rows = []
    for analysis, payload in results.items():
        if isinstance(payload, pd.DataFrame):
            for _, r in payload.iterrows():
                rows.append(
                    {
                        "analysis": analysis,
                        "variant": str(int(r["cutoff"])),
                        "delta": r["delta"],
                        "se": r["se"],
                        "ci_low": r["ci_low"],
                        "ci_high": r["ci_high"],
                        "share_dropped": r["share_dropped"],
                    }
                )
        else:
            for variant, report in payload.items():
                rows.append(
                    {
                        "analysis": analysis,
                        "variant": variant,
                        "delta": report.delta,
                        "se": report.se,
                        "ci_low": report.ci_low,
                        "ci_high": report.ci_high,
                        "share_dropped": np.nan,
                    }
                )
    pd.DataFrame(rows).to_csv(path, index=False)
