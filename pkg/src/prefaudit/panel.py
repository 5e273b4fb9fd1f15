"""Daily product-level panel: ingestion, validation, lagging, filtering.

The panel is a plain ``pandas.DataFrame`` with one row per (product, date)
and the column schema in :data:`PANEL_COLUMNS`.  Operations return new
frames and record pipeline state (markets, lag applied) in ``frame.attrs``
so downstream tests can check their preconditions.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import ValidationError

logger = logging.getLogger(__name__)

#: Canonical column order of ``panel.csv``.
PANEL_COLUMNS = [
    "product_id",
    "date",
    "organic_visibility",
    "sponsored_visibility",
    "sales_rank",
    "price",
    "count_reviews",
    "rating_product",
    "rating_seller",
    "is_prime",
    "is_amazon",
    "buybox_seller_id",
    "comparison_group_id",
    "market",
]

_BOOL_COLUMNS = ["is_prime", "is_amazon"]
_OPTIONAL_COLUMNS = ["sponsored_visibility", "comparison_group_id"]

#: Columns that are never lagged (identifiers plus the default outcome).
DEFAULT_KEEP_CURRENT = ("organic_visibility",)


@dataclass(frozen=True)
class SampleFilter:
    """Product-level sample selection criteria.

    ``sales_rank_range`` bounds the product's average sales rank over the
    days it is present; ``availability_min_share`` is the minimum fraction
    of the observation window with a row present; ``first_listed_before``
    compares against the product's earliest observed date; and
    ``require_buybox_variation`` keeps only products with at least two
    distinct buy-box sellers.  ``window`` optionally pins the availability
    window; by default it is the panel's full calendar span.
    """

    sales_rank_range: tuple[float, float] = (1.0, float("inf"))
    availability_min_share: float = 0.0
    first_listed_before: pd.Timestamp | None = None
    require_buybox_variation: bool = False
    window: tuple[pd.Timestamp, pd.Timestamp] | None = None

    def __post_init__(self):
        lo, hi = self.sales_rank_range
        if lo > hi:
            raise ValidationError(f"sales_rank_range min {lo} exceeds max {hi}")
        if not 0.0 <= self.availability_min_share <= 1.0:
            raise ValidationError(f"availability_min_share must be in [0, 1], got {self.availability_min_share}")


@dataclass(frozen=True)
class ComparisonGroup:
    """One platform product and up to five third-party substitutes."""

    group_id: str
    platform_product_id: str
    substitute_product_ids: tuple[str, ...]

    def __post_init__(self):
        if not 1 <= len(self.substitute_product_ids) <= 5:
            raise ValidationError(
                f"group {self.group_id!r} needs 1-5 substitutes, got {len(self.substitute_product_ids)}"
            )
        if self.platform_product_id in self.substitute_product_ids:
            raise ValidationError(f"group {self.group_id!r} lists its platform product as a substitute")


def _validate_rows(df: pd.DataFrame) -> list[str]:
    problems = []

    def check(mask, msg):
        for idx in df.index[mask.to_numpy()]:
            problems.append(f"row {idx + 2}: {msg}")  # +2: header line and 1-based rows

    check(df["price"] <= 0, "price must be positive")
    check(df["sales_rank"] < 1, "sales_rank must be a positive integer")
    check((df["rating_product"] < 1) | (df["rating_product"] > 5), "rating_product must be in [1, 5]")
    check((df["rating_seller"] < 0) | (df["rating_seller"] > 100), "rating_seller must be in [0, 100]")
    check(df["organic_visibility"] < 0, "organic_visibility must be non-negative")
    sponsored = df["sponsored_visibility"]
    check(sponsored.notna() & (sponsored < 0), "sponsored_visibility must be non-negative")
    check(df["count_reviews"] < 1, "count_reviews must be a positive integer")
    for col in _BOOL_COLUMNS:
        check(~df[col].isin([0, 1]), f"{col} must be 0 or 1")
    return problems


def ingest_observations(
    path,
    currency_rate: float = 1.0,
    foreign_markets: Sequence[str] = ("UK",),
) -> pd.DataFrame:
    """Read and validate ``panel.csv``; normalize foreign-currency prices.

    Prices of rows whose ``market`` is in ``foreign_markets`` are multiplied
    by ``currency_rate``.  Duplicate (product, date) rows and any bound
    violation raise :class:`ValidationError` with per-row diagnostics.
    Date gaps within a product are allowed but logged and flagged in
    ``frame.attrs['gap_products']``.
    """
    if currency_rate <= 0:
        raise ValidationError(f"currency_rate must be positive, got {currency_rate}")
    df = pd.read_csv(path, dtype={"product_id": str, "buybox_seller_id": str, "comparison_group_id": str, "market": str})
    missing = [c for c in PANEL_COLUMNS if c not in df.columns and c not in _OPTIONAL_COLUMNS]
    if missing:
        raise ValidationError(f"panel file {path} lacks required columns {missing}")
    for col in _OPTIONAL_COLUMNS:
        if col not in df.columns:
            df[col] = np.nan
    df["date"] = pd.to_datetime(df["date"], format="ISO8601").dt.normalize()

    dupes = df.duplicated(["product_id", "date"])
    if dupes.any():
        keys = df.loc[dupes, ["product_id", "date"]].head(5).to_records(index=False).tolist()
        raise ValidationError(f"duplicate (product, date) rows, e.g. {keys}")

    problems = _validate_rows(df)
    if problems:
        raise ValidationError(f"panel file {path} failed validation ({len(problems)} problems)", problems)

    foreign = df["market"].isin(set(foreign_markets))
    df.loc[foreign, "price"] = df.loc[foreign, "price"] * currency_rate
    for col in _BOOL_COLUMNS:
        df[col] = df[col].astype(bool)
    df["comparison_group_id"] = df["comparison_group_id"].fillna("")
    df = df.sort_values(["product_id", "date"], kind="mergesort", ignore_index=True)

    gaps = []
    for pid, sub in df.groupby("product_id", sort=False):
        days = sub["date"].diff().dt.days.dropna()
        if (days > 1).any():
            gaps.append(pid)
    if gaps:
        logger.warning("%d products have date gaps (first few: %s)", len(gaps), gaps[:5])
    df.attrs["gap_products"] = gaps
    df.attrs["markets"] = sorted(df["market"].dropna().unique().tolist())
    df.attrs["lagged_by"] = 0
    return df


def emit_observations(panel: pd.DataFrame, path) -> None:
    """Write the panel back to CSV in the canonical schema (roundtrip-safe)."""
    out = panel[PANEL_COLUMNS].copy()
    out["date"] = out["date"].dt.date.astype(str)
    for col in _BOOL_COLUMNS:
        out[col] = out[col].astype(int)
    out.to_csv(path, index=False)


def lag_covariates(
    panel: pd.DataFrame,
    lag_days: int = 1,
    keep_current: Sequence[str] = DEFAULT_KEEP_CURRENT,
) -> pd.DataFrame:
    """Replace covariates on day t with their values at t - ``lag_days``.

    Columns in ``keep_current`` (default: the visibility outcome) and the
    identifiers keep their day-t values.  Rows without a lagged predecessor
    are dropped; ``lag_days=0`` is the identity.
    """
    if lag_days < 0:
        raise ValidationError(f"lag_days must be non-negative, got {lag_days}")
    if lag_days == 0:
        out = panel.copy()
        out.attrs = dict(panel.attrs)
        return out
    covariates = [c for c in panel.columns if c not in ("product_id", "date", *keep_current)]
    current = panel[["product_id", "date", *keep_current]]
    shifted = panel[["product_id", "date", *covariates]].copy()
    shifted["date"] = shifted["date"] + pd.Timedelta(days=lag_days)
    out = current.merge(shifted, on=["product_id", "date"], how="inner", sort=False)
    out = out[list(panel.columns)].sort_values(["product_id", "date"], kind="mergesort", ignore_index=True)
    if out.empty:
        logger.warning("lag of %d days left an empty panel", lag_days)
    out.attrs = dict(panel.attrs)
    out.attrs["lagged_by"] = panel.attrs.get("lagged_by", 0) + lag_days
    return out


def filter_sample(panel: pd.DataFrame, sample_filter: SampleFilter) -> pd.DataFrame:
    """Keep products satisfying every criterion of ``sample_filter``."""
    if panel.empty:
        return panel.copy()
    if sample_filter.window is not None:
        start, end = sample_filter.window
    else:
        start, end = panel["date"].min(), panel["date"].max()
    window_days = (end - start).days + 1

    by_product = panel.groupby("product_id", sort=False)
    stats = by_product.agg(
        avg_rank=("sales_rank", "mean"),
        days_present=("date", "nunique"),
        first_date=("date", "min"),
        sellers=("buybox_seller_id", "nunique"),
    )
    lo, hi = sample_filter.sales_rank_range
    keep = (stats["avg_rank"] >= lo) & (stats["avg_rank"] <= hi)
    keep &= stats["days_present"] / window_days >= sample_filter.availability_min_share
    if sample_filter.first_listed_before is not None:
        keep &= stats["first_date"] < pd.Timestamp(sample_filter.first_listed_before)
    if sample_filter.require_buybox_variation:
        keep &= stats["sellers"] >= 2
    kept = set(stats.index[keep])
    out = panel[panel["product_id"].isin(kept)].reset_index(drop=True)
    out.attrs = dict(panel.attrs)
    return out


def _stable_int(text: str) -> int:
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "big")


def build_comparison_groups(
    platform_products: Mapping[str, str],
    candidates: Mapping[str, str],
    max_substitutes: int = 5,
    seed: int | None = None,
) -> list[ComparisonGroup]:
    """Group each platform product with up to five same-category substitutes.

    ``platform_products`` and ``candidates`` map product id to narrowest
    category.  When more than ``max_substitutes`` candidates exist, a seeded
    uniform sample is drawn; the draw depends only on ``seed`` and the
    platform product id, so results are invariant to input ordering.  Each
    candidate is used in at most one group.  Platform products with zero
    eligible candidates are skipped with a warning.
    """
    if seed is None:
        raise ValidationError("build_comparison_groups requires an explicit seed")
    by_category: dict[str, list[str]] = {}
    for pid in sorted(candidates):
        by_category.setdefault(candidates[pid], []).append(pid)

    groups = []
    used: set[str] = set()
    for platform_id in sorted(platform_products):
        pool = [c for c in by_category.get(platform_products[platform_id], []) if c not in used]
        if not pool:
            logger.warning("no eligible substitutes for platform product %s; group omitted", platform_id)
            continue
        if len(pool) > max_substitutes:
            rng = np.random.default_rng([seed, _stable_int(platform_id)])
            chosen = sorted(rng.choice(np.array(pool, dtype=object), size=max_substitutes, replace=False).tolist())
        else:
            chosen = pool
        used.update(chosen)
        groups.append(
            ComparisonGroup(
                group_id=platform_id,
                platform_product_id=platform_id,
                substitute_product_ids=tuple(chosen),
            )
        )
    return groups


def apply_comparison_groups(panel: pd.DataFrame, groups: Iterable[ComparisonGroup]) -> pd.DataFrame:
    """Fill ``comparison_group_id`` from ``groups``; ungrouped products are dropped."""
    membership = {}
    for g in groups:
        membership[g.platform_product_id] = g.group_id
        for sub in g.substitute_product_ids:
            if sub in membership:
                raise ValidationError(f"product {sub!r} belongs to two comparison groups")
            membership[sub] = g.group_id
    out = panel[panel["product_id"].isin(membership)].copy()
    out["comparison_group_id"] = out["product_id"].map(membership)
    out = out.reset_index(drop=True)
    out.attrs = dict(panel.attrs)
    return out


def pool_samples(*panels: pd.DataFrame) -> pd.DataFrame:
    """Concatenate disjoint market panels; product-id collisions are errors."""
    if not panels:
        raise ValidationError("pool_samples needs at least one panel")
    seen: dict[str, int] = {}
    for i, p in enumerate(panels):
        for pid in p["product_id"].unique():
            if pid in seen:
                raise ValidationError(f"product id {pid!r} appears in panels {seen[pid]} and {i}")
            seen[pid] = i
    out = pd.concat([p for p in panels], ignore_index=True)
    out = out.sort_values(["product_id", "date"], kind="mergesort", ignore_index=True)
    markets: list[str] = []
    for p in panels:
        markets.extend(p.attrs.get("markets", []) or p["market"].dropna().unique().tolist())
    out.attrs["markets"] = sorted(set(markets))
    out.attrs["lagged_by"] = panels[0].attrs.get("lagged_by", 0)
    return out


_SUMMARY_VARIABLES = [
    "organic_visibility",
    "sales_rank",
    "price",
    "count_reviews",
    "rating_product",
    "rating_seller",
    "is_prime",
]


def summary_stats(panel: pd.DataFrame, group_by: str = "is_amazon") -> pd.DataFrame:
    """Min/q1/median/mean/q3/max/SD per variable, split by ``group_by``.

    Quantiles use type-7 (linear) interpolation; SD uses the n-1
    denominator.  A pooled "all" group is always included.
    """
    if panel.empty:
        raise ValidationError("summary_stats needs a non-empty panel")
    groups: list[tuple[str, pd.DataFrame]] = [
        (str(value), sub) for value, sub in panel.groupby(group_by, sort=True)
    ]
    groups.append(("all", panel))
    rows = []
    for variable in _SUMMARY_VARIABLES:
        for label, sub in groups:
            x = sub[variable].dropna().astype(float).to_numpy()
            if x.size == 0:
                continue
            rows.append(
                {
                    "variable": variable,
                    "group": label,
                    "min": float(x.min()),
                    "q1": float(np.quantile(x, 0.25)),
                    "median": float(np.quantile(x, 0.5)),
                    "mean": float(x.mean()),
                    "q3": float(np.quantile(x, 0.75)),
                    "max": float(x.max()),
                    "sd": float(x.std(ddof=1)) if x.size > 1 else 0.0,
                }
            )
    return pd.DataFrame(rows)
