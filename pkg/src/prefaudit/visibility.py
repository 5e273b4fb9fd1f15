"""Search-visibility index computed from keyword-rank logs.

An offer's raw visibility for one keyword and day is the keyword's query
volume times the expected click probability (ECP) of the rank the offer
holds.  Summing over keywords gives the offer's platform-wide visibility;
replacing the daily volume with its trailing-cycle average removes
seasonality; dividing by the period total and scaling (one million by
default) yields the relative visibility share that the panel regressions
consume.

All functions are pure and operate on immutable inputs, so callers may
evaluate keywords or periods concurrently.  Aggregations sort their keys
first, which fixes the summation order and makes results independent of
input ordering and thread count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import ValidationError

#: Default scale for relative visibility shares.
DEFAULT_SCALE = 1_000_000.0

#: Default seasonal-cycle length in days (yearly cycle, daily observations).
DEFAULT_CYCLE_DAYS = 365


@dataclass(frozen=True)
class KeywordRankRecord:
    """One observed (keyword, period, offer) tuple from a rank log.

    ``period`` is an integer day index; ``rank`` is the 1-based position of
    the offer in the keyword's search results and ``query_volume`` the number
    of searches for the keyword on that day.
    """

    keyword_id: str
    period: int
    offer_id: str
    rank: int
    query_volume: float

    def __post_init__(self):
        if self.rank < 1 or int(self.rank) != self.rank:
            raise ValidationError(f"rank must be a positive integer, got {self.rank!r}")
        if not np.isfinite(self.query_volume) or self.query_volume < 0:
            raise ValidationError(f"query_volume must be a finite non-negative real, got {self.query_volume!r}")


@dataclass(frozen=True)
class EcpCurve:
    """Rank -> expected-click-probability table.

    Probabilities must be in [0, 1] and non-increasing in rank (enforced at
    construction).  Ranks beyond the last entry have probability 0; a rank
    *between* entries is outside the curve's domain and raises.  Optional
    keyword-class variants hold a separate curve per class of keywords.
    """

    ranks: tuple[int, ...]
    probs: tuple[float, ...]
    variants: Mapping[str, "EcpCurve"] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.ranks) != len(self.probs) or not self.ranks:
            raise ValidationError("ECP curve needs matching, non-empty rank and probability sequences")
        ranks = np.asarray(self.ranks)
        probs = np.asarray(self.probs, dtype=float)
        if ranks[0] < 1 or np.any(np.diff(ranks) <= 0):
            raise ValidationError("ECP ranks must be strictly increasing positive integers")
        if np.any(probs < 0) or np.any(probs > 1):
            raise ValidationError("ECP probabilities must lie in [0, 1]")
        if np.any(np.diff(probs) > 0):
            raise ValidationError("ECP probabilities must be non-increasing in rank")

    @classmethod
    def from_pairs(cls, entries: Mapping[int, float] | Iterable[tuple[int, float]], variants=None) -> "EcpCurve":
        items = sorted(dict(entries).items())
        return cls(
            ranks=tuple(r for r, _ in items),
            probs=tuple(p for _, p in items),
            variants=dict(variants or {}),
        )

    @classmethod
    def geometric(cls, top: float = 0.35, decay: float = 0.7, length: int = 20) -> "EcpCurve":
        """Strictly decreasing default curve: ``top * decay**(rank-1)``."""
        return cls.from_pairs({r: top * decay ** (r - 1) for r in range(1, length + 1)})

    def for_class(self, keyword_class: str | None = None) -> "EcpCurve":
        if keyword_class is None:
            return self
        try:
            return self.variants[keyword_class]
        except KeyError:
            raise ValidationError(f"no ECP curve variant for keyword class {keyword_class!r}") from None

    def prob(self, rank: int) -> float:
        """Click probability at ``rank``; 0 beyond the last tabulated rank."""
        if rank < 1:
            raise ValidationError(f"rank must be >= 1, got {rank}")
        if rank > self.ranks[-1]:
            return 0.0
        pos = np.searchsorted(self.ranks, rank)
        if pos == len(self.ranks) or self.ranks[pos] != rank:
            raise ValidationError(f"rank {rank} is not in the ECP curve's domain")
        return float(self.probs[pos])

    def prob_array(self, ranks: np.ndarray) -> np.ndarray:
        ranks = np.asarray(ranks)
        if np.any(ranks < 1):
            raise ValidationError("ranks must be >= 1")
        table_ranks = np.asarray(self.ranks)
        pos = np.searchsorted(table_ranks, ranks)
        beyond = ranks > table_ranks[-1]
        pos_clipped = np.minimum(pos, len(table_ranks) - 1)
        missing = (~beyond) & (table_ranks[pos_clipped] != ranks)
        if np.any(missing):
            bad = np.unique(ranks[missing])[:5]
            raise ValidationError(f"ranks {bad.tolist()} are not in the ECP curve's domain")
        out = np.asarray(self.probs, dtype=float)[pos_clipped]
        out[beyond] = 0.0
        return out


def raw_keyword_visibility(record: KeywordRankRecord, curve: EcpCurve) -> float:
    """Raw visibility of one offer for one keyword-day: volume times ECP."""
    return record.query_volume * curve.prob(record.rank)


def seasonal_volume(volumes: Sequence[float], cycle_length: int = DEFAULT_CYCLE_DAYS) -> np.ndarray:
    """Trailing-window mean of a keyword's daily query volumes.

    Entry ``t`` is the arithmetic mean over the ``cycle_length`` periods
    ending at ``t``.  The first ``cycle_length - 1`` periods average over all
    available history instead of being dropped (partial-window backfill).
    """
    if cycle_length < 1:
        raise ValidationError(f"cycle_length must be a positive integer, got {cycle_length}")
    vols = np.asarray(volumes, dtype=float)
    if vols.size == 0:
        raise ValidationError("empty volume series: seasonal window is undefined")
    if np.any(~np.isfinite(vols)) or np.any(vols < 0):
        raise ValidationError("query volumes must be finite and non-negative")
    csum = np.cumsum(vols)
    n = vols.size
    idx = np.arange(n)
    window = np.minimum(idx + 1, cycle_length)
    lead = csum
    lag = np.where(idx >= cycle_length, csum[np.maximum(idx - cycle_length, 0)], 0.0)
    return (lead - lag) / window


def keyword_visibility_index(record: KeywordRankRecord, seasonal: float, curve: EcpCurve) -> float:
    """Seasonality-free visibility: trailing-average volume times ECP."""
    if not np.isfinite(seasonal) or seasonal < 0:
        raise ValidationError(f"seasonal volume must be non-negative, got {seasonal!r}")
    return seasonal * curve.prob(record.rank)


def aggregate_visibility(per_keyword_values: Iterable[float]) -> float:
    """Sum keyword-level visibility over the keyword set; empty set is 0."""
    total = 0.0
    for v in per_keyword_values:
        if v < 0:
            raise ValidationError(f"visibility contributions must be non-negative, got {v!r}")
        total += v
    return total


def relative_visibility(per_offer: Mapping[str, float], scale: float = DEFAULT_SCALE) -> dict[str, float]:
    """Each offer's share of the period total, multiplied by ``scale``."""
    if scale <= 0:
        raise ValidationError(f"scale must be positive, got {scale!r}")
    offers = sorted(per_offer)
    values = np.array([per_offer[o] for o in offers], dtype=float)
    if np.any(values < 0):
        raise ValidationError("visibility values must be non-negative")
    total = values.sum()
    if total <= 0:
        raise ValidationError("all offers have zero visibility: relative share is undefined")
    return {o: float(v / total * scale) for o, v in zip(offers, values)}


@dataclass(frozen=True)
class VisibilityTable:
    """Full output of the visibility pipeline.

    ``per_offer`` has one row per (offer, period) over all offers and every
    period observed in the input: columns ``raw`` (volume-weighted),
    ``index`` (seasonality-free) and ``relative`` (share times scale).
    ``per_keyword`` keeps the keyword-level contributions; ``seasonal`` the
    per-(keyword, period) volumes and their trailing averages, with a
    ``partial_window`` flag for backfilled early periods.
    """

    per_offer: pd.DataFrame
    per_keyword: pd.DataFrame
    seasonal: pd.DataFrame
    scale: float
    cycle_length: int


def _collect_records(records: Iterable[KeywordRankRecord]):
    keys = set()
    rows = []
    for rec in records:
        key = (rec.keyword_id, rec.period, rec.offer_id)
        if key in keys:
            raise ValidationError(f"duplicate record for keyword={rec.keyword_id!r} period={rec.period} offer={rec.offer_id!r}")
        keys.add(key)
        rows.append(rec)
    if not rows:
        raise ValidationError("no keyword rank records supplied")
    return rows


def compute_visibility_table(
    records: Iterable[KeywordRankRecord],
    curve: EcpCurve,
    cycle_length: int = DEFAULT_CYCLE_DAYS,
    scale: float = DEFAULT_SCALE,
) -> VisibilityTable:
    """Run the whole pipeline: raw -> seasonal -> index -> relative shares.

    Periods form a contiguous day axis from the earliest to the latest
    observed period; keywords missing on a day contribute volume 0 to their
    seasonal window.  Offers unranked for a keyword contribute exactly 0.
    """
    rows = _collect_records(records)
    df = pd.DataFrame(
        {
            "keyword_id": [r.keyword_id for r in rows],
            "period": [r.period for r in rows],
            "offer_id": [r.offer_id for r in rows],
            "rank": [r.rank for r in rows],
            "query_volume": [r.query_volume for r in rows],
        }
    ).sort_values(["keyword_id", "period", "offer_id"], kind="mergesort", ignore_index=True)

    # one volume per (keyword, period): offers sharing it must agree
    vol_check = df.groupby(["keyword_id", "period"])["query_volume"].nunique()
    if (vol_check > 1).any():
        bad = vol_check[vol_check > 1].index[:5].tolist()
        raise ValidationError(f"conflicting query volumes for keyword-periods {bad}")

    p_min, p_max = int(df["period"].min()), int(df["period"].max())
    axis = np.arange(p_min, p_max + 1)
    keywords = df["keyword_id"].unique()

    vol_wide = (
        df.drop_duplicates(["keyword_id", "period"])
        .pivot(index="keyword_id", columns="period", values="query_volume")
        .reindex(index=keywords, columns=axis)
        .fillna(0.0)
    )
    seasonal_wide = np.vstack([seasonal_volume(vol_wide.loc[k].to_numpy(), cycle_length) for k in keywords])
    seasonal_df = pd.DataFrame(
        {
            "keyword_id": np.repeat(keywords, axis.size),
            "period": np.tile(axis, keywords.size),
            "query_volume": vol_wide.to_numpy().ravel(),
            "seasonal_volume": seasonal_wide.ravel(),
            "partial_window": np.tile(axis - p_min + 1 < cycle_length, keywords.size),
        }
    )

    lookup = dict(zip(zip(seasonal_df["keyword_id"], seasonal_df["period"]), seasonal_df["seasonal_volume"]))
    probs = curve.prob_array(df["rank"].to_numpy())
    per_keyword = df.assign(
        ecp=probs,
        raw=df["query_volume"].to_numpy() * probs,
        index=np.array([lookup[(k, p)] for k, p in zip(df["keyword_id"], df["period"])]) * probs,
    )

    observed_periods = np.sort(df["period"].unique())
    offers = np.sort(df["offer_id"].unique())
    grid = pd.MultiIndex.from_product([offers, observed_periods], names=["offer_id", "period"])
    sums = per_keyword.groupby(["offer_id", "period"])[["raw", "index"]].sum().reindex(grid).fillna(0.0)

    per_offer = sums.reset_index()
    totals = per_offer.groupby("period")["index"].transform("sum")
    if (per_offer.groupby("period")["index"].sum() <= 0).any():
        zero = per_offer.groupby("period")["index"].sum()
        bad = zero[zero <= 0].index.tolist()[:5]
        raise ValidationError(f"periods {bad} have zero total visibility: relative share is undefined")
    per_offer["relative"] = per_offer["index"] / totals * scale

    return VisibilityTable(
        per_offer=per_offer,
        per_keyword=per_keyword.reset_index(drop=True),
        seasonal=seasonal_df,
        scale=scale,
        cycle_length=cycle_length,
    )


# ---------------------------------------------------------------------------
# CSV interfaces
# ---------------------------------------------------------------------------

def load_keyword_ranks(path) -> tuple[list[KeywordRankRecord], dict[int, pd.Timestamp]]:
    """Read ``keyword_ranks.csv`` and return records plus a period->date map.

    Expected header: ``keyword_id,date,offer_id,rank,query_volume`` with
    ISO-8601 dates.  Sub-daily timestamps are collapsed to the last
    observation of the day; periods are day offsets from the earliest date.
    """
    df = pd.read_csv(path, dtype={"keyword_id": str, "offer_id": str})
    required = ["keyword_id", "date", "offer_id", "rank", "query_volume"]
    missing = [c for c in required if c not in df.columns]
    if missing:
        raise ValidationError(f"keyword rank file {path} lacks columns {missing}")
    if df.empty:
        raise ValidationError(f"keyword rank file {path} has no rows")
    stamps = pd.to_datetime(df["date"], format="ISO8601")
    df = df.assign(_stamp=stamps, date=stamps.dt.normalize())
    # last observation of the day wins (stable sort keeps file order for ties)
    df = df.sort_values("_stamp", kind="mergesort").drop_duplicates(
        ["keyword_id", "date", "offer_id"], keep="last"
    )
    origin = df["date"].min()
    periods = (df["date"] - origin).dt.days.astype(int)
    records = [
        KeywordRankRecord(k, int(p), o, int(r), float(v))
        for k, p, o, r, v in zip(df["keyword_id"], periods, df["offer_id"], df["rank"], df["query_volume"])
    ]
    period_dates = {int(p): d for p, d in zip(periods, df["date"])}
    return records, period_dates


def load_ecp_curve(path) -> EcpCurve:
    """Read ``ecp.csv`` (header ``rank,click_prob``; optional ``keyword_class``)."""
    df = pd.read_csv(path)
    if "rank" not in df.columns or "click_prob" not in df.columns:
        raise ValidationError(f"ECP file {path} must have columns rank,click_prob")
    if "keyword_class" in df.columns and df["keyword_class"].notna().any():
        classes = df["keyword_class"].fillna("")
        base = df[classes == ""]
        variants = {
            str(cls): EcpCurve.from_pairs(dict(zip(sub["rank"], sub["click_prob"])))
            for cls, sub in df[classes != ""].groupby(classes[classes != ""])
        }
        if base.empty:
            raise ValidationError(f"ECP file {path} has class variants but no default curve rows")
        return EcpCurve.from_pairs(dict(zip(base["rank"], base["click_prob"])), variants=variants)
    return EcpCurve.from_pairs(dict(zip(df["rank"], df["click_prob"])))


def write_visibility_csv(table: VisibilityTable, period_dates: Mapping[int, pd.Timestamp], path) -> None:
    """Write ``visibility.csv`` with header ``offer_id,date,relative_visibility``."""
    out = table.per_offer[["offer_id", "period", "relative"]].copy()
    out["date"] = [pd.Timestamp(period_dates[p]).date().isoformat() for p in out["period"]]
    out = out.rename(columns={"relative": "relative_visibility"})
    out[["offer_id", "date", "relative_visibility"]].to_csv(path, index=False)
