import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose

from prefaudit.errors import ValidationError
from prefaudit.panel import (
    PANEL_COLUMNS,
    ComparisonGroup,
    SampleFilter,
    apply_comparison_groups,
    build_comparison_groups,
    emit_observations,
    filter_sample,
    ingest_observations,
    lag_covariates,
    pool_samples,
    summary_stats,
)

from oracles import sort_quantile


def make_panel(n_products=3, n_days=5, market="GER", start="2020-05-27", seed=0):
    rng = np.random.default_rng(seed)
    rows = []
    dates = pd.date_range(start, periods=n_days, freq="D")
    for i in range(n_products):
        pid = f"{market}-P{i}"
        sellers = ["AMZN", f"{pid}-S1"]
        for t, date in enumerate(dates):
            seller = sellers[rng.integers(0, 2)]
            rows.append(
                {
                    "product_id": pid,
                    "date": date,
                    "organic_visibility": float(np.round(rng.uniform(0.1, 20.0), 4)),
                    "sponsored_visibility": float(np.round(rng.uniform(0.1, 5.0), 4)),
                    "sales_rank": int(rng.integers(1, 2000)),
                    "price": float(np.round(rng.uniform(5, 100), 2)),
                    "count_reviews": int(rng.integers(1, 5000)),
                    "rating_product": float(np.round(rng.uniform(3.5, 5.0), 1)),
                    "rating_seller": 100.0 if seller == "AMZN" else float(rng.integers(80, 100)),
                    "is_prime": bool(rng.integers(0, 2)),
                    "is_amazon": seller == "AMZN",
                    "buybox_seller_id": seller,
                    "comparison_group_id": "",
                    "market": market,
                }
            )
    df = pd.DataFrame(rows, columns=PANEL_COLUMNS)
    df.attrs["markets"] = [market]
    df.attrs["lagged_by"] = 0
    return df


class TestIngest:
    def test_roundtrip_identity(self, tmp_path):
        panel = make_panel()
        path = tmp_path / "panel.csv"
        emit_observations(panel, path)
        back = ingest_observations(path)
        emit_again = tmp_path / "panel2.csv"
        emit_observations(back, emit_again)
        assert path.read_text() == emit_again.read_text()

    def test_currency_normalization(self, tmp_path):
        panel = make_panel(market="UK")
        panel.loc[0, "price"] = 10.0
        path = tmp_path / "panel.csv"
        emit_observations(panel, path)
        back = ingest_observations(path, currency_rate=1.1248)
        assert back.loc[0, "price"] == pytest.approx(11.248)

    def test_non_foreign_market_unconverted(self, tmp_path):
        panel = make_panel(market="GER")
        panel.loc[0, "price"] = 10.0
        path = tmp_path / "panel.csv"
        emit_observations(panel, path)
        back = ingest_observations(path, currency_rate=1.1248)
        assert back.loc[0, "price"] == pytest.approx(10.0)

    def test_rating_bound_violation(self, tmp_path):
        panel = make_panel()
        panel.loc[2, "rating_product"] = 5.5
        path = tmp_path / "panel.csv"
        emit_observations(panel, path)
        with pytest.raises(ValidationError) as err:
            ingest_observations(path)
        assert "rating_product" in str(err.value)

    def test_duplicate_rows_rejected(self, tmp_path):
        panel = make_panel()
        dup = pd.concat([panel, panel.iloc[[0]]], ignore_index=True)
        path = tmp_path / "panel.csv"
        emit_observations(dup, path)
        with pytest.raises(ValidationError):
            ingest_observations(path)

    def test_gap_flagged(self, tmp_path):
        panel = make_panel(n_products=1, n_days=6)
        panel = panel.drop(index=[2]).reset_index(drop=True)
        path = tmp_path / "panel.csv"
        emit_observations(panel, path)
        back = ingest_observations(path)
        assert back.attrs["gap_products"] == ["GER-P0"]


class TestLagCovariates:
    def test_shift_semantics(self):
        panel = make_panel(n_products=1, n_days=3)
        lagged = lag_covariates(panel, 1)
        assert len(lagged) == 2
        # outcome stays current, covariates come from the previous day
        assert_allclose(lagged["organic_visibility"], panel["organic_visibility"].iloc[1:])
        assert_allclose(lagged["price"], panel["price"].iloc[:-1])

    def test_lag_zero_identity(self):
        panel = make_panel()
        lagged = lag_covariates(panel, 0)
        pd.testing.assert_frame_equal(lagged, panel)

    def test_seller_flip_attribution(self):
        panel = make_panel(n_products=1, n_days=10, seed=3)
        panel["is_amazon"] = [False] * 4 + [True] * 6
        panel["buybox_seller_id"] = np.where(panel["is_amazon"], "AMZN", "GER-P0-S1")
        lagged = lag_covariates(panel, 1)
        by_date = lagged.set_index("date")
        # day-6 visibility is attributed to the day-5 buy-box holder
        day6 = panel["date"].iloc[5]
        assert bool(by_date.loc[day6, "is_amazon"]) == bool(panel["is_amazon"].iloc[4])
        for t in range(1, 10):
            assert bool(by_date.loc[panel["date"].iloc[t], "is_amazon"]) == bool(panel["is_amazon"].iloc[t - 1])

    def test_composition_equals_single_lag(self):
        panel = make_panel(n_products=2, n_days=8, seed=5)
        twice = lag_covariates(lag_covariates(panel, 1), 2)
        once = lag_covariates(panel, 3)
        pd.testing.assert_frame_equal(
            twice.reset_index(drop=True), once.reset_index(drop=True)
        )
        assert twice.attrs["lagged_by"] == 3

    def test_lag_exceeding_panel_warns_empty(self, caplog):
        panel = make_panel(n_products=1, n_days=3)
        with caplog.at_level("WARNING"):
            lagged = lag_covariates(panel, 10)
        assert lagged.empty

    def test_keep_current_override(self):
        panel = make_panel(n_products=1, n_days=4, seed=9)
        lagged = lag_covariates(panel, 1, keep_current=("sales_rank",))
        assert_allclose(lagged["sales_rank"], panel["sales_rank"].iloc[1:])
        assert_allclose(lagged["organic_visibility"], panel["organic_visibility"].iloc[:-1])


class TestFilterSample:
    def test_rank_range(self):
        panel = pool_samples(make_panel(market="A"), make_panel(market="B", seed=4))
        panel.loc[panel["product_id"].str.startswith("A"), "sales_rank"] = 500
        panel.loc[panel["product_id"].str.startswith("B"), "sales_rank"] = 1500
        kept = filter_sample(panel, SampleFilter(sales_rank_range=(1, 1000)))
        assert set(kept["product_id"].str[0]) == {"A"}

    def test_buybox_variation_required(self):
        panel = make_panel(n_products=2, n_days=6, seed=1)
        single = panel["product_id"] == "GER-P0"
        panel.loc[single, "buybox_seller_id"] = "AMZN"
        panel.loc[single, "is_amazon"] = True
        kept = filter_sample(panel, SampleFilter(require_buybox_variation=True))
        assert "GER-P0" not in set(kept["product_id"])
        assert "GER-P1" in set(kept["product_id"])

    def test_availability_threshold(self):
        full = make_panel(n_products=1, n_days=10)
        sparse = make_panel(n_products=1, n_days=10, seed=2)
        sparse = sparse.iloc[:4].copy()  # present 40% of the window
        sparse["product_id"] = "GER-P9"
        sparse["buybox_seller_id"] = sparse["buybox_seller_id"].str.replace("P0", "P9")
        panel = pd.concat([full, sparse], ignore_index=True)
        kept = filter_sample(panel, SampleFilter(availability_min_share=0.5))
        assert set(kept["product_id"]) == {"GER-P0"}

    def test_first_listed_before(self):
        early = make_panel(n_products=1, n_days=5, start="2019-06-01")
        late = make_panel(n_products=1, n_days=5, start="2020-06-01", seed=8)
        late["product_id"] = "GER-P5"
        late["buybox_seller_id"] = late["buybox_seller_id"].str.replace("P0", "P5")
        panel = pd.concat([early, late], ignore_index=True)
        kept = filter_sample(
            panel,
            SampleFilter(first_listed_before=pd.Timestamp("2020-01-01"), availability_min_share=0.0),
        )
        assert set(kept["product_id"]) == {"GER-P0"}

    def test_idempotent(self):
        panel = pool_samples(make_panel(market="A", seed=3), make_panel(market="B", seed=4))
        panel.loc[panel["product_id"].str.startswith("B"), "sales_rank"] = 99999
        flt = SampleFilter(
            sales_rank_range=(1, 5000),
            availability_min_share=0.5,
            window=(panel["date"].min(), panel["date"].max()),
        )
        once = filter_sample(panel, flt)
        twice = filter_sample(once, flt)
        pd.testing.assert_frame_equal(once, twice)


class TestComparisonGroups:
    def test_deterministic_sampling(self):
        platform = {"AB1": "gloves"}
        candidates = {f"T{i}": "gloves" for i in range(8)}
        g1 = build_comparison_groups(platform, candidates, seed=42)
        g2 = build_comparison_groups(platform, dict(reversed(list(candidates.items()))), seed=42)
        assert g1 == g2
        assert len(g1[0].substitute_product_ids) == 5

    def test_small_pool_kept_whole(self):
        groups = build_comparison_groups({"AB1": "c"}, {"T1": "c", "T2": "c", "T3": "c"}, seed=1)
        assert groups[0].substitute_product_ids == ("T1", "T2", "T3")

    def test_zero_candidates_omitted(self, caplog):
        with caplog.at_level("WARNING"):
            groups = build_comparison_groups({"AB1": "c"}, {"T1": "other"}, seed=1)
        assert groups == []

    def test_no_product_in_two_groups(self):
        platform = {"AB1": "c", "AB2": "c"}
        candidates = {f"T{i}": "c" for i in range(6)}
        groups = build_comparison_groups(platform, candidates, seed=7)
        all_subs = [s for g in groups for s in g.substitute_product_ids]
        assert len(all_subs) == len(set(all_subs))

    def test_seed_required(self):
        with pytest.raises(ValidationError):
            build_comparison_groups({"A": "c"}, {"T": "c"})

    def test_apply_groups_fills_column(self):
        panel = make_panel(n_products=3)
        groups = [ComparisonGroup("AB", "GER-P0", ("GER-P1",))]
        out = apply_comparison_groups(panel, groups)
        assert set(out["product_id"]) == {"GER-P0", "GER-P1"}
        assert set(out["comparison_group_id"]) == {"AB"}


class TestPoolSamples:
    def test_row_counts_add(self):
        a = make_panel(market="GER", n_products=4, n_days=7)
        b = make_panel(market="FR", n_products=3, n_days=7, seed=5)
        c = make_panel(market="UK", n_products=2, n_days=7, seed=6)
        pooled = pool_samples(a, b, c)
        assert len(pooled) == len(a) + len(b) + len(c)
        assert pooled.attrs["markets"] == ["FR", "GER", "UK"]

    def test_identity_on_single(self):
        a = make_panel()
        pooled = pool_samples(a)
        pd.testing.assert_frame_equal(pooled, a)

    def test_collision_rejected(self):
        a = make_panel(market="GER")
        b = make_panel(market="GER", seed=9)
        with pytest.raises(ValidationError):
            pool_samples(a, b)


class TestSummaryStats:
    def test_constant_column(self):
        panel = make_panel()
        panel["price"] = 10.0
        table = summary_stats(panel)
        row = table.query("variable == 'price' and group == 'all'").iloc[0]
        assert row["sd"] == 0.0
        assert row["min"] == row["q1"] == row["median"] == row["q3"] == row["max"] == 10.0

    def test_simple_quartet(self):
        panel = make_panel(n_products=1, n_days=4)
        panel["price"] = [1.0, 2.0, 3.0, 4.0]
        table = summary_stats(panel)
        row = table.query("variable == 'price' and group == 'all'").iloc[0]
        assert row["median"] == pytest.approx(2.5)
        assert row["mean"] == pytest.approx(2.5)

    def test_against_sort_oracle(self):
        panel = make_panel(n_products=5, n_days=11, seed=13)
        table = summary_stats(panel).set_index(["variable", "group"])
        for group, sub in [("True", panel[panel["is_amazon"]]), ("False", panel[~panel["is_amazon"]])]:
            values = sub["organic_visibility"].tolist()
            row = table.loc[("organic_visibility", group)]
            assert row["q1"] == pytest.approx(sort_quantile(values, 0.25), abs=1e-12)
            assert row["median"] == pytest.approx(sort_quantile(values, 0.5), abs=1e-12)
            assert row["q3"] == pytest.approx(sort_quantile(values, 0.75), abs=1e-12)
            assert row["sd"] == pytest.approx(np.std(values, ddof=1), abs=1e-12)

    def test_empty_panel_rejected(self):
        with pytest.raises(ValidationError):
            summary_stats(make_panel().iloc[0:0])
