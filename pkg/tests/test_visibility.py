import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose

from prefaudit.errors import ValidationError
from prefaudit.visibility import (
    EcpCurve,
    KeywordRankRecord,
    aggregate_visibility,
    compute_visibility_table,
    keyword_visibility_index,
    load_ecp_curve,
    load_keyword_ranks,
    raw_keyword_visibility,
    relative_visibility,
    seasonal_volume,
    write_visibility_csv,
)

from oracles import brute_force_visibility

CURVE = EcpCurve.from_pairs({1: 0.35, 2: 0.20, 3: 0.10, 4: 0.05})


def rec(k="k1", t=0, o="A", rank=1, vol=100.0):
    return KeywordRankRecord(k, t, o, rank, vol)


class TestEcpCurve:
    def test_lookup_and_beyond(self):
        assert CURVE.prob(1) == 0.35
        assert CURVE.prob(4) == 0.05
        assert CURVE.prob(5) == 0.0
        assert CURVE.prob(400) == 0.0

    def test_gap_in_domain_rejected(self):
        curve = EcpCurve.from_pairs({1: 0.3, 3: 0.1})
        with pytest.raises(ValidationError):
            curve.prob(2)

    def test_monotonicity_enforced(self):
        with pytest.raises(ValidationError):
            EcpCurve.from_pairs({1: 0.1, 2: 0.2})

    def test_bounds_enforced(self):
        with pytest.raises(ValidationError):
            EcpCurve.from_pairs({1: 1.2})
        with pytest.raises(ValidationError):
            EcpCurve.from_pairs({1: 0.5, 2: -0.1})

    def test_geometric_default_strictly_decreasing(self):
        curve = EcpCurve.geometric()
        probs = np.asarray(curve.probs)
        assert np.all(np.diff(probs) < 0)
        assert probs[0] <= 1.0

    def test_class_variants(self):
        variant = EcpCurve.from_pairs({1: 0.5})
        curve = EcpCurve.from_pairs({1: 0.3}, variants={"head": variant})
        assert curve.for_class("head").prob(1) == 0.5
        assert curve.for_class(None) is curve
        with pytest.raises(ValidationError):
            curve.for_class("tail")


class TestRawVisibility:
    def test_direct_product(self):
        curve = EcpCurve.from_pairs({1: 0.3})
        assert raw_keyword_visibility(rec(vol=100.0, rank=1), curve) == pytest.approx(30.0)

    def test_zero_volume(self):
        assert raw_keyword_visibility(rec(vol=0.0, rank=1), CURVE) == 0.0

    def test_hand_multiplication_pair(self):
        # volume 250 at ranks 1 and 2 of the test curve
        assert raw_keyword_visibility(rec(vol=250.0, rank=1), CURVE) == pytest.approx(87.5)
        assert raw_keyword_visibility(rec(vol=250.0, rank=2), CURVE) == pytest.approx(50.0)

    def test_negative_volume_rejected(self):
        with pytest.raises(ValidationError):
            rec(vol=-1.0)

    def test_bad_rank_rejected(self):
        with pytest.raises(ValidationError):
            rec(rank=0)


class TestSeasonalVolume:
    def test_constant_series(self):
        out = seasonal_volume([50.0] * 365, 365)
        assert_allclose(out, 50.0)

    def test_mean_of_short_series(self):
        out = seasonal_volume([10.0, 20.0, 30.0], 3)
        assert out[-1] == pytest.approx(20.0)

    def test_partial_window_backfill(self):
        out = seasonal_volume([10.0, 20.0, 30.0, 40.0], 3)
        assert_allclose(out, [10.0, 15.0, 20.0, 30.0])

    def test_empty_errors(self):
        with pytest.raises(ValidationError):
            seasonal_volume([], 3)

    def test_default_cycle_is_365(self):
        import inspect

        sig = inspect.signature(seasonal_volume)
        assert sig.parameters["cycle_length"].default == 365

    def test_matches_rolling_mean(self):
        rng = np.random.default_rng(7)
        vols = rng.uniform(0, 100, size=50)
        out = seasonal_volume(vols, 7)
        expected = pd.Series(vols).rolling(7, min_periods=1).mean().to_numpy()
        assert_allclose(out, expected, rtol=1e-12)


class TestIndexAndAggregate:
    def test_index_product(self):
        assert keyword_visibility_index(rec(rank=3), 40.0, CURVE) == pytest.approx(4.0)
        assert keyword_visibility_index(rec(rank=1), 0.0, CURVE) == 0.0

    def test_aggregate_sum(self):
        assert aggregate_visibility([4.0, 6.0]) == pytest.approx(10.0)
        assert aggregate_visibility([]) == 0.0

    def test_aggregate_rejects_negative(self):
        with pytest.raises(ValidationError):
            aggregate_visibility([1.0, -0.5])


class TestRelativeVisibility:
    def test_proportions(self):
        shares = relative_visibility({"A": 3.0, "B": 1.0}, scale=1.0)
        assert shares == {"A": 0.75, "B": 0.25}

    def test_million_scale(self):
        shares = relative_visibility({"A": 3.0, "B": 1.0}, scale=1e6)
        assert shares["A"] == pytest.approx(750_000.0)
        assert shares["B"] == pytest.approx(250_000.0)

    def test_single_offer_gets_full_scale(self):
        assert relative_visibility({"A": 2.5}, scale=1e6)["A"] == pytest.approx(1e6)

    def test_all_zero_errors(self):
        with pytest.raises(ValidationError):
            relative_visibility({"A": 0.0, "B": 0.0})


def random_records(rng, n_keywords, n_offers, n_periods, max_rank=6):
    records = []
    for k in range(n_keywords):
        for t in range(n_periods):
            if rng.uniform() < 0.15:
                continue  # keyword not observed that day
            vol = float(np.round(rng.uniform(0, 500), 3))
            ranked = rng.permutation(n_offers)[: rng.integers(1, min(n_offers, max_rank) + 1)]
            ranks = rng.choice(np.arange(1, max_rank + 1), size=ranked.size, replace=False)
            for o, r in zip(ranked, ranks):
                records.append((f"k{k}", t, f"o{o}", int(r), vol))
    return records


class TestPipelineAgainstBruteForce:
    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_matches_triple_loop_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n_keywords = int(rng.integers(2, 11))
        n_offers = int(rng.integers(2, 11))
        n_periods = int(rng.integers(5, 31))
        raw_records = random_records(rng, n_keywords, n_offers, n_periods)
        records = [KeywordRankRecord(*r) for r in raw_records]
        cycle = int(rng.integers(2, 10))

        table = compute_visibility_table(records, CURVE, cycle_length=cycle, scale=1e6)
        ecp_table = dict(zip(CURVE.ranks, CURVE.probs))
        raw, index, relative, seasonal = brute_force_visibility(raw_records, ecp_table, cycle, 1e6)

        got = table.per_offer.set_index(["offer_id", "period"])
        for key, val in raw.items():
            assert got.loc[key, "raw"] == pytest.approx(val, abs=1e-12)
        for key, val in index.items():
            assert got.loc[key, "index"] == pytest.approx(val, abs=1e-12)
        for key, val in relative.items():
            assert got.loc[key, "relative"] == pytest.approx(val, rel=1e-12, abs=1e-12)
        ssub = table.seasonal.set_index(["keyword_id", "period"])["seasonal_volume"]
        for key, val in seasonal.items():
            assert ssub.loc[key] == pytest.approx(val, abs=1e-12)

    def test_shares_sum_to_scale(self):
        rng = np.random.default_rng(11)
        records = [KeywordRankRecord(*r) for r in random_records(rng, 6, 8, 20)]
        table = compute_visibility_table(records, CURVE, cycle_length=5)
        sums = table.per_offer.groupby("period")["relative"].sum()
        assert_allclose(sums.to_numpy(), table.scale, rtol=1e-6)

    def test_volume_scaling_invariance(self):
        rng = np.random.default_rng(3)
        raw_records = random_records(rng, 4, 5, 10)
        records = [KeywordRankRecord(*r) for r in raw_records]
        # multiply every keyword's volume in period 4 by a common constant
        scaled = [
            KeywordRankRecord(k, t, o, r, v * 7.5 if t == 4 else v)
            for (k, t, o, r, v) in raw_records
        ]
        base = compute_visibility_table(records, CURVE, cycle_length=1)
        bumped = compute_visibility_table(scaled, CURVE, cycle_length=1)
        b = base.per_offer.query("period == 4").set_index("offer_id")["relative"]
        s = bumped.per_offer.query("period == 4").set_index("offer_id")["relative"]
        assert_allclose(b.to_numpy(), s.to_numpy(), rtol=1e-9)

    def test_rank_improvement_monotone(self):
        base_records = [
            ("k1", 0, "A", 3, 100.0),
            ("k1", 0, "B", 1, 100.0),
            ("k2", 0, "A", 2, 50.0),
            ("k2", 0, "B", 4, 50.0),
        ]
        better = [("k1", 0, "A", 2, 100.0)] + base_records[1:]
        t0 = compute_visibility_table([KeywordRankRecord(*r) for r in base_records], CURVE, cycle_length=1)
        t1 = compute_visibility_table([KeywordRankRecord(*r) for r in better], CURVE, cycle_length=1)
        g0 = t0.per_offer.set_index("offer_id")
        g1 = t1.per_offer.set_index("offer_id")
        assert g1.loc["A", "relative"] >= g0.loc["A", "relative"]
        assert g1.loc["B", "index"] <= g0.loc["B", "index"] + 1e-12

    def test_constant_volume_reduces_index_to_raw(self):
        records = [
            KeywordRankRecord("k1", t, "A", 1, 80.0) for t in range(10)
        ] + [KeywordRankRecord("k1", t, "B", 2, 80.0) for t in range(10)]
        table = compute_visibility_table(records, CURVE, cycle_length=4)
        assert_allclose(table.per_offer["raw"], table.per_offer["index"], rtol=1e-14)

    def test_duplicate_record_rejected(self):
        records = [rec(), rec()]
        with pytest.raises(ValidationError):
            compute_visibility_table(records, CURVE)

    def test_conflicting_volume_rejected(self):
        records = [rec(o="A", vol=10.0), rec(o="B", rank=2, vol=20.0)]
        with pytest.raises(ValidationError):
            compute_visibility_table(records, CURVE)

    def test_partial_window_flagged(self):
        records = [KeywordRankRecord("k1", t, "A", 1, 50.0) for t in range(6)]
        table = compute_visibility_table(records, CURVE, cycle_length=3)
        flags = table.seasonal.sort_values("period")["partial_window"].tolist()
        assert flags == [True, True, False, False, False, False]


class TestCsvInterfaces:
    def test_roundtrip(self, tmp_path):
        ranks = tmp_path / "keyword_ranks.csv"
        ranks.write_text(
            "keyword_id,date,offer_id,rank,query_volume\n"
            "k1,2020-05-27,A,1,100\n"
            "k1,2020-05-27,B,2,100\n"
            "k1,2020-05-28,A,2,120\n"
            "k1,2020-05-28,B,1,120\n"
        )
        ecp = tmp_path / "ecp.csv"
        ecp.write_text("rank,click_prob\n1,0.35\n2,0.20\n")
        records, period_dates = load_keyword_ranks(ranks)
        curve = load_ecp_curve(ecp)
        assert len(records) == 4
        table = compute_visibility_table(records, curve, cycle_length=1)
        out = tmp_path / "visibility.csv"
        write_visibility_csv(table, period_dates, out)
        df = pd.read_csv(out)
        assert list(df.columns) == ["offer_id", "date", "relative_visibility"]
        day0 = df[df["date"] == "2020-05-27"].set_index("offer_id")
        assert day0.loc["A", "relative_visibility"] == pytest.approx(1e6 * 0.35 / 0.55)

    def test_subdaily_collapsed_to_last(self, tmp_path):
        ranks = tmp_path / "keyword_ranks.csv"
        ranks.write_text(
            "keyword_id,date,offer_id,rank,query_volume\n"
            "k1,2020-05-27T08:00:00,A,1,100\n"
            "k1,2020-05-27T21:00:00,A,3,100\n"
        )
        records, _ = load_keyword_ranks(ranks)
        assert len(records) == 1
        assert records[0].rank == 3

    def test_missing_column_rejected(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("keyword_id,offer_id,rank\nk1,A,1\n")
        with pytest.raises(ValidationError):
            load_keyword_ranks(bad)
