"""Synthetic marketplace panels with known ground truth.

Visibility on day t is drawn Poisson around
``exp(delta * is_amazon + beta' x + alpha_i + gamma_t)`` evaluated at the
previous day's attributes, so applying the standard one-day covariate lag
aligns the regression exactly with the data-generating process.  Covariates
get realistic persistence: log sales rank is an AR(1) around a product mean,
price follows a lognormal random walk, review counts accumulate Poisson
arrivals, and the buy-box seller switches as a two-state Markov chain with
geometric holding times (mean 10 days by default).

Study "A" panels flip the buy box between the platform and a third-party
seller within each product.  Study "B" panels hold the seller fixed and
instead group one always-platform private-label product with a few
third-party substitutes sharing a comparison-group effect.

Everything is drawn from one seeded generator in a fixed order, so panels
are bit-reproducible from the seed.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import PrefauditError, ValidationError
from .feglm import ModelSpec, fit_poisson_two_way_fe
from .panel import PANEL_COLUMNS, lag_covariates
from .parallel import max_workers


@dataclass(frozen=True)
class SimulationConfig:
    """Data-generating-process parameters, including the true bias.

    ``delta_true`` is the ground-truth self-preferencing coefficient on the
    log scale.  ``seed`` is mandatory.  ``study`` selects the within-product
    buy-box design ("A") or the between-product comparison-group design
    ("B", where ``n_products`` platform products each get
    ``n_substitutes`` third-party substitutes).
    """

    seed: int | Sequence[int] | None = None
    n_products: int = 100
    n_days: int = 60
    delta_true: float = 0.0
    study: str = "A"
    n_substitutes: int = 3
    market: str = "SIM"
    start_date: str = "2020-05-27"

    base_log_visibility: float = 2.0
    beta_sales_rank: float = -0.12
    beta_price: float = -0.37
    beta_count_reviews: float = 0.03
    beta_rating_product: float = 0.10
    beta_rating_seller: float = 0.0002
    beta_is_prime: float = 0.03

    unit_effect_sd: float = 0.3
    date_effect_sd: float = 0.1
    buybox_mean_holding_days: float = 10.0

    log_sales_rank_mean: float = 5.5
    log_sales_rank_sd: float = 0.8
    sales_rank_ar1: float = 0.9
    sales_rank_innovation_sd: float = 0.15
    log_price_mean: float = 3.0
    log_price_sd: float = 0.5
    price_walk_sd: float = 0.02
    log_review_start_mean: float = 6.0
    review_daily_rate: float = 3.0
    rating_walk_sd: float = 0.01
    sponsored_base_log: float = 1.5
    sponsored_amazon_boost: float = 1.0

    omitted_multiplier: float = 15.0
    omitted_noise_sd: float = 1.0

    def validate(self) -> None:
        if self.seed is None:
            raise ValidationError("SimulationConfig.seed is mandatory")
        if self.n_products < 2 or self.n_days < 2:
            raise ValidationError("need at least 2 products and 2 days")
        if self.study not in ("A", "B"):
            raise ValidationError(f"study must be 'A' or 'B', got {self.study!r}")
        if self.study == "B" and not 1 <= self.n_substitutes <= 5:
            raise ValidationError("study B needs 1-5 substitutes per group")
        if self.buybox_mean_holding_days < 1:
            raise ValidationError("buy-box holding time must be at least one day")

    def betas(self) -> dict[str, float]:
        return {
            "ln_sales_rank": self.beta_sales_rank,
            "ln_price": self.beta_price,
            "ln_count_reviews": self.beta_count_reviews,
            "rating_product": self.beta_rating_product,
            "rating_seller": self.beta_rating_seller,
            "is_prime": self.beta_is_prime,
        }


@dataclass
class GroundTruth:
    """Exactly what the generator used: effects, slopes and trajectories."""

    delta_true: float
    betas: dict[str, float]
    unit_effects: pd.Series
    date_effects: pd.Series
    mean_matrix: pd.DataFrame  # expected visibility per (product, date)
    covariates: pd.DataFrame  # unlagged attribute panel


def _lag_matrix(m: np.ndarray) -> np.ndarray:
    """Shift columns right by one day; day 0 reuses its own value."""
    out = np.empty_like(m)
    out[:, 1:] = m[:, :-1]
    out[:, 0] = m[:, 0]
    return out


def simulate_panel(config: SimulationConfig) -> tuple[pd.DataFrame, GroundTruth]:
    """Generate one marketplace panel plus its ground truth."""
    config.validate()
    rng = np.random.default_rng(config.seed)

    if config.study == "A":
        n = config.n_products
        product_ids = np.array([f"{config.market}-P{i:05d}" for i in range(n)])
        group_of = np.array([""] * n, dtype=object)
    else:
        group_size = 1 + config.n_substitutes
        n = config.n_products * group_size
        product_ids = np.empty(n, dtype=object)
        group_of = np.empty(n, dtype=object)
        platform_flag = np.zeros(n, dtype=bool)
        for g in range(config.n_products):
            gid = f"{config.market}-G{g:04d}"
            for j in range(group_size):
                idx = g * group_size + j
                product_ids[idx] = f"{gid}-{'AB' if j == 0 else f'T{j}'}"
                group_of[idx] = gid
                platform_flag[idx] = j == 0

    days = config.n_days
    dates = pd.date_range(config.start_date, periods=days, freq="D")

    # buy-box path / platform membership
    if config.study == "A":
        switch_p = 1.0 / config.buybox_mean_holding_days
        initial = rng.uniform(size=n) < 0.5
        flips = rng.uniform(size=(n, days)) < switch_p
        flips[:, 0] = False
        parity = np.cumsum(flips, axis=1) % 2 == 1
        is_amazon = initial[:, None] ^ parity
        third_rating = np.round(np.clip(rng.normal(93.0, 3.0, n), 60.0, 100.0), 1)
        third_prime = rng.uniform(size=n) < 0.6
    else:
        is_amazon = np.repeat(platform_flag[:, None], days, axis=1)
        third_rating = np.round(np.clip(rng.normal(94.0, 3.0, n), 60.0, 100.0), 1)
        third_prime = rng.uniform(size=n) < 0.7

    # attribute trajectories
    lsr_mean = rng.normal(config.log_sales_rank_mean, config.log_sales_rank_sd, n)
    lsr = np.empty((n, days))
    stationary_sd = config.sales_rank_innovation_sd / np.sqrt(1.0 - config.sales_rank_ar1**2)
    lsr[:, 0] = lsr_mean + rng.normal(0.0, stationary_sd, n)
    shocks = rng.normal(0.0, config.sales_rank_innovation_sd, (n, days))
    for t in range(1, days):
        lsr[:, t] = lsr_mean + config.sales_rank_ar1 * (lsr[:, t - 1] - lsr_mean) + shocks[:, t]
    sales_rank = np.maximum(1, np.round(np.exp(lsr))).astype(np.int64)

    lp = np.empty((n, days))
    lp[:, 0] = rng.normal(config.log_price_mean, config.log_price_sd, n)
    lp[:, 1:] = rng.normal(0.0, config.price_walk_sd, (n, days - 1))
    lp = np.cumsum(lp, axis=1)
    price = np.maximum(0.5, np.round(np.exp(lp), 2))

    review_start = np.maximum(1, np.round(np.exp(rng.normal(config.log_review_start_mean, 1.0, n))))
    arrivals = rng.poisson(config.review_daily_rate, (n, days))
    count_reviews = (review_start[:, None] + np.cumsum(arrivals, axis=1)).astype(np.int64)

    rating_base = np.clip(rng.normal(4.5, 0.2, n), 3.0, 5.0)
    rating_steps = rng.normal(0.0, config.rating_walk_sd, (n, days))
    rating_product = np.clip(rating_base[:, None] + np.cumsum(rating_steps, axis=1), 1.0, 5.0)

    rating_seller = np.where(is_amazon, 100.0, third_rating[:, None])
    is_prime = np.where(is_amazon, True, third_prime[:, None])

    # effects and the linear predictor (previous-day attributes drive day t)
    if config.study == "A":
        unit_labels = product_ids
        unit_effects = rng.normal(0.0, config.unit_effect_sd, n)
        unit_effect_rows = unit_effects
    else:
        group_ids = [f"{config.market}-G{g:04d}" for g in range(config.n_products)]
        group_effects = rng.normal(0.0, config.unit_effect_sd, config.n_products)
        unit_labels = np.array(group_ids)
        unit_effects = group_effects
        unit_effect_rows = np.repeat(group_effects, 1 + config.n_substitutes)
    date_effects = rng.normal(0.0, config.date_effect_sd, days)

    eta = (
        config.base_log_visibility
        + config.delta_true * _lag_matrix(is_amazon.astype(float))
        + config.beta_sales_rank * _lag_matrix(np.log(sales_rank))
        + config.beta_price * _lag_matrix(np.log(price))
        + config.beta_count_reviews * _lag_matrix(np.log(count_reviews))
        + config.beta_rating_product * _lag_matrix(rating_product)
        + config.beta_rating_seller * _lag_matrix(rating_seller)
        + config.beta_is_prime * _lag_matrix(is_prime.astype(float))
        + unit_effect_rows[:, None]
        + date_effects[None, :]
    )
    mu = np.exp(eta)
    organic = rng.poisson(mu).astype(float)

    sponsored_mu = np.exp(
        config.sponsored_base_log
        + config.sponsored_amazon_boost * _lag_matrix(is_amazon.astype(float))
        + 0.2 * rng.normal(0.0, 1.0, n)[:, None]
    )
    sponsored = rng.poisson(sponsored_mu).astype(float)

    seller_ids = np.where(is_amazon, "AMZN", np.char.add(product_ids.astype(str), "-S1")[:, None])

    frame = pd.DataFrame(
        {
            "product_id": np.repeat(product_ids, days),
            "date": np.tile(dates, n),
            "organic_visibility": organic.ravel(),
            "sponsored_visibility": sponsored.ravel(),
            "sales_rank": sales_rank.ravel(),
            "price": price.ravel(),
            "count_reviews": count_reviews.ravel(),
            "rating_product": rating_product.ravel(),
            "rating_seller": rating_seller.ravel(),
            "is_prime": is_prime.ravel(),
            "is_amazon": is_amazon.ravel(),
            "buybox_seller_id": seller_ids.ravel(),
            "comparison_group_id": np.repeat(group_of, days),
            "market": config.market,
        }
    )[PANEL_COLUMNS]
    frame = frame.sort_values(["product_id", "date"], kind="mergesort", ignore_index=True)
    frame.attrs["markets"] = [config.market]
    frame.attrs["lagged_by"] = 0

    truth = GroundTruth(
        delta_true=config.delta_true,
        betas=config.betas(),
        unit_effects=pd.Series(unit_effects, index=pd.Index(unit_labels, name="unit")),
        date_effects=pd.Series(date_effects, index=pd.Index(dates, name="date")),
        mean_matrix=pd.DataFrame(mu, index=pd.Index(product_ids, name="product_id"), columns=dates),
        covariates=frame.drop(columns=["organic_visibility", "sponsored_visibility"]),
    )
    return frame, truth


def inject_omitted_variable(
    panel: pd.DataFrame,
    kind: str,
    multiplier: float = 15.0,
    seed: int | Sequence[int] | None = None,
    noise_sd: float = 1.0,
) -> pd.DataFrame:
    """Add a simulated omitted column correlated with the platform flag.

    ``kind="advantage"`` builds ``multiplier * is_amazon + visibility +
    noise``; ``kind="disadvantage"`` uses ``-multiplier``.  Original columns
    are untouched; the new column is named ``amazon_advantage`` or
    ``amazon_disadvantage``.
    """
    if kind not in ("advantage", "disadvantage"):
        raise ValidationError(f"kind must be 'advantage' or 'disadvantage', got {kind!r}")
    if seed is None:
        raise ValidationError("inject_omitted_variable requires an explicit seed")
    for col in ("is_amazon", "organic_visibility"):
        if col not in panel.columns:
            raise ValidationError(f"panel lacks column {col!r}")
    rng = np.random.default_rng(seed)
    sign = 1.0 if kind == "advantage" else -1.0
    noise = rng.normal(0.0, noise_sd, len(panel))
    out = panel.copy()
    out[f"amazon_{kind}"] = (
        sign * multiplier * panel["is_amazon"].to_numpy(dtype=float)
        + panel["organic_visibility"].to_numpy(dtype=float)
        + noise
    )
    out.attrs = dict(panel.attrs)
    return out


def _mc_replication(args):
    label, config, rep, lag_days, spec = args
    rep_config = replace(config, seed=[_seed_root(config.seed), _stable_int(label), rep])
    try:
        panel, _ = simulate_panel(rep_config)
        lagged = lag_covariates(panel, lag_days)
        fit = fit_poisson_two_way_fe(lagged, spec, keep_internals=False, recover_fixed_effects=False)
        delta, se = fit[spec.protected]
        return (label, rep, delta, se, None)
    except PrefauditError as exc:  # recorded, not fatal
        return (label, rep, np.nan, np.nan, str(exc))


def _seed_root(seed) -> int:
    if isinstance(seed, (list, tuple)):
        return int(seed[0])
    return int(seed)


def _stable_int(text: str) -> int:
    import hashlib

    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=4).digest(), "big")


def monte_carlo_study(
    configs: Mapping[str, SimulationConfig],
    replications: int,
    *,
    lag_days: int = 1,
    spec: ModelSpec | None = None,
    workers: int | None = None,
    z: float = 1.96,
) -> pd.DataFrame:
    """Bias, SE calibration and rejection rates over a config grid.

    Each replication re-seeds the generator from (cell seed, replication
    index), so results do not depend on worker count or scheduling.  Failed
    replications are counted, not fatal.  Cells with fewer than 30
    replications carry a ``wide_variance`` flag.
    """
    if replications < 2:
        raise ValidationError("need at least 2 replications")
    spec = spec or ModelSpec()
    tasks = [
        (label, config, rep, lag_days, spec)
        for label, config in configs.items()
        for rep in range(replications)
    ]
    n_workers = workers if workers is not None else max_workers(len(tasks))
    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_mc_replication, tasks, chunksize=8))
    else:
        results = [_mc_replication(t) for t in tasks]

    rows = []
    for label, config in configs.items():
        cell = sorted(r for r in results if r[0] == label)
        deltas = np.array([r[2] for r in cell])
        ses = np.array([r[3] for r in cell])
        ok = ~np.isnan(deltas)
        reject = np.abs(deltas[ok] / ses[ok]) > z
        rows.append(
            {
                "label": label,
                "delta_true": config.delta_true,
                "replications": replications,
                "n_failed": int((~ok).sum()),
                "mean_delta": float(deltas[ok].mean()) if ok.any() else np.nan,
                "sd_delta": float(deltas[ok].std(ddof=1)) if ok.sum() > 1 else np.nan,
                "mean_se": float(ses[ok].mean()) if ok.any() else np.nan,
                "rejection_rate": float(reject.mean()) if ok.any() else np.nan,
                "wide_variance": replications < 30,
            }
        )
    return pd.DataFrame(rows)
