"""Poisson (log-link) panel regressions with absorbed fixed effects.

The estimator maximizes the Poisson pseudo-likelihood, so non-negative
non-integer outcomes (like visibility shares) are fine.  Fixed effects over
up to two dimensions (unit and date) are absorbed by weighted alternating
projections inside each IRLS step rather than by explicit dummies, which
scales to millions of rows and thousands of levels.  Standard errors come
from the two-way clustered sandwich (unit + date - intersection), each term
carrying a G/(G-1) small-sample factor; a non-PSD result is repaired by
zeroing negative eigenvalues.

Every reduction over observations uses ``np.bincount`` or ``np.sum`` (both
single-threaded with a fixed order), so identical inputs give bitwise
identical results regardless of BLAS thread settings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd
from scipy.special import gammaln

from .errors import CollinearityError, ConvergenceError, ValidationError

_TRANSFORMS = ("log", "identity")
_ETA_CLIP = 250.0

#: Covariates of the visibility regression, in reporting order.
COO_COVARIATES = (
    ("sales_rank", "log"),
    ("price", "log"),
    ("count_reviews", "log"),
    ("rating_product", "identity"),
    ("rating_seller", "identity"),
    ("is_prime", "identity"),
)


@dataclass(frozen=True)
class ModelSpec:
    """What to regress on what, and which dimensions to absorb and cluster.

    ``unit`` names the column providing the unit fixed effect (product id
    for within-product designs, comparison group id for between-product
    designs).  ``fixed_effects`` is any subset of ``("unit", "date")``;
    with no fixed effects an intercept is added.  ``cluster`` defaults to
    the fixed-effect dimensions.
    """

    outcome: str = "organic_visibility"
    protected: str | None = "is_amazon"
    covariates: tuple[tuple[str, str], ...] = COO_COVARIATES
    unit: str = "product_id"
    fixed_effects: tuple[str, ...] = ("unit", "date")
    cluster: tuple[str, ...] | None = None

    def __post_init__(self):
        for name, transform in self.covariates:
            if transform not in _TRANSFORMS:
                raise ValidationError(f"unknown transform {transform!r} for covariate {name!r}")
        for dim in self.fixed_effects:
            if dim not in ("unit", "date"):
                raise ValidationError(f"unknown fixed-effect dimension {dim!r}")
        if self.cluster is not None:
            for dim in self.cluster:
                if dim not in ("unit", "date"):
                    raise ValidationError(f"unknown cluster dimension {dim!r}")

    def cluster_dims(self) -> tuple[str, ...]:
        return self.fixed_effects if self.cluster is None else self.cluster

    def param_names(self) -> list[str]:
        names = []
        if self.protected is not None:
            names.append(self.protected)
        for name, transform in self.covariates:
            names.append(f"ln_{name}" if transform == "log" else name)
        if not self.fixed_effects:
            names.append("const")
        return names

    def with_covariates(self, covariates) -> "ModelSpec":
        return ModelSpec(
            outcome=self.outcome,
            protected=self.protected,
            covariates=tuple(covariates),
            unit=self.unit,
            fixed_effects=self.fixed_effects,
            cluster=self.cluster,
        )


@dataclass
class FitInternals:
    """Converged per-observation quantities needed by covariance estimators."""

    x_demeaned: np.ndarray  # (n, k), weighted-projection residuals of the design
    residuals: np.ndarray  # y - mu
    hessian: np.ndarray  # X~' diag(mu) X~
    cluster_codes: dict[str, tuple[np.ndarray, int]]
    param_names: list[str]


@dataclass
class FitResult:
    """Coefficients, clustered covariance, fixed effects and diagnostics."""

    param_names: list[str]
    params: np.ndarray
    vcov: np.ndarray
    vcov_repaired: bool
    unit_effects: pd.Series | None
    date_effects: pd.Series | None
    n_obs: int
    n_units: int
    n_dates: int
    deviance: float
    null_deviance: float
    loglik: float
    loglik_null: float
    iterations: int
    converged: bool
    dropped: dict[str, int]
    score_norms: dict[str, float]
    spec: ModelSpec
    internals: FitInternals | None = None

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.diag(self.vcov))

    @property
    def coef(self) -> dict[str, float]:
        return dict(zip(self.param_names, self.params.tolist()))

    def __getitem__(self, name: str) -> tuple[float, float]:
        """(estimate, clustered SE) for one parameter."""
        idx = self.param_names.index(name)
        return float(self.params[idx]), float(self.se[idx])

    @property
    def pseudo_r2(self) -> float:
        return pseudo_r2(self)

    def to_dict(self) -> dict:
        return {
            "params": self.coef,
            "se": dict(zip(self.param_names, self.se.tolist())),
            "vcov": {"names": self.param_names, "matrix": self.vcov.tolist(), "repaired": self.vcov_repaired},
            "n_obs": self.n_obs,
            "n_units": self.n_units,
            "n_dates": self.n_dates,
            "deviance": self.deviance,
            "null_deviance": self.null_deviance,
            "loglik": self.loglik,
            "loglik_null": self.loglik_null,
            "pseudo_r2": self.pseudo_r2,
            "iterations": self.iterations,
            "converged": self.converged,
            "dropped": self.dropped,
            "score_norms": self.score_norms,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


class _Absorber:
    """Weighted alternating-projection demeaner over 0-2 code dimensions."""

    def __init__(self, codes_list: list[np.ndarray], sizes: list[int]):
        self.codes = codes_list
        self.sizes = sizes
        self.weight_sums: list[np.ndarray] = []

    def set_weights(self, w: np.ndarray) -> None:
        self.w = w
        self.weight_sums = [np.bincount(c, weights=w, minlength=g) for c, g in zip(self.codes, self.sizes)]

    def demean(self, cols: list[np.ndarray], scales: np.ndarray, tol: float, max_passes: int = 100_000) -> int:
        """Subtract weighted group means in place until updates fall below tol."""
        if not self.codes:
            return 0
        buf = np.empty_like(cols[0])
        for passes in range(1, max_passes + 1):
            delta = 0.0
            for codes, size, wsum in zip(self.codes, self.sizes, self.weight_sums):
                for j, col in enumerate(cols):
                    np.multiply(self.w, col, out=buf)
                    means = np.bincount(codes, weights=buf, minlength=size)
                    means /= wsum
                    col -= means[codes]
                    step = float(np.abs(means).max()) / scales[j]
                    if step > delta:
                        delta = step
            if delta < tol:
                return passes
        raise ConvergenceError(
            f"fixed-effect projections did not converge within {max_passes} passes", iterations=max_passes
        )


def _pairwise_gram(weighted: list[np.ndarray], cols: list[np.ndarray]) -> np.ndarray:
    """Gram matrix with fixed-order pairwise sums (no BLAS over observations)."""
    k = len(cols)
    g = np.empty((k, k))
    buf = np.empty_like(cols[0]) if cols else None
    for i in range(k):
        for j in range(i, k):
            np.multiply(weighted[i], cols[j], out=buf)
            g[i, j] = g[j, i] = np.sum(buf)
    return g


def _column_against(weighted: list[np.ndarray], target: np.ndarray) -> np.ndarray:
    out = np.empty(len(weighted))
    buf = np.empty_like(target)
    for i, wcol in enumerate(weighted):
        np.multiply(wcol, target, out=buf)
        out[i] = np.sum(buf)
    return out


def _find_collinear(
    gram: np.ndarray,
    names: Sequence[str],
    col_scales: np.ndarray,
    total_weight: float,
    rel_tol: float = 1e-9,
) -> None:
    """Pivoted Cholesky on the correlation-scaled Gram; raise naming the culprit.

    A column whose weighted sum of squares is negligible relative to its
    pre-projection scale was absorbed entirely by the fixed effects and is
    flagged before the correlation scaling can hide it.
    """
    k = gram.shape[0]
    diag = np.diag(gram).copy()
    scale = np.sqrt(np.where(diag > 0, diag, 1.0))
    for j, d in enumerate(diag):
        if not np.isfinite(d) or d <= rel_tol * total_weight * col_scales[j] ** 2:
            raise CollinearityError(names[j])
    a = gram / np.outer(scale, scale)
    remaining = list(range(k))
    l = np.zeros((k, k))
    for step in range(k):
        pivots = [(a[j, j] - np.sum(l[j, :step] ** 2), j) for j in remaining]
        best_val, best_j = max(pivots)
        if best_val < rel_tol:
            raise CollinearityError(names[best_j])
        l[best_j, step] = np.sqrt(best_val)
        remaining.remove(best_j)
        for j in remaining:
            l[j, step] = (a[j, best_j] - np.sum(l[j, :step] * l[best_j, :step])) / l[best_j, step]


def _poisson_deviance(y: np.ndarray, mu: np.ndarray) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        term = np.where(y > 0, y * np.log(y / mu), 0.0)
    return float(2.0 * (np.sum(term) - np.sum(y - mu)))


def _poisson_loglik(y: np.ndarray, eta: np.ndarray, mu: np.ndarray) -> float:
    return float(np.sum(y * eta) - np.sum(mu) - np.sum(gammaln(y + 1.0)))


def _build_design(panel: pd.DataFrame, spec: ModelSpec):
    needed = [spec.outcome]
    if spec.protected is not None:
        needed.append(spec.protected)
    needed += [name for name, _ in spec.covariates]
    dims = set(spec.fixed_effects) | set(spec.cluster_dims())
    if "unit" in dims:
        needed.append(spec.unit)
    if "date" in dims:
        needed.append("date")
    missing = [c for c in needed if c not in panel.columns]
    if missing:
        raise ValidationError(f"panel lacks columns {missing} required by the model spec")
    frame = panel[list(dict.fromkeys(needed))]
    na_counts = frame.isna().sum()
    bad = na_counts[na_counts > 0]
    if len(bad):
        raise ValidationError(f"missing values in model columns: {dict(bad)}")

    y = frame[spec.outcome].to_numpy(dtype=float)
    if np.any(y < 0) or np.any(~np.isfinite(y)):
        raise ValidationError(f"outcome {spec.outcome!r} must be finite and non-negative")

    cols: list[np.ndarray] = []
    if spec.protected is not None:
        p = frame[spec.protected].to_numpy(dtype=float)
        if not np.isin(p, (0.0, 1.0)).all():
            raise ValidationError(f"protected attribute {spec.protected!r} must be binary")
        cols.append(p)
    for name, transform in spec.covariates:
        x = frame[name].to_numpy(dtype=float)
        if transform == "log":
            if np.any(x <= 0):
                raise ValidationError(f"log covariate {name!r} must be strictly positive on the estimation sample")
            x = np.log(x)
        cols.append(x)
    if not spec.fixed_effects:
        cols.append(np.ones_like(y))
    x_mat = np.column_stack(cols) if cols else np.empty((y.size, 0))

    unit_labels = frame[spec.unit].to_numpy() if "unit" in dims else None
    date_labels = frame["date"].to_numpy() if "date" in dims else None
    return y, x_mat, unit_labels, date_labels


def _drop_zero_groups(y, mask, labels_by_dim: dict[str, np.ndarray], fe_dims) -> dict[str, int]:
    dropped = {"units": 0, "dates": 0, "rows": 0}
    key = {"unit": "units", "date": "dates"}
    changed = True
    while changed:
        changed = False
        for dim in fe_dims:
            labels = labels_by_dim[dim]
            codes, uniques = pd.factorize(labels[mask], sort=True)
            sums = np.bincount(codes, weights=y[mask], minlength=len(uniques))
            zero = sums <= 0.0
            if zero.any():
                dead = set(uniques[zero].tolist())
                hit = mask & np.isin(labels, list(dead))
                dropped[key[dim]] += int(zero.sum())
                dropped["rows"] += int(hit.sum())
                mask &= ~hit
                changed = True
    return dropped


def fit_poisson_two_way_fe(
    panel: pd.DataFrame,
    spec: ModelSpec | None = None,
    *,
    tol: float = 1e-10,
    inner_tol: float = 1e-12,
    max_iter: int = 200,
    keep_internals: bool = True,
    recover_fixed_effects: bool = True,
) -> FitResult:
    """Fit the log-link Poisson pseudo-ML model with absorbed fixed effects.

    Units or dates whose outcome is identically zero are dropped first
    (their effects diverge under the log link); the counts appear in
    ``FitResult.dropped``.  Convergence is declared when the relative
    deviance change falls below ``tol`` with projection updates below
    ``inner_tol``.  At convergence the per-unit, per-date and per-covariate
    residual sums vanish; their attained magnitudes are reported in
    ``FitResult.score_norms``.
    """
    spec = spec or ModelSpec()
    y_all, x_all, unit_labels, date_labels = _build_design(panel, spec)
    n_all = y_all.size
    if n_all == 0:
        raise ValidationError("empty panel")

    labels_by_dim = {}
    if unit_labels is not None:
        labels_by_dim["unit"] = unit_labels
    if date_labels is not None:
        labels_by_dim["date"] = date_labels

    mask = np.ones(n_all, dtype=bool)
    dropped = _drop_zero_groups(y_all, mask, labels_by_dim, spec.fixed_effects)
    if not mask.any():
        raise ValidationError("all rows dropped: every unit/date has an all-zero outcome")

    y = y_all[mask]
    x = x_all[mask]
    n = y.size
    names = spec.param_names()
    k = x.shape[1]

    codes_by_dim: dict[str, tuple[np.ndarray, int, np.ndarray]] = {}
    for dim, labels in labels_by_dim.items():
        codes, uniques = pd.factorize(labels[mask], sort=True)
        codes_by_dim[dim] = (codes.astype(np.int64), len(uniques), uniques)

    fe_codes = [codes_by_dim[d][0] for d in spec.fixed_effects]
    fe_sizes = [codes_by_dim[d][1] for d in spec.fixed_effects]
    absorber = _Absorber(fe_codes, fe_sizes)

    # warm start: beta = 0, effects from one projection pass on log(y + 0.1 ybar)
    ybar = float(y.mean())
    v = np.log(y + 0.1 * ybar)
    eta = np.zeros(n)
    if spec.fixed_effects:
        rem = v.copy()
        for codes, size in zip(fe_codes, fe_sizes):
            means = np.bincount(codes, weights=rem, minlength=size) / np.bincount(codes, minlength=size)
            eta += means[codes]
            rem -= means[codes]
    else:
        eta[:] = v.mean()

    x_cols = [np.ascontiguousarray(x[:, j]) for j in range(k)]
    scales = np.array([max(1.0, float(np.abs(c).max())) for c in [v] + x_cols])
    zt: np.ndarray | None = None
    xt = [c.copy() for c in x_cols]
    z_prev: np.ndarray | None = None
    first = True

    beta = np.zeros(k)
    mu = np.exp(np.clip(eta, -_ETA_CLIP, _ETA_CLIP))
    dev = _poisson_deviance(y, mu)
    converged = False
    iterations = 0
    gram = np.zeros((k, k))

    for iterations in range(1, max_iter + 1):
        w = mu
        z = eta + (y - mu) / mu
        absorber.set_weights(w)
        if first:
            zt = z.copy()
            first = False
        else:
            zt += z - z_prev
        z_prev = z.copy()
        absorber.demean([zt] + xt, scales, inner_tol)

        if k:
            weighted = [w * c for c in xt]
            gram = _pairwise_gram(weighted, xt)
            _find_collinear(gram, names, scales[1:], float(np.sum(w)))
            rhs = _column_against(weighted, zt)
            beta = np.linalg.solve(gram, rhs)
            fitted_resid = zt.copy()
            for j in range(k):
                fitted_resid -= beta[j] * xt[j]
        else:
            fitted_resid = zt.copy()
        eta_new = z - fitted_resid
        np.clip(eta_new, -_ETA_CLIP, _ETA_CLIP, out=eta_new)

        mu_new = np.exp(eta_new)
        dev_new = _poisson_deviance(y, mu_new)
        halvings = 0
        while dev_new > dev * (1 + 1e-12) + 1e-12 and halvings < 20:
            eta_new = 0.5 * (eta_new + eta)
            mu_new = np.exp(np.clip(eta_new, -_ETA_CLIP, _ETA_CLIP))
            dev_new = _poisson_deviance(y, mu_new)
            halvings += 1

        eta, mu = eta_new, mu_new
        if abs(dev_new - dev) / (0.1 + abs(dev_new)) < tol:
            dev = dev_new
            converged = True
            break
        dev = dev_new

    if not converged:
        raise ConvergenceError(
            f"Poisson IRLS did not converge in {max_iter} iterations (last deviance {dev:.6g})",
            last_deviance=dev,
            iterations=max_iter,
        )

    # polish: re-demean at the converged weights so score conditions are tight
    w = mu
    z = eta + (y - mu) / mu
    absorber.set_weights(w)
    zt += z - z_prev
    absorber.demean([zt] + xt, scales, inner_tol)
    if k:
        weighted = [w * c for c in xt]
        gram = _pairwise_gram(weighted, xt)
        rhs = _column_against(weighted, zt)
        beta = np.linalg.solve(gram, rhs)
        fitted_resid = zt.copy()
        for j in range(k):
            fitted_resid -= beta[j] * xt[j]
    else:
        fitted_resid = zt.copy()
    eta = z - fitted_resid
    np.clip(eta, -_ETA_CLIP, _ETA_CLIP, out=eta)
    mu = np.exp(eta)
    dev = _poisson_deviance(y, mu)

    resid = y - mu
    ysum = float(np.sum(y))
    score_norms: dict[str, float] = {}
    for dim in spec.fixed_effects:
        codes, size, _ = codes_by_dim[dim]
        score_norms[dim] = float(np.abs(np.bincount(codes, weights=resid, minlength=size)).max()) / ysum
    if k:
        raw_scores = [float(np.sum(x[:, j] * resid)) for j in range(k)]
        score_norms["covariates"] = float(np.max(np.abs(raw_scores))) / ysum

    cluster_codes = {
        dim: (codes_by_dim[dim][0], codes_by_dim[dim][1]) for dim in spec.cluster_dims()
    }
    internals = FitInternals(
        x_demeaned=np.column_stack(xt) if k else np.empty((n, 0)),
        residuals=resid,
        hessian=gram if k else np.zeros((0, 0)),
        cluster_codes=cluster_codes,
        param_names=names,
    )
    if k:
        vcov, repaired = two_way_clustered_covariance(internals, spec.cluster_dims())
    else:
        vcov, repaired = np.zeros((0, 0)), False

    unit_effects = date_effects = None
    if recover_fixed_effects and spec.fixed_effects:
        field_part = eta - (x @ beta if k else 0.0)
        unit_effects, date_effects = _split_effects(field_part, spec, codes_by_dim)

    loglik = _poisson_loglik(y, eta, mu)
    mu0 = ybar
    loglik_null = float(np.sum(y) * np.log(mu0) - n * mu0 - np.sum(gammaln(y + 1.0)))
    null_deviance = _poisson_deviance(y, np.full(n, mu0))

    return FitResult(
        param_names=names,
        params=beta,
        vcov=vcov,
        vcov_repaired=repaired,
        unit_effects=unit_effects,
        date_effects=date_effects,
        n_obs=n,
        n_units=codes_by_dim["unit"][1] if "unit" in codes_by_dim else 0,
        n_dates=codes_by_dim["date"][1] if "date" in codes_by_dim else 0,
        deviance=dev,
        null_deviance=null_deviance,
        loglik=loglik,
        loglik_null=loglik_null,
        iterations=iterations,
        converged=converged,
        dropped=dropped,
        score_norms=score_norms,
        spec=spec,
        internals=internals if keep_internals else None,
    )


def _split_effects(field_part: np.ndarray, spec: ModelSpec, codes_by_dim) -> tuple[pd.Series | None, pd.Series | None]:
    """Decompose the absorbed field into unit and date effects.

    Date effects are normalized to zero at the first (reference) date; the
    remainder, including the overall level, sits in the unit effects.
    """
    if spec.fixed_effects == ("unit",) or spec.fixed_effects == ("date",):
        dim = spec.fixed_effects[0]
        codes, size, uniques = codes_by_dim[dim]
        means = np.bincount(codes, weights=field_part, minlength=size) / np.bincount(codes, minlength=size)
        series = pd.Series(means, index=pd.Index(uniques, name=dim))
        return (series, None) if dim == "unit" else (None, series)

    ucodes, usize, ulabels = codes_by_dim["unit"]
    dcodes, dsize, dlabels = codes_by_dim["date"]
    ucount = np.bincount(ucodes, minlength=usize)
    dcount = np.bincount(dcodes, minlength=dsize)
    alpha = np.zeros(usize)
    gamma = np.zeros(dsize)
    for _ in range(100_000):
        alpha_new = np.bincount(ucodes, weights=field_part - gamma[dcodes], minlength=usize) / ucount
        gamma_new = np.bincount(dcodes, weights=field_part - alpha_new[ucodes], minlength=dsize) / dcount
        step = max(np.abs(alpha_new - alpha).max(), np.abs(gamma_new - gamma).max())
        alpha, gamma = alpha_new, gamma_new
        if step < 1e-12:
            break
    # reference-date normalization
    alpha = alpha + gamma[0]
    gamma = gamma - gamma[0]
    return (
        pd.Series(alpha, index=pd.Index(ulabels, name="unit")),
        pd.Series(gamma, index=pd.Index(dlabels, name="date")),
    )


def two_way_clustered_covariance(
    internals: FitInternals, dims: Sequence[str] | None = None
) -> tuple[np.ndarray, bool]:
    """Clustered sandwich covariance over one or two dimensions.

    With two dimensions the meat is ``M_a + M_b - M_(a^b)`` where the last
    term clusters on the (a, b) intersection; each term carries its own
    G/(G-1) factor.  With no dimensions every observation is its own
    cluster (heteroskedasticity-robust).  Returns the covariance and a flag
    saying whether negative eigenvalues were zeroed to restore PSD-ness.
    """
    dims = tuple(dims) if dims is not None else tuple(internals.cluster_codes)
    xt = internals.x_demeaned
    resid = internals.residuals
    n, k = xt.shape
    if k == 0:
        return np.zeros((0, 0)), False
    scores = [np.ascontiguousarray(xt[:, j]) * resid for j in range(k)]

    def meat_for(codes: np.ndarray, n_groups: int) -> np.ndarray:
        if n_groups < 2:
            raise ValidationError("cluster dimension has a single cluster; covariance is undefined")
        s = np.column_stack([np.bincount(codes, weights=col, minlength=n_groups) for col in scores])
        m = np.empty((k, k))
        for i in range(k):
            for j in range(i, k):
                m[i, j] = m[j, i] = np.sum(s[:, i] * s[:, j])
        return m * (n_groups / (n_groups - 1.0))

    if not dims:
        meat = meat_for(np.arange(n, dtype=np.int64), n)
    elif len(dims) == 1:
        codes, size = internals.cluster_codes[dims[0]]
        meat = meat_for(codes, size)
    elif len(dims) == 2:
        (codes_a, size_a) = internals.cluster_codes[dims[0]]
        (codes_b, size_b) = internals.cluster_codes[dims[1]]
        pair = codes_a.astype(np.int64) * np.int64(size_b) + codes_b
        _, inter = np.unique(pair, return_inverse=True)
        n_inter = int(inter.max()) + 1
        meat = meat_for(codes_a, size_a) + meat_for(codes_b, size_b) - meat_for(inter, n_inter)
    else:
        raise ValidationError(f"at most two cluster dimensions supported, got {dims}")

    bread = np.linalg.solve(internals.hessian, np.eye(k))
    vcov = bread @ meat @ bread
    vcov = 0.5 * (vcov + vcov.T)
    eigvals, eigvecs = np.linalg.eigh(vcov)
    repaired = bool(np.any(eigvals < 0))
    if repaired:
        eigvals = np.clip(eigvals, 0.0, None)
        vcov = eigvecs @ np.diag(eigvals) @ eigvecs.T
        vcov = 0.5 * (vcov + vcov.T)
    return vcov, repaired


def pseudo_r2(fit: FitResult) -> float:
    """McFadden-style pseudo R-squared against an intercept-only null.

    Log-likelihoods are measured relative to the saturated model, i.e. the
    ratio is computed on deviances: ``1 - D(model) / D(null)``.  A perfect
    fit gives 1 and the null itself gives 0.  This is a documented reporting
    convention, not a quantity tied to any published table.
    """
    if not np.isfinite(fit.null_deviance) or fit.null_deviance <= 1e-12:
        raise ValidationError("degenerate null model: null deviance is zero or not finite")
    return 1.0 - fit.deviance / fit.null_deviance


def transform_estimate(delta: float, se: float, z: float = 1.96) -> dict[str, float]:
    """Percent effect and CI implied by a log-scale estimate.

    percent = (exp(delta) - 1) x 100; the CI bounds apply the same transform
    to delta +/- z * se.
    """
    if se < 0:
        raise ValidationError(f"standard error must be non-negative, got {se}")
    return {
        "percent": (np.exp(delta) - 1.0) * 100.0,
        "ci_low": (np.exp(delta - z * se) - 1.0) * 100.0,
        "ci_high": (np.exp(delta + z * se) - 1.0) * 100.0,
    }
