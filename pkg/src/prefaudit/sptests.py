"""The two self-preferencing tests and their joint verdict.

The conditioning-on-observables (COO) test regresses the recommendation
(organic visibility) on the protected platform flag plus the unprotected
attributes; a positive significant flag coefficient signals
self-preferencing.  The outcome-based (OB) test regresses the outcome
(sales rank) on the recommendation and the flag; since a lower sales rank
means more sales, a positive flag coefficient again signals visibility
biased in the platform's favor, so the two tests share a sign convention.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import pandas as pd

from .errors import ValidationError
from .feglm import FitResult, ModelSpec, fit_poisson_two_way_fe, transform_estimate

logger = logging.getLogger(__name__)

EVIDENCE_FOR = "evidence-for"
NO_EVIDENCE = "no-evidence"
NEGATIVE = "negative"

CONSISTENT_EVIDENCE = "CONSISTENT-EVIDENCE"
CONSISTENT_NO_EVIDENCE = "CONSISTENT-NO-EVIDENCE"
DISAGREE = "DISAGREE"

OB_COVARIATES = (
    ("organic_visibility", "log"),
    ("sponsored_visibility", "log"),
    ("price", "log"),
)


def coo_spec(unit: str = "product_id") -> ModelSpec:
    """Visibility regression spec; pass ``unit="comparison_group_id"`` for
    the between-product (private-label) design."""
    return ModelSpec(unit=unit)


def ob_spec(unit: str = "product_id") -> ModelSpec:
    """Sales-rank regression spec for the outcome-based test."""
    return ModelSpec(outcome="sales_rank", covariates=OB_COVARIATES, unit=unit)


@dataclass
class TestReport:
    """One test's estimate, uncertainty and conclusion."""

    __test__ = False  # keep pytest from collecting this as a test class

    kind: str  # "COO" or "OB"
    delta: float
    se: float
    percent: float
    ci_low: float
    ci_high: float
    p_value: float
    conclusion: str
    sample: str
    n_obs: int
    n_units: int
    dropped_zero_visibility: int = 0
    fit: FitResult | None = None

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "delta": self.delta,
            "se": self.se,
            "percent": self.percent,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "p_value": self.p_value,
            "conclusion": self.conclusion,
            "sample": self.sample,
            "n_obs": self.n_obs,
            "n_units": self.n_units,
            "dropped_zero_visibility": self.dropped_zero_visibility,
        }
        if self.fit is not None:
            out["coefficients"] = self.fit.coef
            out["coefficient_se"] = dict(zip(self.fit.param_names, self.fit.se.tolist()))
            out["pseudo_r2"] = self.fit.pseudo_r2
        return out

    def summary(self) -> str:
        return (
            f"[{self.kind}] sample {self.sample}: delta={self.delta:+.4f} (SE {self.se:.4f}), "
            f"{self.percent:+.1f}% [{self.ci_low:+.1f}%, {self.ci_high:+.1f}%], "
            f"p={self.p_value:.3f} -> {self.conclusion}"
        )


def _two_sided_p(delta: float, se: float) -> float:
    if se == 0:
        return 1.0 if delta == 0 else 0.0
    return math.erfc(abs(delta / se) / math.sqrt(2.0))


def _conclude(ci_low: float, ci_high: float) -> str:
    if ci_low > 0:
        return EVIDENCE_FOR
    if ci_high < 0:
        return NEGATIVE
    return NO_EVIDENCE


def _sample_descriptor(panel: pd.DataFrame, unit_col: str) -> str:
    markets = sorted(panel["market"].dropna().unique()) if "market" in panel.columns else []
    n_units = panel[unit_col].nunique() if unit_col in panel.columns else panel["product_id"].nunique()
    n_days = panel["date"].nunique()
    return f"{'+'.join(markets) or 'unknown'}|units={n_units}|days={n_days}"


def _build_report(kind, fit, spec, sample, z, dropped=0) -> TestReport:
    delta, se = fit[spec.protected]
    ci = transform_estimate(delta, se, z)
    return TestReport(
        kind=kind,
        delta=delta,
        se=se,
        percent=ci["percent"],
        ci_low=ci["ci_low"],
        ci_high=ci["ci_high"],
        p_value=_two_sided_p(delta, se),
        conclusion=_conclude(ci["ci_low"], ci["ci_high"]),
        sample=sample,
        n_obs=fit.n_obs,
        n_units=fit.n_units,
        dropped_zero_visibility=dropped,
        fit=fit,
    )


def coo_test(panel: pd.DataFrame, spec: ModelSpec | None = None, *, z: float = 1.96, sample: str | None = None) -> TestReport:
    """Conditioning-on-observables test on an already-lagged panel."""
    if panel.attrs.get("lagged_by", 0) < 1:
        raise ValidationError("COO test requires a lagged panel: apply lag_covariates first")
    spec = spec or coo_spec()
    if spec.protected is None:
        raise ValidationError("COO test needs a protected attribute in the model spec")
    fit = fit_poisson_two_way_fe(panel, spec)
    sample = sample or _sample_descriptor(panel, spec.unit)
    return _build_report("COO", fit, spec, sample, z)


def ob_test(
    panel: pd.DataFrame,
    spec: ModelSpec | None = None,
    lag_days: int = 1,
    *,
    z: float = 1.96,
    sample: str | None = None,
) -> TestReport:
    """Outcome-based test; takes the raw panel and lags regressors itself.

    All regressors, including both visibility terms, are lagged uniformly
    by ``lag_days`` while the sales-rank outcome stays current.  Rows whose
    lagged organic or sponsored visibility is zero (or missing) are dropped
    and counted, not epsilon-shifted.
    """
    if panel.attrs.get("lagged_by", 0) != 0:
        raise ValidationError("OB test lags internally: pass the raw panel, not a lagged one")
    if "sponsored_visibility" not in panel.columns or panel["sponsored_visibility"].isna().all():
        raise ValidationError("OB test requires a sponsored_visibility column")
    spec = spec or ob_spec()
    if spec.protected is None:
        raise ValidationError("OB test needs a protected attribute in the model spec")

    from .panel import lag_covariates  # local import to avoid a cycle

    lagged = lag_covariates(panel, lag_days, keep_current=(spec.outcome,))
    usable = (
        lagged["organic_visibility"].fillna(0).gt(0)
        & lagged["sponsored_visibility"].fillna(0).gt(0)
    )
    dropped = int((~usable).sum())
    if dropped:
        logger.info("OB test dropped %d rows with zero organic or sponsored visibility", dropped)
    frame = lagged[usable].reset_index(drop=True)
    frame.attrs = dict(lagged.attrs)
    fit = fit_poisson_two_way_fe(frame, spec)
    sample = sample or _sample_descriptor(frame, spec.unit)
    return _build_report("OB", fit, spec, sample, z, dropped=dropped)


@dataclass
class JointVerdict:
    """Comparison of the two tests on the same sample."""

    verdict: str
    coo: TestReport
    ob: TestReport

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "coo": self.coo.to_dict(), "ob": self.ob.to_dict()}

    def summary(self) -> str:
        return f"{self.verdict}\n  {self.coo.summary()}\n  {self.ob.summary()}"


def compare_tests(coo: TestReport, ob: TestReport) -> JointVerdict:
    """Joint verdict: both tests must speak about the same sample.

    "Evidence" means evidence *for* self-preferencing; a negative finding
    (third parties favored) counts as no evidence of favoring the platform.
    """
    if coo.sample != ob.sample:
        raise ValidationError(f"mismatched samples: COO={coo.sample!r} vs OB={ob.sample!r}")
    coo_evidence = coo.conclusion == EVIDENCE_FOR
    ob_evidence = ob.conclusion == EVIDENCE_FOR
    if coo_evidence and ob_evidence:
        verdict = CONSISTENT_EVIDENCE
    elif not coo_evidence and not ob_evidence:
        verdict = CONSISTENT_NO_EVIDENCE
    else:
        verdict = DISAGREE
    return JointVerdict(verdict=verdict, coo=coo, ob=ob)
