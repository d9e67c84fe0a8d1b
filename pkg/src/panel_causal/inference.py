"""Bootstrap inference, specification diagnostics, and model pruning.

Uncertainty comes from the cluster bootstrap: units are resampled with
replacement, each carrying both of its rows, and the whole pipeline
(propensity fit, outcome fit, estimate) reruns per replicate.  Replicate r
draws from the random stream keyed by ``(seed, r)``, so results are
bit-identical for a fixed seed no matter how many worker threads run.

The diagnostics are a doubly-robust specification test (compare the DR
estimate against the pure weighting and pure outcome-model estimates on
shared bootstrap replicates), a propensity balance check (does adding the
covariates back improve a treatment model that already has the fitted score
and its powers?), and backward elimination of weak terms from both the
outcome and treatment models.
"""

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import norm

from .errors import (
    BootstrapFailureWarning,
    DegenerateVarianceWarning,
    EmptyModelWarning,
    InvalidArgumentError,
    PanelCausalError,
    SeparationError,
)
from .estimators import (
    ESTIMANDS,
    METHODS,
    estimate_did,
    estimate_drglmm,
    estimate_glmm,
    estimate_ipw,
    estimate_ipwdid,
    estimate_or,
)
from .glm_fit import fit_logistic, fit_propensity
from .lmm_fit import fit_lmm, fit_or
from .panel_data import (
    ModelSpec,
    build_design,
    ps_design,
    stacked_cluster_ids,
    stacked_response,
    term_label,
)
from .rng import substream

__all__ = [
    "EstimatorConfig",
    "BootstrapResult",
    "DRTestResult",
    "BalanceReport",
    "evaluate_estimator",
    "relative_effect",
    "cluster_bootstrap",
    "dr_specification_test",
    "balance_check",
    "backward_eliminate",
]


@dataclass(frozen=True)
class EstimatorConfig:
    """Which estimator to run, and with what models.

    ``spec`` supplies the outcome terms (OR, GLMM, DRGLMM) and the
    propensity terms (IPW, IPWDID, DRGLMM); DID needs neither.
    """

    method: str
    estimand: str
    spec: ModelSpec = None
    k_bins: int = 5
    quad_order: int = 20
    extreme_eps: float = 0.01

    def __post_init__(self):
        method = str(self.method).upper()
        estimand = str(self.estimand).upper()
        object.__setattr__(self, "method", method)
        object.__setattr__(self, "estimand", estimand)
        if method not in METHODS:
            raise InvalidArgumentError(f"method must be one of {METHODS}, got {self.method!r}")
        if estimand not in ESTIMANDS:
            raise InvalidArgumentError(
                f"estimand must be one of {ESTIMANDS}, got {self.estimand!r}"
            )
        if method == "DID" and estimand != "ATT":
            raise InvalidArgumentError("DID estimates the ATT only")
        needs_outcome = method in ("OR", "GLMM", "DRGLMM")
        needs_ps = method in ("IPW", "IPWDID", "DRGLMM")
        if needs_outcome and (self.spec is None or not self.spec.outcome_terms):
            raise InvalidArgumentError(f"{method} requires spec.outcome_terms")
        if needs_ps and (self.spec is None or not self.spec.ps_terms):
            raise InvalidArgumentError(f"{method} requires spec.ps_terms")


def evaluate_estimator(config, data, ps_fit=None):
    """Run the configured estimator on ``data`` and return its point value.

    ``ps_fit`` can inject an already-fitted propensity model (the bootstrap
    never does this: each replicate refits everything).
    """
    method = config.method
    if method == "DID":
        return estimate_did(data).value
    if method in ("IPW", "IPWDID", "DRGLMM") and ps_fit is None:
        ps_fit = fit_propensity(data, config.spec)
    if method == "OR":
        out = estimate_or(data, config.spec)
    elif method == "GLMM":
        out = estimate_glmm(data, config.spec, quad_order=config.quad_order)
    elif method == "IPW":
        out = estimate_ipw(data, ps_fit, extreme_eps=config.extreme_eps)
    elif method == "IPWDID":
        out = estimate_ipwdid(data, ps_fit, extreme_eps=config.extreme_eps)
    else:
        out = estimate_drglmm(
            data, config.spec, ps_fit, k_bins=config.k_bins, quad_order=config.quad_order
        )
    return out[config.estimand].value


def relative_effect(value, data):
    """Express an absolute effect as a percentage of the mean pre-period
    response, the conventional scale for reporting traffic-count effects."""
    base = float(np.mean(data.y0))
    if base == 0.0:
        raise InvalidArgumentError(
            "relative effect undefined: mean pre-period response is zero"
        )
    return 100.0 * float(value) / base


@dataclass(frozen=True)
class BootstrapResult:
    """Point estimate plus percentile bootstrap summaries.

    ``n_failed`` counts replicates whose refit failed (NoOverlap after
    resampling, separation, rank problems); they are excluded from the
    summaries and a warning fires if they reach 5 percent of B.
    """

    point: float
    boot_mean: float
    se: float
    ci_lower: float
    ci_upper: float
    B: int
    n_failed: int


def _run_replicates(worker, B, threads):
    """Evaluate ``worker(r)`` for r in 0..B-1, results in replicate order.

    Each replicate owns its random stream, so scheduling cannot change
    values; the output array is indexed by replicate, making the reduction
    order-deterministic regardless of thread count.
    """
    out = [None] * B
    threads = max(1, int(threads))
    if threads == 1:
        for r in range(B):
            out[r] = worker(r)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for r, val in zip(range(B), pool.map(worker, range(B))):
                out[r] = val
    return out


def cluster_bootstrap(data, config, B, seed, threads=1):
    """Nonparametric cluster bootstrap of one estimator.

    Parameters
    ----------
    data : PanelDataset
    config : EstimatorConfig
    B : int
        Replicate count, at least 2.
    seed : int
        Stream family; replicate r uses the ``(seed, r)`` stream.
    threads : int
        Worker threads.  Results are identical for any value.

    Returns
    -------
    BootstrapResult
    """
    B = int(B)
    if B < 2:
        raise InvalidArgumentError(f"B must be at least 2, got {B}")
    point = evaluate_estimator(config, data)
    n = data.n

    def one(r):
        idx = substream(seed, r).integers(0, n, size=n)
        try:
            return evaluate_estimator(config, data.take(idx))
        except (PanelCausalError, np.linalg.LinAlgError):
            return np.nan

    vals = np.array(_run_replicates(one, B, threads), dtype=float)
    ok = vals[np.isfinite(vals)]
    n_failed = int(B - ok.size)
    if n_failed >= 0.05 * B:
        warnings.warn(
            f"{n_failed} of {B} bootstrap replicates failed to fit",
            BootstrapFailureWarning,
            stacklevel=2,
        )
    if ok.size == 0:
        return BootstrapResult(point, np.nan, np.nan, np.nan, np.nan, B, n_failed)
    lo, hi = np.percentile(ok, [2.5, 97.5])
    se = float(np.std(ok, ddof=1)) if ok.size > 1 else 0.0
    return BootstrapResult(
        point=point,
        boot_mean=float(ok.mean()),
        se=se,
        ci_lower=float(lo),
        ci_upper=float(hi),
        B=B,
        n_failed=n_failed,
    )


@dataclass(frozen=True)
class DRTestResult:
    """Specification z-tests built from shared bootstrap replicates.

    ``z_ps`` compares the doubly robust ATE against the weighting-only
    estimate (large values indict the propensity model, whose correctness
    is what makes the two agree); ``z_or`` compares it against the
    outcome-model estimate.  Rejections are at the 1.96 critical value.
    """

    z_ps: float
    z_or: float
    reject_ps: bool
    reject_or: bool
    sigma_ps: float
    sigma_or: float
    B: int
    n_failed: int


def _guarded_z(num, sigma):
    if sigma == 0.0 or not np.isfinite(sigma):
        warnings.warn(
            "difference statistic has degenerate bootstrap variance; z set to 0",
            DegenerateVarianceWarning,
            stacklevel=3,
        )
        return 0.0
    return float(abs(num) / sigma)


def dr_specification_test(data, spec, ps_spec=None, B=500, seed=0,
                          k_bins=5, quad_order=20, threads=1):
    """Test the propensity and outcome models through their DR agreement.

    On the original data and on each of B shared cluster resamples, compute
    the doubly robust, weighted-DID, and mixed-model ATE estimates.  The
    bootstrap standard deviations of the pairwise differences scale the
    observed point differences into z statistics.

    Parameters
    ----------
    data : PanelDataset
    spec : ModelSpec
        Outcome terms (and propensity terms, unless overridden).
    ps_spec : ModelSpec, optional
        Separate source of propensity terms.
    """
    ps_terms = (ps_spec or spec).ps_terms
    if not ps_terms:
        raise InvalidArgumentError("dr_specification_test needs propensity terms")
    work_spec = replace(spec, ps_terms=ps_terms)
    B = int(B)
    if B < 2:
        raise InvalidArgumentError(f"B must be at least 2, got {B}")

    def triple(d):
        ps = fit_propensity(d, work_spec)
        dr = estimate_drglmm(d, work_spec, ps, k_bins=k_bins, quad_order=quad_order)
        ipwdid = estimate_ipwdid(d, ps)
        glmm = estimate_glmm(d, work_spec, quad_order=quad_order)
        return (dr["ATE"].value, ipwdid["ATE"].value, glmm["ATE"].value)

    point_dr, point_ipwdid, point_glmm = triple(data)
    n = data.n

    def one(r):
        idx = substream(seed, r).integers(0, n, size=n)
        try:
            return triple(data.take(idx))
        except (PanelCausalError, np.linalg.LinAlgError):
            return (np.nan, np.nan, np.nan)

    vals = np.array(_run_replicates(one, B, threads), dtype=float)
    ok = vals[np.all(np.isfinite(vals), axis=1)]
    n_failed = int(B - ok.shape[0])
    if ok.shape[0] < 2:
        raise PanelCausalError("too few successful bootstrap replicates for the DR test")
    sigma_ps = float(np.std(ok[:, 0] - ok[:, 1], ddof=1))
    sigma_or = float(np.std(ok[:, 0] - ok[:, 2], ddof=1))
    z_ps = _guarded_z(point_dr - point_ipwdid, sigma_ps)
    z_or = _guarded_z(point_dr - point_glmm, sigma_or)
    return DRTestResult(
        z_ps=z_ps,
        z_or=z_or,
        reject_ps=bool(z_ps > 1.96),
        reject_or=bool(z_or > 1.96),
        sigma_ps=sigma_ps,
        sigma_or=sigma_or,
        B=B,
        n_failed=n_failed,
    )


@dataclass(frozen=True)
class BalanceReport:
    """Outcome of the propensity balance regression comparison.

    The two adjusted pseudo-R-squared values come from logistic fits of the
    treatment on (a) the fitted score and its square and cube, and (b) the
    same plus all dataset covariates.  ``balanced`` is true when the
    covariates fail to improve (b) over (a); it is None when either fit was
    separated, which leaves the check inconclusive.
    """

    r2_ps_only: float
    r2_with_covariates: float
    balanced: object
    note: str = ""


def _conditioned_design(columns):
    """Well-conditioned design spanning the given columns: (matrix, rank).

    Gram-Schmidt with a relative residual threshold drops dependent
    columns; the surviving orthonormal basis is rescaled so every column
    has norm sqrt(n).  Powers of a propensity score concentrated on a
    short interval are nearly collinear, and a logistic fit on the raw
    monomials needs coefficients large enough to trip the separation
    detector; on the re-basis they stay O(1).  Fitted probabilities (and
    hence the balance statistics) depend only on the span, which is
    unchanged.  The intercept column survives as the first basis vector.
    """
    basis = []
    for c in columns:
        v = c.astype(float)
        norm0 = np.linalg.norm(v)
        if norm0 == 0.0:
            continue
        for b in basis:
            v = v - (b @ v) * b
        nv = np.linalg.norm(v)
        if nv > 1e-8 * norm0:
            basis.append(v / nv)
    rootn = np.sqrt(columns[0].shape[0])
    return np.column_stack(basis) * rootn, len(basis)


def _adjusted_pseudo_r2(d, fitted, n_predictors):
    n = d.shape[0]
    sd_f = np.std(fitted)
    if sd_f == 0.0 or np.std(d) == 0.0:
        r2 = 0.0
    else:
        r = np.corrcoef(d, fitted)[0, 1]
        r2 = float(r * r)
    denom = n - n_predictors - 1
    if denom <= 0:
        return float("-inf")
    return 1.0 - (1.0 - r2) * (n - 1) / denom


def balance_check(data, ps_fit):
    """Check covariate balance through the fitted propensity score.

    If the treatment model is adequate, the score and its low powers carry
    all the information the covariates have about treatment, so refitting
    with the covariates added cannot improve the (complexity-adjusted) fit.

    Returns
    -------
    BalanceReport
    """
    d = data.d1.astype(float)
    ps = np.asarray(ps_fit.fitted_ps, dtype=float)
    n = data.n
    base_cols = [np.ones(n), ps, ps**2, ps**3]
    # Regression (b) adds every dataset covariate at t=0, not just the ones
    # the treatment model used: a confounder the model omitted has to be able
    # to show up here.
    cov_cols = [data.x0[:, j] for j in range(len(data.covariate_names))]
    A, rank_a = _conditioned_design(base_cols)
    Bmat, rank_b = _conditioned_design(base_cols + cov_cols)
    try:
        fit_a = fit_logistic(A, d)
        fit_b = fit_logistic(Bmat, d)
    except SeparationError as exc:
        return BalanceReport(
            r2_ps_only=float("nan"),
            r2_with_covariates=float("nan"),
            balanced=None,
            note=f"inconclusive: {exc}",
        )
    # Intercept never counts as a predictor; it is kept first in both sets.
    r2_a = _adjusted_pseudo_r2(d, fit_a.fitted_ps, rank_a - 1)
    r2_b = _adjusted_pseudo_r2(d, fit_b.fitted_ps, rank_b - 1)
    return BalanceReport(
        r2_ps_only=r2_a,
        r2_with_covariates=r2_b,
        balanced=bool(r2_b <= r2_a),
    )


def _wald_pvalues(coef, se):
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, np.abs(coef) / se, np.inf)
    return 2.0 * norm.sf(z)


_FORCED_OUTCOME = ("intercept", "time", "treatment")


def backward_eliminate(data, full_spec, alpha=0.10):
    """Drop the weakest model terms one at a time until all survive ``alpha``.

    The outcome model and the treatment model are pruned independently, each
    by refitting after removing the single candidate term with the largest
    Wald p-value, as long as that p-value exceeds ``alpha``.  Intercept,
    time and treatment terms are never candidates.  Ties break toward the
    earliest term in spec order.  If every candidate is eliminated, the
    forced-terms-only model is returned with an :class:`EmptyModelWarning`.

    Returns
    -------
    ModelSpec
    """
    alpha = float(alpha)
    if not 0.0 < alpha <= 1.0:
        raise InvalidArgumentError(f"alpha must be in (0, 1], got {alpha}")

    def prune(terms, forced_kinds, pvalue_fn):
        terms = list(terms)
        had_candidates = any(t.kind not in forced_kinds for t in terms)
        while True:
            candidates = [i for i, t in enumerate(terms) if t.kind not in forced_kinds]
            if not candidates:
                break
            pvals = pvalue_fn(terms)
            worst = max(candidates, key=lambda i: (pvals[i], -i))
            if pvals[worst] > alpha:
                del terms[worst]
            else:
                break
        if had_candidates and not any(t.kind not in forced_kinds for t in terms):
            warnings.warn(
                "backward elimination removed every candidate term",
                EmptyModelWarning,
                stacklevel=3,
            )
        return tuple(terms)

    def outcome_pvalues(terms):
        spec = ModelSpec(outcome_terms=tuple(terms),
                         random_effect=full_spec.random_effect)
        design = build_design(data, spec, stacked=True)
        y = stacked_response(data)
        if spec.random_effect == "unit_intercept":
            fit = fit_lmm(design.X, y, stacked_cluster_ids(data))
        else:
            fit = fit_or(design.X, y)
        return _wald_pvalues(fit.fixed_effects, fit.se_fixed)

    def ps_pvalues(terms):
        X, _ = ps_design(data, tuple(terms))
        fit = fit_logistic(X, data.d1.astype(float))
        se = np.sqrt(np.diag(fit.cov_alpha))
        return _wald_pvalues(fit.alpha_hat, se)

    outcome_terms = prune(full_spec.outcome_terms, _FORCED_OUTCOME, outcome_pvalues)
    if full_spec.ps_terms:
        ps_terms = prune(full_spec.ps_terms, ("intercept",), ps_pvalues)
    else:
        ps_terms = ()
    return ModelSpec(
        outcome_terms=outcome_terms,
        random_effect=full_spec.random_effect,
        ps_terms=ps_terms,
    )
