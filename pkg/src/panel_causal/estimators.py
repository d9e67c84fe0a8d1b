"""ATE and ATT estimators for two-period panel data.

Six methods share one dataset and term language:

- OR: post-period outcome regression, counterfactual-mean contrast.
- GLMM: stacked mixed-model fit, population-averaged contrast over the
  random intercept.
- IPW: Horvitz-Thompson inverse propensity weighting of the post period.
- DID: the classic difference of group mean differences (ATT only).
- IPWDID: the propensity-weighted difference-in-differences, the post-period
  weighted contrast minus the same contrast in the pre period.
- DRGLMM: the doubly robust combination, a GLMM refit after augmenting the
  design with propensity quantile dummies.

ATE averages each estimator's unit-level contrast over everyone; ATT over
treated units only (with the matching treated-normalized weights for the
inverse-probability methods).
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ExtremeWeightsWarning, InvalidArgumentError
from .glm_fit import ps_quantile_dummies
from .lmm_fit import fit_lmm, fit_or
from .marginalize import IDENTITY_LINK, population_average_contrast
from .panel_data import (
    ModelSpec,
    build_design,
    stacked_cluster_ids,
    stacked_response,
)

__all__ = [
    "EffectEstimate",
    "estimate_or",
    "estimate_glmm",
    "estimate_ipw",
    "estimate_did",
    "estimate_ipwdid",
    "estimate_drglmm",
]

METHODS = ("OR", "GLMM", "IPW", "DID", "IPWDID", "DRGLMM")
ESTIMANDS = ("ATE", "ATT")


@dataclass(frozen=True)
class EffectEstimate:
    """A single point estimate with method-specific intermediates.

    ``components`` holds the building blocks the estimate is assembled
    from.  For IPWDID/ATE these are the four weighted period means
    ``delta{t}_{treated,control}`` and the identity
    ``value == (delta1_treated - delta1_control) - (delta0_treated -
    delta0_control)`` holds exactly, because the value is computed from
    them.
    """

    method: str
    estimand: str
    value: float
    components: dict = field(default_factory=dict)


def _att_mask(data):
    return data.d1 == 1


def _check_ps(data, ps_fit, eps=None):
    ps = np.asarray(ps_fit.fitted_ps, dtype=float)
    if ps.shape != (data.n,):
        raise InvalidArgumentError(
            f"ps_fit has {ps.shape[0]} fitted scores for {data.n} units"
        )
    if np.any((ps <= 0.0) | (ps >= 1.0)):
        raise InvalidArgumentError("fitted propensity scores must lie strictly in (0, 1)")
    if eps is not None and np.any((ps < eps) | (ps > 1.0 - eps)):
        warnings.warn(
            f"propensity scores outside [{eps:g}, {1 - eps:g}]; inverse weights "
            "may be unstable",
            ExtremeWeightsWarning,
            stacklevel=3,
        )
    return ps


def _contrast_estimates(method, contrasts, mask, components):
    ate = float(np.mean(contrasts))
    att = float(np.mean(contrasts[mask]))
    return {
        "ATE": EffectEstimate(method, "ATE", ate, dict(components)),
        "ATT": EffectEstimate(method, "ATT", att, dict(components)),
    }


def estimate_or(data, spec):
    """Post-period outcome regression estimates of ATE and ATT.

    Fits ordinary least squares on the n post-period rows and contrasts the
    fitted counterfactual means with treatment forced to 1 versus 0.  The
    spec should not contain time terms: in the post period they are
    collinear with the intercept (a time-interaction covariate equals its
    main effect there).

    Returns
    -------
    dict
        ``{"ATE": EffectEstimate, "ATT": EffectEstimate}``.
    """
    design = build_design(data, spec, stacked=False)
    fit = fit_or(design.X, data.y1)
    contrasts = (design.cf_treated - design.cf_control) @ fit.fixed_effects
    return _contrast_estimates("OR", contrasts, _att_mask(data), {})


def _glmm_fit(data, spec, extra_unit_cols=None):
    """Fit the stacked outcome model, optionally with per-unit extra columns.

    Extra columns (the propensity dummies) are constant within unit, so they
    are repeated across both period rows and appended to the counterfactual
    designs as well.  Returns (fit, cf_treated, cf_control).
    """
    if not isinstance(spec, ModelSpec):
        spec = ModelSpec(outcome_terms=tuple(spec))
    design = build_design(data, spec, stacked=True)
    X = design.X
    cf1 = design.cf_treated
    cf0 = design.cf_control
    if extra_unit_cols is not None and extra_unit_cols.shape[1] > 0:
        X = np.hstack([X, np.repeat(extra_unit_cols, 2, axis=0)])
        cf1 = np.hstack([cf1, extra_unit_cols])
        cf0 = np.hstack([cf0, extra_unit_cols])
    y = stacked_response(data)
    if spec.random_effect == "unit_intercept":
        fit = fit_lmm(X, y, stacked_cluster_ids(data))
    else:
        fit = fit_or(X, y)
    return fit, cf1, cf0


def estimate_glmm(data, spec, quad_order=20):
    """Mixed-model estimates of ATE and ATT via marginalized contrasts.

    Fits the stacked two-period model with a unit random intercept (or
    without one, if ``spec.random_effect == "none"``), builds both
    counterfactual post-period linear predictors, and averages the
    population-level contrast over units.  The outcome family here is
    Gaussian with identity link, so the marginalization is exact; the
    quadrature order only matters for nonlinear-link uses of the underlying
    machinery.
    """
    fit, cf1, cf0 = _glmm_fit(data, spec)
    eta1 = cf1 @ fit.fixed_effects
    eta0 = cf0 @ fit.fixed_effects
    contrasts = population_average_contrast(
        eta1, eta0, fit.sigma_u2, IDENTITY_LINK, K=quad_order
    )
    comps = {"sigma_u2": fit.sigma_u2, "sigma_e2": fit.sigma_e2}
    return _contrast_estimates("GLMM", contrasts, _att_mask(data), comps)


def estimate_ipw(data, ps_fit, extreme_eps=0.01):
    """Horvitz-Thompson inverse propensity weighting of the post period.

    ATE is the mean of ``d y1 / ps - (1 - d) y1 / (1 - ps)``; ATT reweights
    controls by the odds ``ps / (1 - ps)`` and normalizes by the treated
    count.
    """
    ps = _check_ps(data, ps_fit, extreme_eps)
    d = data.d1.astype(float)
    y1 = data.y1
    ht_treated = float(np.mean(d * y1 / ps))
    ht_control = float(np.mean((1.0 - d) * y1 / (1.0 - ps)))
    ate = ht_treated - ht_control
    w = d - (1.0 - d) * ps / (1.0 - ps)
    att = float(np.sum(w * y1) / d.sum())
    return {
        "ATE": EffectEstimate(
            "IPW", "ATE", ate,
            {"ht_treated": ht_treated, "ht_control": ht_control},
        ),
        "ATT": EffectEstimate("IPW", "ATT", att, {}),
    }


def estimate_did(data):
    """Difference-in-differences estimate of the ATT.

    (treated post mean - control post mean) minus the same difference in
    the pre period.  Returns a single :class:`EffectEstimate`.
    """
    treated = _att_mask(data)
    control = ~treated
    post = float(data.y1[treated].mean() - data.y1[control].mean())
    pre = float(data.y0[treated].mean() - data.y0[control].mean())
    return EffectEstimate(
        "DID", "ATT", post - pre, {"post_diff": post, "pre_diff": pre}
    )


def estimate_ipwdid(data, ps_fit, extreme_eps=0.01):
    """Propensity-weighted difference-in-differences for ATE and ATT.

    The ATE subtracts the pre-period Horvitz-Thompson contrast from the
    post-period one; the four weighted means are recorded as components and
    the value is assembled from them, so the decomposition identity is
    exact.  The ATT applies the treated-normalized weights to the response
    change ``y1 - y0``.
    """
    ps = _check_ps(data, ps_fit, extreme_eps)
    d = data.d1.astype(float)
    delta1_treated = float(np.mean(d * data.y1 / ps))
    delta1_control = float(np.mean((1.0 - d) * data.y1 / (1.0 - ps)))
    delta0_treated = float(np.mean(d * data.y0 / ps))
    delta0_control = float(np.mean((1.0 - d) * data.y0 / (1.0 - ps)))
    ate = (delta1_treated - delta1_control) - (delta0_treated - delta0_control)
    w = d - (1.0 - d) * ps / (1.0 - ps)
    n1 = d.sum()
    att_post = float(np.sum(w * data.y1) / n1)
    att_pre = float(np.sum(w * data.y0) / n1)
    return {
        "ATE": EffectEstimate(
            "IPWDID", "ATE", ate,
            {
                "delta1_treated": delta1_treated,
                "delta1_control": delta1_control,
                "delta0_treated": delta0_treated,
                "delta0_control": delta0_control,
            },
        ),
        "ATT": EffectEstimate(
            "IPWDID", "ATT", att_post - att_pre,
            {"post": att_post, "pre": att_pre},
        ),
    }


def estimate_drglmm(data, spec, ps_fit, k_bins=5, quad_order=20):
    """Doubly robust estimates: GLMM augmented with propensity bin dummies.

    The fitted propensity scores are cut into ``k_bins`` equal-frequency
    bins; the bin dummies enter the stacked design (constant within unit)
    and both counterfactual designs, so with the identity link their
    coefficients cancel from every contrast and act purely as a bias
    correction on the refitted treatment terms.  A constant propensity
    collapses all bins and reproduces :func:`estimate_glmm` exactly.
    """
    ps = _check_ps(data, ps_fit)  # range check only; no weighting happens here
    dummies = ps_quantile_dummies(ps, K=k_bins)
    fit, cf1, cf0 = _glmm_fit(data, spec, extra_unit_cols=dummies.dummies)
    eta1 = cf1 @ fit.fixed_effects
    eta0 = cf0 @ fit.fixed_effects
    contrasts = population_average_contrast(
        eta1, eta0, fit.sigma_u2, IDENTITY_LINK, K=quad_order
    )
    comps = {
        "sigma_u2": fit.sigma_u2,
        "sigma_e2": fit.sigma_e2,
        "n_dummy_columns": dummies.dummies.shape[1],
        "bins_collapsed": dummies.collapsed,
    }
    return _contrast_estimates("DRGLMM", contrasts, _att_mask(data), comps)
