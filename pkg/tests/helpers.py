"""Shared builders and oracles for the test suite."""

import numpy as np
from scipy.integrate import quad
from scipy.special import expit

from panel_causal import PanelDataset

# Fixed seed used by the desk-scale study tests.  Chosen once; every
# expected band below was verified against this seed before being frozen.
ACCEPT_SEED = 3


def make_dataset(y0, y1, d1, covariates=None, covariates_post=None, names=None,
                 unit_ids=None):
    """Build a PanelDataset from plain lists.

    ``covariates`` maps to t=0 values; ``covariates_post`` defaults to the
    same values (time-invariant covariates).
    """
    y0 = np.asarray(y0, dtype=float)
    n = y0.shape[0]
    if covariates is None:
        x0 = np.empty((n, 0))
        names = ()
    else:
        x0 = np.column_stack([np.asarray(c, dtype=float) for c in covariates])
        if names is None:
            names = tuple(f"x{j + 1}" for j in range(x0.shape[1]))
    if covariates_post is None:
        x1 = x0.copy()
    else:
        x1 = np.column_stack([np.asarray(c, dtype=float) for c in covariates_post])
    if unit_ids is None:
        unit_ids = np.array([f"u{i}" for i in range(n)], dtype=object)
    return PanelDataset(
        covariate_names=tuple(names),
        unit_ids=np.asarray(unit_ids, dtype=object),
        y0=y0,
        y1=np.asarray(y1, dtype=float),
        d1=np.asarray(d1, dtype=int),
        x0=x0,
        x1=x1,
    )


def ipw_toy():
    """A, B treated with y1 = 6, 8; C, D control with y1 = 3, 5."""
    return make_dataset(
        y0=[0.0, 0.0, 0.0, 0.0],
        y1=[6.0, 8.0, 3.0, 5.0],
        d1=[1, 1, 0, 0],
    )


def did_toy():
    """A(1->6), B(3->8) treated; C(2->3), D(4->5) control; DID = 4."""
    return make_dataset(
        y0=[1.0, 3.0, 2.0, 4.0],
        y1=[6.0, 8.0, 3.0, 5.0],
        d1=[1, 1, 0, 0],
    )


def shift_responses(data, c):
    """Copy of ``data`` with ``c`` added to both period responses."""
    return PanelDataset(
        covariate_names=data.covariate_names,
        unit_ids=data.unit_ids.copy(),
        y0=data.y0 + c,
        y1=data.y1 + c,
        d1=data.d1.copy(),
        x0=data.x0.copy(),
        x1=data.x1.copy(),
    )


def anova_oracle(y0, y1):
    """Closed-form balanced-ANOVA ML solution for the intercept-only LMM.

    For two observations per cluster and a shared mean, maximum likelihood
    has the closed form below (within/between mean squares); the boundary
    case pools both sums of squares.  Returns (mu, sigma_u2, sigma_e2,
    loglik).
    """
    y0 = np.asarray(y0, dtype=float)
    y1 = np.asarray(y1, dtype=float)
    n = y0.shape[0]
    mu = float(np.mean((y0 + y1) / 2.0))
    ssw = float(np.sum((y1 - y0) ** 2) / 2.0)
    ssb = float(2.0 * np.sum(((y0 + y1) / 2.0 - mu) ** 2))
    se2 = ssw / n
    su2 = (ssb / n - se2) / 2.0
    if su2 < 0.0:
        su2 = 0.0
        se2 = (ssw + ssb) / (2.0 * n)
    ll = 0.0
    var_w = se2
    var_b = se2 + 2.0 * su2
    for a, b in zip(y0, y1):
        resid = np.array([a - mu, b - mu])
        quad_form = (
            resid @ resid / var_w
            - (2.0 * su2 / (var_w * var_b)) * (resid.sum() / np.sqrt(2.0)) ** 2
        )
        ll += -0.5 * (2.0 * np.log(2.0 * np.pi) + np.log(var_w * var_b) + quad_form)
    return mu, su2, se2, float(ll)


def adaptive_contrast(eta1, eta0, sigma_u2):
    """Adaptive-quadrature oracle for the logit-link marginal contrast."""
    if sigma_u2 == 0.0:
        return float(expit(eta1) - expit(eta0))
    sd = np.sqrt(sigma_u2)

    def integrand(u):
        return (expit(eta1 + u) - expit(eta0 + u)) * np.exp(
            -0.5 * (u / sd) ** 2
        ) / (sd * np.sqrt(2.0 * np.pi))

    val, _ = quad(integrand, -np.inf, np.inf, epsabs=1e-12, epsrel=1e-12)
    return float(val)
