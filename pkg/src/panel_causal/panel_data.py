"""Two-period panel data: records, validation, model terms, design matrices.

Everything downstream consumes one fixed longitudinal layout: each unit
contributes exactly two measurement rows, a pre-intervention row (t=0, never
treated) and a post-intervention row (t=1, treated or control).  Responses
and covariates must be complete; covariates may change between periods or
not, and which ones do is inferred from the data itself.

The module also owns the declarative model-term language.  A term is one of
intercept, time, treatment, a covariate main effect, a covariate-by-time or
covariate-by-treatment interaction, or a log transform of a covariate, with
string forms ``"1"``, ``"time"``, ``"treat"``, ``"x1"``, ``"x1:time"``,
``"x1:treat"`` and ``"log(x2)"``.  ``build_design`` turns a term list into
the stacked (2n row) or post-period (n row) design matrix plus the two
counterfactual post-period designs with treatment forced to 1 and to 0.
"""

import csv
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (
    InvalidArgumentError,
    InvalidTermError,
    MalformedValueError,
    MissingRowError,
    MissingValueError,
    NoOverlapError,
    NonBinaryTreatmentError,
    NonPositiveLogError,
    TimeVaryingDowngradeWarning,
    TreatedAtBaselineError,
    UnknownCovariateError,
)

__all__ = [
    "UnitRecord",
    "PanelDataset",
    "Term",
    "ModelSpec",
    "DesignMatrices",
    "ColumnMapping",
    "parse_term",
    "term_label",
    "build_design",
    "ps_design",
    "stacked_response",
    "load_csv",
    "write_csv",
]


# ---------------------------------------------------------------------------
# records and dataset
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UnitRecord:
    """One unit's two rows, collapsed into a single record.

    ``x0`` and ``x1`` are covariate vectors aligned to the owning dataset's
    ``covariate_names``; for time-invariant covariates the two agree.
    """

    unit_id: str
    y0: float
    y1: float
    d1: int
    x0: np.ndarray
    x1: np.ndarray


@dataclass(frozen=True, eq=False)
class PanelDataset:
    """Validated two-period panel, stored column-wise for fast resampling.

    Parameters
    ----------
    covariate_names : tuple of str
        Ordered covariate identifiers.
    unit_ids : ndarray of object
        One id per unit.  Resampled datasets may repeat ids; estimators
        treat each stored pair of rows as its own cluster regardless.
    y0, y1 : ndarray
        Pre- and post-intervention responses.
    d1 : ndarray of int
        Post-intervention treatment indicator, 0 or 1.  Treatment at t=0
        is identically 0 and is not stored.
    x0, x1 : ndarray, shape (n, p)
        Covariate values at t=0 and t=1, columns aligned to
        ``covariate_names``.

    Notes
    -----
    ``time_varying_flags`` is derived, not declared: covariate j is flagged
    time-varying exactly when some unit has ``x0[i, j] != x1[i, j]``.
    All arrays are marked read-only after construction, so a dataset can be
    shared freely across bootstrap workers.
    """

    covariate_names: tuple
    unit_ids: np.ndarray
    y0: np.ndarray
    y1: np.ndarray
    d1: np.ndarray
    x0: np.ndarray
    x1: np.ndarray
    time_varying_flags: tuple = field(init=False)

    def __post_init__(self):
        names = tuple(str(c) for c in self.covariate_names)
        object.__setattr__(self, "covariate_names", names)
        # Copy everything: the arrays get frozen below and must not alias
        # (or flip the writeable flag of) caller-owned buffers.
        ids = np.array(self.unit_ids, dtype=object)
        y0 = np.array(self.y0, dtype=float)
        y1 = np.array(self.y1, dtype=float)
        d1 = np.array(self.d1)
        x0 = np.array(self.x0, dtype=float)
        x1 = np.array(self.x1, dtype=float)
        n = y0.shape[0]
        p = len(names)
        if not (ids.shape == (n,) and y1.shape == (n,) and d1.shape == (n,)):
            raise InvalidArgumentError("unit_ids, y0, y1 and d1 must all have length n")
        if x0.ndim != 2 or x0.shape != (n, p) or x1.shape != (n, p):
            raise InvalidArgumentError(
                f"covariate arrays must have shape ({n}, {p}); "
                f"got {x0.shape} and {x1.shape}"
            )
        if n == 0:
            raise InvalidArgumentError("dataset has no units")
        bad = (d1 != 0) & (d1 != 1)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise NonBinaryTreatmentError(
                f"treat must be 0 or 1; unit '{ids[i]}' has {d1[i]!r} at t=1"
            )
        d1 = d1.astype(np.int64)
        n_treated = int(d1.sum())
        if n_treated == 0 or n_treated == n:
            raise NoOverlapError(
                "need at least one treated and one control unit at t=1; "
                f"got {n_treated} treated of {n}"
            )
        for label, a in (("y", y0), ("y", y1), ("covariate", x0), ("covariate", x1)):
            if not np.all(np.isfinite(a)):
                raise MissingValueError(f"non-finite {label} value in dataset")
        flags = tuple(bool(np.any(x0[:, j] != x1[:, j])) for j in range(p))
        for name, a in (("unit_ids", ids), ("y0", y0), ("y1", y1),
                        ("d1", d1), ("x0", x0), ("x1", x1)):
            a.flags.writeable = False
            object.__setattr__(self, name, a)
        object.__setattr__(self, "time_varying_flags", flags)

    @property
    def n(self):
        return self.y0.shape[0]

    @property
    def n_treated(self):
        return int(self.d1.sum())

    @cached_property
    def units(self):
        """Materialize the per-unit record view (list of UnitRecord)."""
        return [
            UnitRecord(
                unit_id=str(self.unit_ids[i]),
                y0=float(self.y0[i]),
                y1=float(self.y1[i]),
                d1=int(self.d1[i]),
                x0=self.x0[i],
                x1=self.x1[i],
            )
            for i in range(self.n)
        ]

    def covariate_index(self, name):
        try:
            return self.covariate_names.index(name)
        except ValueError:
            raise UnknownCovariateError(
                f"unknown covariate '{name}'; dataset has {self.covariate_names}"
            ) from None

    def take(self, indices):
        """Return a new dataset holding units ``indices``, repeats allowed.

        This is the bootstrap resampling primitive: each drawn unit carries
        both of its rows.  Unit ids are copied as-is, so a resample can
        contain duplicates.
        """
        idx = np.asarray(indices, dtype=np.intp)
        return PanelDataset(
            covariate_names=self.covariate_names,
            unit_ids=self.unit_ids[idx],
            y0=self.y0[idx],
            y1=self.y1[idx],
            d1=self.d1[idx],
            x0=self.x0[idx],
            x1=self.x1[idx],
        )

    def value_equal(self, other):
        """Exact value comparison, used by round-trip tests."""
        return (
            self.covariate_names == other.covariate_names
            and bool(np.all(self.unit_ids == other.unit_ids))
            and np.array_equal(self.y0, other.y0)
            and np.array_equal(self.y1, other.y1)
            and np.array_equal(self.d1, other.d1)
            and np.array_equal(self.x0, other.x0)
            and np.array_equal(self.x1, other.x1)
        )


# ---------------------------------------------------------------------------
# model terms
# ---------------------------------------------------------------------------

_BARE_KINDS = {"intercept", "time", "treatment"}
_NAMED_KINDS = {"covariate", "cov_time", "cov_treat", "log"}
_RESERVED = {"1", "intercept", "time", "t", "treat", "d", "treatment"}


@dataclass(frozen=True)
class Term:
    """A single fixed-effect column: what it is, and which covariate if any."""

    kind: str
    name: str = None

    def __post_init__(self):
        if self.kind in _BARE_KINDS:
            if self.name is not None:
                raise InvalidTermError(f"term kind '{self.kind}' takes no covariate name")
        elif self.kind in _NAMED_KINDS:
            if not self.name:
                raise InvalidTermError(f"term kind '{self.kind}' needs a covariate name")
        else:
            raise InvalidTermError(f"unknown term kind '{self.kind}'")


def parse_term(text):
    """Parse one term string into a :class:`Term`.

    Accepted forms: ``1``/``intercept``, ``time``/``t``, ``treat``/``d``/
    ``treatment``, a bare covariate name, ``name:time``, ``name:treat``,
    and ``log(name)``.
    """
    s = str(text).strip()
    if not s:
        raise InvalidTermError("empty term string")
    low = s.lower()
    if low in ("1", "intercept"):
        return Term("intercept")
    if low in ("time", "t"):
        return Term("time")
    if low in ("treat", "d", "treatment"):
        return Term("treatment")
    if low.startswith("log(") and s.endswith(")"):
        name = s[4:-1].strip()
        bad = not name or name.lower() in _RESERVED or ":" in name
        if bad or "(" in name or ")" in name:
            raise InvalidTermError(f"cannot parse term '{text}'")
        return Term("log", name)
    if ":" in s:
        name, _, suffix = s.partition(":")
        name = name.strip()
        suffix = suffix.strip().lower()
        if not name or name.lower() in _RESERVED or name.startswith("log("):
            raise InvalidTermError(f"cannot parse term '{text}'")
        if suffix in ("time", "t"):
            return Term("cov_time", name)
        if suffix in ("treat", "d", "treatment"):
            return Term("cov_treat", name)
        raise InvalidTermError(f"cannot parse term '{text}': unknown interaction '{suffix}'")
    if "(" in s or ")" in s:
        raise InvalidTermError(f"cannot parse term '{text}'")
    return Term("covariate", s)


def term_label(term):
    """Canonical string form of a term (inverse of :func:`parse_term`)."""
    if term.kind == "intercept":
        return "1"
    if term.kind == "time":
        return "time"
    if term.kind == "treatment":
        return "treat"
    if term.kind == "covariate":
        return term.name
    if term.kind == "cov_time":
        return f"{term.name}:time"
    if term.kind == "cov_treat":
        return f"{term.name}:treat"
    return f"log({term.name})"


def _coerce_terms(terms):
    out = []
    for t in terms:
        out.append(t if isinstance(t, Term) else parse_term(t))
    return tuple(out)


_PS_ALLOWED = {"intercept", "covariate", "log"}


@dataclass(frozen=True)
class ModelSpec:
    """Declarative model: outcome terms, random effect, propensity terms.

    ``ps_terms`` describe the treatment-assignment model and may reference
    only pre-intervention covariate values, so time and treatment terms are
    rejected there.
    """

    outcome_terms: tuple = ()
    random_effect: str = "unit_intercept"
    ps_terms: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "outcome_terms", _coerce_terms(self.outcome_terms))
        object.__setattr__(self, "ps_terms", _coerce_terms(self.ps_terms))
        if self.random_effect not in ("none", "unit_intercept"):
            raise InvalidArgumentError(
                f"random_effect must be 'none' or 'unit_intercept', got {self.random_effect!r}"
            )
        for t in self.ps_terms:
            if t.kind not in _PS_ALLOWED:
                raise InvalidTermError(
                    f"ps_terms may not contain '{term_label(t)}': the treatment model "
                    "is a function of pre-intervention covariates only"
                )

    def to_dict(self):
        return {
            "outcome_terms": [term_label(t) for t in self.outcome_terms],
            "random_effect": self.random_effect,
            "ps_terms": [term_label(t) for t in self.ps_terms],
        }

    @classmethod
    def from_dict(cls, d):
        extra = set(d) - {"outcome_terms", "random_effect", "ps_terms"}
        if extra:
            raise InvalidArgumentError(f"unknown model spec fields: {sorted(extra)}")
        return cls(
            outcome_terms=tuple(d.get("outcome_terms", ())),
            random_effect=d.get("random_effect", "unit_intercept"),
            ps_terms=tuple(d.get("ps_terms", ())),
        )


# ---------------------------------------------------------------------------
# design construction
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DesignMatrices:
    """Design matrix bundle for one term list on one dataset.

    ``X`` is the 2n-row stacked matrix (rows unit-major, t=0 then t=1) when
    ``stacked`` is true, else the n-row post-period matrix with observed
    treatment.  ``cf_treated`` and ``cf_control`` are always the post-period
    designs with the treatment column (and every treatment interaction)
    forced to 1 and to 0.
    """

    columns: tuple
    X: np.ndarray
    stacked: bool
    cf_treated: np.ndarray
    cf_control: np.ndarray


def _covariate_at(data, name, t):
    j = data.covariate_index(name)
    return data.x1[:, j] if t == 1 else data.x0[:, j]


def _term_column(term, data, t, d):
    n = data.n
    if term.kind == "intercept":
        return np.ones(n)
    if term.kind == "time":
        return np.full(n, float(t))
    if term.kind == "treatment":
        return np.asarray(d, dtype=float)
    if term.kind == "covariate":
        return _covariate_at(data, term.name, t)
    if term.kind == "cov_time":
        if t == 0:
            return np.zeros(n)
        return _covariate_at(data, term.name, 1)
    if term.kind == "cov_treat":
        return _covariate_at(data, term.name, t) * d
    # log transform
    x = _covariate_at(data, term.name, t)
    if np.any(x <= 0.0):
        raise NonPositiveLogError(
            f"log({term.name}) requested but {term.name} has non-positive values"
        )
    return np.log(x)


def _matrix(terms, data, t, d):
    return np.column_stack([_term_column(tm, data, t, d) for tm in terms])


def build_design(data, spec, stacked):
    """Materialize design matrices for ``spec.outcome_terms`` on ``data``.

    Parameters
    ----------
    data : PanelDataset
    spec : ModelSpec or sequence of terms
        Only the outcome terms are used here; see :func:`ps_design` for the
        treatment model.
    stacked : bool
        True for the 2n-row design used in mixed-model fitting, False for
        the n-row post-period design.

    Returns
    -------
    DesignMatrices

    Raises
    ------
    UnknownCovariateError
        A term references a covariate the dataset does not have.
    NonPositiveLogError
        A log term hits a non-positive covariate value.
    """
    terms = spec.outcome_terms if isinstance(spec, ModelSpec) else _coerce_terms(spec)
    if not terms:
        raise InvalidTermError("outcome term list is empty")
    n = data.n
    d_obs = data.d1.astype(float)
    ones = np.ones(n)
    zeros = np.zeros(n)
    cf_treated = _matrix(terms, data, 1, ones)
    cf_control = _matrix(terms, data, 1, zeros)
    if stacked:
        r0 = _matrix(terms, data, 0, zeros)
        r1 = _matrix(terms, data, 1, d_obs)
        X = np.empty((2 * n, len(terms)))
        X[0::2] = r0
        X[1::2] = r1
    else:
        X = _matrix(terms, data, 1, d_obs)
    return DesignMatrices(
        columns=tuple(term_label(t) for t in terms),
        X=X,
        stacked=bool(stacked),
        cf_treated=cf_treated,
        cf_control=cf_control,
    )


def ps_design(data, spec):
    """Build the treatment-model design from pre-intervention covariates.

    Returns ``(matrix, column_labels)``; the matrix has one row per unit and
    evaluates every term at its t=0 value.
    """
    terms = spec.ps_terms if isinstance(spec, ModelSpec) else _coerce_terms(spec)
    if not terms:
        raise InvalidTermError("propensity term list is empty")
    cols = []
    for tm in terms:
        if tm.kind not in _PS_ALLOWED:
            raise InvalidTermError(
                f"'{term_label(tm)}' is not allowed in a propensity model"
            )
        cols.append(_term_column(tm, data, 0, None))
    return np.column_stack(cols), tuple(term_label(t) for t in terms)


def stacked_response(data):
    """Responses interleaved to match the stacked design row order."""
    y = np.empty(2 * data.n)
    y[0::2] = data.y0
    y[1::2] = data.y1
    return y


def stacked_cluster_ids(data):
    """Cluster labels (0..n-1, repeated twice) matching the stacked rows."""
    return np.repeat(np.arange(data.n), 2)


# ---------------------------------------------------------------------------
# CSV I/O
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ColumnMapping:
    """Column names for :func:`load_csv`, and optional declarations.

    ``covariates=None`` means every column beyond the four required ones is
    a covariate, in file order.  Covariates listed in ``time_invariant`` are
    expected to be constant within unit; if the data disagree the covariate
    is downgraded to time-varying with a warning rather than an error.
    """

    unit_id: str = "unit_id"
    time: str = "time"
    treat: str = "treat"
    y: str = "y"
    covariates: tuple = None
    time_invariant: tuple = ()


def _parse_01(raw, what, unit, exc):
    s = str(raw).strip()
    if s in ("0", "1"):
        return int(s)
    try:
        v = float(s)
    except ValueError:
        raise exc(f"{what} for unit '{unit}' is {raw!r}, expected 0 or 1") from None
    if v == 0.0 or v == 1.0:
        return int(v)
    raise exc(f"{what} for unit '{unit}' is {raw!r}, expected 0 or 1")


def _parse_float(raw, column, unit):
    s = "" if raw is None else str(raw).strip()
    if s == "" or s.lower() in ("na", "nan"):
        raise MissingValueError(f"missing value in column '{column}' for unit '{unit}'")
    try:
        v = float(s)
    except ValueError:
        raise MalformedValueError(
            f"cannot parse column '{column}' value {raw!r} for unit '{unit}'"
        ) from None
    if not np.isfinite(v):
        raise MissingValueError(f"non-finite value in column '{column}' for unit '{unit}'")
    return v


def load_csv(path, schema=None):
    """Load and validate a long-format two-period panel CSV.

    The file must have a header row with the ``unit_id``, ``time``,
    ``treat`` and ``y`` columns (names configurable through ``schema``);
    every other column is read as a covariate unless ``schema.covariates``
    narrows the list.  Rows are normalized to (unit, time) sorted order.

    Parameters
    ----------
    path : str or path-like
    schema : ColumnMapping, optional

    Returns
    -------
    PanelDataset

    Raises
    ------
    MissingRowError, NonBinaryTreatmentError, TreatedAtBaselineError,
    MissingValueError, MalformedValueError, NoOverlapError
    """
    schema = schema or ColumnMapping()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise MalformedValueError(f"{path}: empty file, header row required")
        header = [h.strip() for h in reader.fieldnames]
        required = (schema.unit_id, schema.time, schema.treat, schema.y)
        for col in required:
            if col not in header:
                raise MissingValueError(f"{path}: required column '{col}' not found")
        if schema.covariates is None:
            cov_names = tuple(h for h in header if h not in required)
        else:
            cov_names = tuple(schema.covariates)
            for col in cov_names:
                if col not in header:
                    raise MissingValueError(f"{path}: covariate column '{col}' not found")
        rows = {}
        for lineno, raw in enumerate(reader, start=2):
            unit = str(raw.get(schema.unit_id, "") or "").strip()
            if not unit:
                raise MissingValueError(f"{path}:{lineno}: missing unit_id")
            t = _parse_01(raw.get(schema.time), "time", unit, MalformedValueError)
            d = _parse_01(raw.get(schema.treat), "treat", unit, NonBinaryTreatmentError)
            y = _parse_float(raw.get(schema.y), schema.y, unit)
            x = [_parse_float(raw.get(c), c, unit) for c in cov_names]
            key = (unit, t)
            if key in rows:
                raise MalformedValueError(
                    f"{path}: duplicate row for unit '{unit}' at time {t}"
                )
            rows[key] = (d, y, x)
    units = sorted({u for (u, _) in rows})
    if not units:
        raise MalformedValueError(f"{path}: no data rows")
    ids, y0, y1, d1, x0, x1 = [], [], [], [], [], []
    for unit in units:
        pre = rows.get((unit, 0))
        post = rows.get((unit, 1))
        if pre is None or post is None:
            missing = "t=0" if pre is None else "t=1"
            raise MissingRowError(f"unit '{unit}' lacks its {missing} row")
        if pre[0] != 0:
            raise TreatedAtBaselineError(f"unit '{unit}' has treat=1 at t=0")
        ids.append(unit)
        y0.append(pre[1])
        y1.append(post[1])
        d1.append(post[0])
        x0.append(pre[2])
        x1.append(post[2])
    data = PanelDataset(
        covariate_names=cov_names,
        unit_ids=np.array(ids, dtype=object),
        y0=np.array(y0),
        y1=np.array(y1),
        d1=np.array(d1),
        x0=np.array(x0, dtype=float).reshape(len(ids), len(cov_names)),
        x1=np.array(x1, dtype=float).reshape(len(ids), len(cov_names)),
    )
    for name in schema.time_invariant:
        if name not in cov_names:
            raise MissingValueError(f"declared time-invariant column '{name}' not found")
        if data.time_varying_flags[cov_names.index(name)]:
            warnings.warn(
                f"covariate '{name}' was declared time-invariant but differs across "
                "periods for some unit; treating it as time-varying",
                TimeVaryingDowngradeWarning,
                stacklevel=2,
            )
    return data


def write_csv(data, path, schema=None):
    """Write ``data`` in the normalized long format ``load_csv`` reads.

    Rows come out (unit, time) sorted in the dataset's stored order, floats
    in shortest round-trip form, so load/write/load is value-identical.
    """
    schema = schema or ColumnMapping()
    header = [schema.unit_id, schema.time, schema.treat, schema.y, *data.covariate_names]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(data.n):
            uid = str(data.unit_ids[i])
            writer.writerow(
                [uid, 0, 0, repr(float(data.y0[i]))]
                + [repr(float(v)) for v in data.x0[i]]
            )
            writer.writerow(
                [uid, 1, int(data.d1[i]), repr(float(data.y1[i]))]
                + [repr(float(v)) for v in data.x1[i]]
            )
