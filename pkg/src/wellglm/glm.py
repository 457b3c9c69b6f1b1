"""Normal-identity and Poisson-log regression on a design matrix.

Both fits go through :func:`wellglm.linalg.weighted_least_squares`: OLS
once with unit weights, Poisson through iteratively reweighted least
squares.  Effects are ranked by LogWorth, ``-log10(p)``, of per-coefficient
two-sided Wald tests.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.special import gammaln, log_ndtr

from .errors import (
    DegenerateDesignError,
    DivergenceError,
    DomainError,
    EmptyDatasetError,
    ParseError,
    ShapeError,
    ValidationError,
)
from .features import DesignMatrix, FeatureSpec, Term, expand, term_label
from .linalg import weighted_least_squares

NORMAL = "normal_identity"
POISSON = "poisson_log"
FAMILIES = (NORMAL, POISSON)

FORMAT_NAME = "wellglm-model"
FORMAT_VERSION = 1

IRLS_TOL = 1e-8
IRLS_MAX_ITER = 100
ETA_CAP = 30.0
INIT_FLOOR = 1e-8


@dataclass(frozen=True)
class Family:
    kind: str

    def __post_init__(self):
        if self.kind not in FAMILIES:
            raise ValidationError(f"unknown family {self.kind!r}")

    def inverse_link(self, eta: np.ndarray) -> np.ndarray:
        if self.kind == NORMAL:
            return eta
        with np.errstate(over="ignore"):
            return np.exp(eta)


NormalIdentity = Family(NORMAL)
PoissonLog = Family(POISSON)


@dataclass(frozen=True, eq=False)
class FittedModel:
    family: Family
    spec: FeatureSpec
    beta: np.ndarray
    covariance: np.ndarray
    n_obs: int
    dispersion: float
    converged: bool
    iterations: int
    log_likelihood: float
    aliased: tuple[int, ...] = ()
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def terms(self) -> list[Term]:
        return self.spec.terms

    @property
    def term_labels(self) -> list[str]:
        return self.spec.labels

    @property
    def std_errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def linear_predictor(self, temps: np.ndarray) -> np.ndarray:
        return expand(temps, self.spec).values @ self.beta


@dataclass(frozen=True)
class EffectEntry:
    term: Term
    label: str
    estimate: float
    std_error: float
    p_value: float
    log_worth: float
    status: str = "ok"  # "ok", "aliased" or "degenerate"


def _check_design(D: DesignMatrix, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(D.values, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.shape[0] != y.shape[0]:
        raise ShapeError(f"design has {X.shape[0]} rows but response has {y.shape[0]}")
    if y.shape[0] == 0:
        raise EmptyDatasetError("no observations to fit")
    if not np.all(np.isfinite(y)):
        raise DomainError("response contains non-finite values")
    if D.spec is None:
        raise ValidationError("design matrix carries no feature spec")
    return X, y


def fit_ols(D: DesignMatrix, y: np.ndarray) -> FittedModel:
    """Least-squares fit of the Normal-identity model.

    Dispersion is the unbiased ``SSE / (n - m_retained)``; with no residual
    degrees of freedom it is reported as 0.
    """
    X, y = _check_design(D, y)
    n = y.shape[0]
    if n < 2:
        raise EmptyDatasetError("OLS needs at least 2 observations")
    sol = weighted_least_squares(X, y)
    if not sol.retained_columns:
        raise DegenerateDesignError("every design column was aliased")
    beta = sol.coefficients
    resid = y - X @ beta
    sse = float(resid @ resid)
    df = n - len(sol.retained_columns)
    dispersion = sse / df if df > 0 else 0.0
    sigma2_mle = sse / n
    if sigma2_mle > 0:
        loglik = -0.5 * n * (math.log(2 * math.pi * sigma2_mle) + 1.0)
    else:
        loglik = math.inf
    return FittedModel(
        family=NormalIdentity,
        spec=D.spec,
        beta=beta,
        covariance=dispersion * sol.full_inverse(),
        n_obs=n,
        dispersion=dispersion,
        converged=True,
        iterations=1,
        log_likelihood=loglik,
        aliased=sol.dropped_columns,
    )


def poisson_loglik(y: np.ndarray, eta: np.ndarray) -> float:
    with np.errstate(over="ignore"):
        return float(np.sum(y * eta - np.exp(eta) - gammaln(y + 1.0)))


def fit_poisson_irls(
    D: DesignMatrix,
    y: np.ndarray,
    tol: float = IRLS_TOL,
    max_iter: int = IRLS_MAX_ITER,
) -> FittedModel:
    """Maximum-likelihood Poisson regression with log link by IRLS.

    Each iteration solves a weighted least-squares problem with weights
    ``mu = exp(eta)`` and working response ``eta + (y - mu) / mu``.  A step
    that lowers the log-likelihood is halved until it does not.  Iteration
    stops when the largest coefficient change is below ``tol``; hitting
    ``max_iter`` first returns the model with ``converged=False``.

    An all-zero response has no finite maximizer and raises
    :class:`DivergenceError`, as does a fit whose linear predictor is still
    pinned at the overflow guard when iteration stops.
    """
    X, y = _check_design(D, y)
    if np.any(y < 0):
        row = int(np.flatnonzero(y < 0)[0])
        raise DomainError(f"Poisson response must be non-negative (row {row} is {y[row]})")
    if not np.any(y > 0):
        raise DivergenceError("all responses are zero; the Poisson MLE lies at the boundary mean 0")

    m = X.shape[1]
    beta = np.zeros(m)
    beta[0] = math.log(max(float(y.mean()), INIT_FLOOR))
    eta = X @ beta
    loglik = poisson_loglik(y, eta)
    converged = False
    iterations = 0
    sol = None
    for iterations in range(1, max_iter + 1):
        eta_c = np.clip(eta, -ETA_CAP, ETA_CAP)
        mu = np.exp(eta_c)
        z = eta_c + (y - mu) / mu
        sol = weighted_least_squares(X, z, mu)
        step = sol.coefficients - beta
        for _ in range(40):
            candidate = beta + step
            eta_new = X @ candidate
            ll_new = poisson_loglik(y, eta_new)
            if np.isfinite(ll_new) and ll_new >= loglik - 1e-12 * abs(loglik):
                break
            step *= 0.5
        beta, eta, loglik = candidate, eta_new, ll_new
        if np.max(np.abs(step)) < tol:
            converged = True
            break

    if np.max(eta) > ETA_CAP:
        row = int(np.argmax(eta))
        raise DivergenceError(
            f"linear predictor {eta[row]:.3g} exceeds overflow guard {ETA_CAP} at row {row}", row=row
        )
    mu = np.exp(eta)
    final = weighted_least_squares(X, eta, mu)
    if not final.retained_columns:
        raise DegenerateDesignError("every design column was aliased")
    beta[list(final.dropped_columns)] = 0.0
    return FittedModel(
        family=PoissonLog,
        spec=D.spec,
        beta=beta,
        covariance=final.full_inverse(),
        n_obs=int(y.shape[0]),
        dispersion=1.0,
        converged=converged,
        iterations=iterations,
        log_likelihood=poisson_loglik(y, X @ beta),
        aliased=final.dropped_columns,
    )


def fit(D: DesignMatrix, y: np.ndarray, family: Family | str) -> FittedModel:
    kind = family.kind if isinstance(family, Family) else family
    if kind == NORMAL:
        return fit_ols(D, y)
    if kind == POISSON:
        return fit_poisson_irls(D, y)
    raise ValidationError(f"unknown family {kind!r}")


def predict(model: FittedModel, temps: np.ndarray) -> np.ndarray:
    """Mean response at new temperatures, reusing the model's centering means."""
    return model.family.inverse_link(model.linear_predictor(temps))


def log_worth(p_value: float) -> float:
    return -math.log10(p_value)


def _wald_log_p(z: float) -> float:
    """Natural log of the two-sided standard-normal tail probability of ``z``."""
    return min(0.0, math.log(2.0) + float(log_ndtr(-abs(z))))


def wald_effects(model: FittedModel) -> list[EffectEntry]:
    """Per-term Wald tests ranked by descending LogWorth.

    Every non-intercept term appears once.  Aliased terms carry p = 1 and
    LogWorth 0; terms with a zero or non-finite standard error are marked
    degenerate and placed after the ranked entries.  The log tail is
    evaluated directly so LogWorth stays finite far past the underflow of
    the p-value itself.
    """
    se = model.std_errors
    labels = model.term_labels
    aliased = set(model.aliased)
    ranked, degenerate = [], []
    for idx, term in enumerate(model.terms):
        if idx == 0:
            continue
        est = float(model.beta[idx])
        if idx in aliased:
            ranked.append(EffectEntry(term, labels[idx], est, 0.0, 1.0, 0.0, "aliased"))
            continue
        s = float(se[idx])
        if not (np.isfinite(s) and s > 0):
            degenerate.append(EffectEntry(term, labels[idx], est, s, math.nan, math.nan, "degenerate"))
            continue
        log_p = _wald_log_p(est / s)
        lw = -log_p / math.log(10.0) + 0.0
        ranked.append(EffectEntry(term, labels[idx], est, s, math.exp(log_p), lw))
    ranked.sort(key=lambda e: (-e.log_worth, e.label))
    return ranked + sorted(degenerate, key=lambda e: e.label)


# -- model documents ---------------------------------------------------------


def serialize_model(model: FittedModel) -> dict[str, Any]:
    spec = model.spec
    return {
        "format": FORMAT_NAME,
        "format_version": FORMAT_VERSION,
        "family": model.family.kind,
        "feature_spec": {
            "degree": spec.degree,
            "predictor_labels": list(spec.predictor_labels),
            "centering_means": None if spec.centering_means is None else list(spec.centering_means),
        },
        "terms": [t.to_list() for t in spec.terms],
        "term_labels": spec.labels,
        "beta": [float(b) for b in model.beta],
        "covariance": [float(c) for c in np.asarray(model.covariance).ravel()],
        "aliased": list(model.aliased),
        "n_obs": model.n_obs,
        "dispersion": float(model.dispersion),
        "convergence": {"converged": bool(model.converged), "iterations": int(model.iterations)},
        "log_likelihood": float(model.log_likelihood),
        "residual_sigma_estimator": "mle",
        "meta": dict(model.meta),
    }


def _require(doc: dict, key: str, where: str = "") -> Any:
    if key not in doc:
        raise ParseError(f"missing field {key!r}", where + key)
    return doc[key]


def deserialize_model(doc: dict[str, Any]) -> FittedModel:
    if not isinstance(doc, dict):
        raise ParseError("model document must be an object", "$")
    if doc.get("format") != FORMAT_NAME:
        raise ParseError(f"not a {FORMAT_NAME} document", "format")
    version = _require(doc, "format_version")
    if version != FORMAT_VERSION:
        raise ParseError(f"unsupported format version {version!r}", "format_version")
    kind = _require(doc, "family")
    if kind not in FAMILIES:
        raise ParseError(f"unknown family tag {kind!r}", "family")
    fs = _require(doc, "feature_spec")
    degree = _require(fs, "degree", "feature_spec.")
    labels = _require(fs, "predictor_labels", "feature_spec.")
    means = fs.get("centering_means")
    if degree == 2 and means is None:
        raise ValidationError("degree-2 feature spec is missing centering means", "feature_spec.centering_means")
    try:
        spec = FeatureSpec(int(degree), tuple(labels), None if means is None else tuple(means))
    except ValidationError as exc:
        raise ValidationError(str(exc), "feature_spec") from None
    m = len(spec.terms)
    terms = [Term.from_list(t) for t in _require(doc, "terms")]
    if terms != spec.terms:
        raise ValidationError("term list does not match the feature spec", "terms")
    beta = np.asarray(_require(doc, "beta"), dtype=float)
    if beta.shape != (m,):
        raise ValidationError(f"expected {m} coefficients, got {beta.size}", "beta")
    cov = np.asarray(_require(doc, "covariance"), dtype=float)
    if cov.size != m * m:
        raise ValidationError(f"expected {m * m} covariance entries, got {cov.size}", "covariance")
    conv = _require(doc, "convergence")
    return FittedModel(
        family=Family(kind),
        spec=spec,
        beta=beta,
        covariance=cov.reshape(m, m),
        n_obs=int(_require(doc, "n_obs")),
        dispersion=float(_require(doc, "dispersion")),
        converged=bool(_require(conv, "converged", "convergence.")),
        iterations=int(_require(conv, "iterations", "convergence.")),
        log_likelihood=float(_require(doc, "log_likelihood")),
        aliased=tuple(int(i) for i in doc.get("aliased", [])),
        meta=dict(doc.get("meta", {})),
    )


def dumps_model(model: FittedModel, header: dict[str, Any] | None = None) -> str:
    doc = serialize_model(model)
    if header:
        doc = {"header": header, **doc}
    return json.dumps(doc, indent=1) + "\n"


def loads_model(text: str) -> FittedModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"line {exc.lineno} column {exc.colno}") from None
    return deserialize_model(doc)
