"""Cox proportional-hazards regression.

The Breslow partial likelihood is maximised by Newton-Raphson with step
halving. Only coefficients and hazard ratios are estimated; the baseline
hazard is never needed.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateCovariateError,
    DivergenceError,
    InvalidInputError,
    NoEventsError,
)
from .survival import Cohort

GRADIENT_TOL = 1e-8
MAX_ITER = 50
MAX_HALVINGS = 20
DIVERGENCE_BOUND = 50.0


@dataclass(frozen=True)
class CovariateSpec:
    names: tuple[str, ...]

    def __post_init__(self):
        names = tuple(self.names)
        object.__setattr__(self, "names", names)
        if not names:
            raise InvalidInputError("at least one covariate name required")
        if len(set(names)) != len(names):
            raise InvalidInputError(f"covariate names not unique: {list(names)}")

    @classmethod
    def default(cls, p: int) -> "CovariateSpec":
        return cls(tuple(f"x{i + 1}" for i in range(p)))


@dataclass(frozen=True)
class CoxFit:
    coefficients: list[float]
    hazard_ratios: list[float]
    standard_errors: list[float]
    log_partial_likelihood: float
    iterations: int
    converged: bool

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


class _Design:
    """Cohort arrays sorted by time with tie-group bookkeeping."""

    def __init__(self, cohort: Cohort):
        times = np.array([s.observed_time for s in cohort.subjects], dtype=float)
        order = np.argsort(times, kind="stable")
        self.times = times[order]
        self.events = np.array([s.event for s in cohort.subjects], dtype=bool)[order]
        self.x = np.array([s.covariates for s in cohort.subjects], dtype=float).reshape(len(times), -1)[order]
        # first index of each subject's tie group: the risk set for a death at
        # times[i] is every row from first[i] onwards
        self.first = np.searchsorted(self.times, self.times, side="left")

    @property
    def p(self) -> int:
        return self.x.shape[1]


def _objective(design: _Design, w: np.ndarray, hessian: bool = True):
    x = design.x
    eta = x @ w
    shift = eta.max()
    r = np.exp(eta - shift)
    # reverse cumulative sums give risk-set totals for each starting row
    s0 = np.cumsum(r[::-1])[::-1]
    s1 = np.cumsum((r[:, None] * x)[::-1], axis=0)[::-1]

    dead = np.flatnonzero(design.events)
    start = design.first[dead]
    s0d = s0[start]
    mean = s1[start] / s0d[:, None]
    loglik = float(np.sum(eta[dead] - shift - np.log(s0d)))
    grad = np.sum(x[dead] - mean, axis=0)
    if not hessian:
        return loglik, grad, None
    outer = r[:, None, None] * x[:, :, None] * x[:, None, :]
    s2 = np.cumsum(outer[::-1], axis=0)[::-1]
    second = s2[start] / s0d[:, None, None]
    info = np.sum(second - mean[:, :, None] * mean[:, None, :], axis=0)
    return loglik, grad, info


def _check_width(cohort: Cohort, p: int):
    if cohort.n_covariates != p:
        raise InvalidInputError(f"expected {cohort.n_covariates} coefficients, got {p}")


def partial_loglik_and_gradient(cohort: Cohort, coefficients: Sequence[float]) -> tuple[float, list[float]]:
    """Breslow partial log-likelihood and its analytic gradient."""
    w = np.asarray(coefficients, dtype=float).reshape(-1)
    _check_width(cohort, len(w))
    if not cohort.subjects:
        raise InvalidInputError("empty cohort")
    loglik, grad, _ = _objective(_Design(cohort), w, hessian=False)
    return loglik, grad.tolist()


def observed_information(cohort: Cohort, coefficients: Sequence[float]) -> np.ndarray:
    w = np.asarray(coefficients, dtype=float).reshape(-1)
    _check_width(cohort, len(w))
    return _objective(_Design(cohort), w)[2]


def cox_fit(cohort: Cohort, spec: CovariateSpec | None = None) -> CoxFit:
    if spec is None:
        spec = CovariateSpec.default(cohort.n_covariates)
    p = len(spec.names)
    _check_width(cohort, p)
    if cohort.n_events == 0:
        raise NoEventsError(f"cohort {cohort.label!r} has no observed deaths")

    design = _Design(cohort)
    for k, name in enumerate(spec.names):
        column = design.x[:, k]
        if np.all(column == column[0]):
            raise DegenerateCovariateError(f"covariate {name!r} has zero variance")

    w = np.zeros(p)
    loglik, grad, info = _objective(design, w)
    converged = False
    iterations = 0
    while iterations < MAX_ITER:
        _require_finite(loglik, grad, info, w, spec)
        try:
            step = np.linalg.solve(info, grad)
            np.linalg.cholesky(info)
        except np.linalg.LinAlgError:
            raise _divergence(w, spec, "information matrix is singular") from None
        if np.linalg.norm(grad) < GRADIENT_TOL and np.max(np.abs(step)) < 1e-6:
            converged = True
            break

        iterations += 1
        scale = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = w + scale * step
            if np.any(np.abs(trial) > DIVERGENCE_BOUND):
                raise _divergence(trial, spec, "coefficient exceeded divergence bound")
            new_loglik, new_grad, new_info = _objective(design, trial)
            # a tiny slack absorbs rounding noise at the optimum
            if math.isfinite(new_loglik) and new_loglik >= loglik - 1e-12 * max(1.0, abs(loglik)):
                break
            scale /= 2
        else:
            break
        w, loglik, grad, info = trial, new_loglik, new_grad, new_info
    else:
        _require_finite(loglik, grad, info, w, spec)
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError:
            raise _divergence(w, spec, "information matrix is singular") from None
        converged = np.linalg.norm(grad) < GRADIENT_TOL and np.max(np.abs(step)) < 1e-6

    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        raise _divergence(w, spec, "information matrix is singular") from None
    se = np.sqrt(np.diag(cov))
    return CoxFit(
        coefficients=w.tolist(),
        hazard_ratios=np.exp(w).tolist(),
        standard_errors=se.tolist(),
        log_partial_likelihood=loglik,
        iterations=iterations,
        converged=bool(converged),
    )


def _require_finite(loglik, grad, info, w, spec):
    if not (math.isfinite(loglik) and np.all(np.isfinite(grad)) and np.all(np.isfinite(info))):
        raise _divergence(w, spec, "non-finite partial likelihood")


def _divergence(w: np.ndarray, spec: CovariateSpec, reason: str) -> DivergenceError:
    k = int(np.argmax(np.abs(w)))
    name = spec.names[k]
    return DivergenceError(
        f"{reason} (monotone likelihood); offending covariate {name!r} at w={w[k]:.3g}",
        covariate=name,
    )
