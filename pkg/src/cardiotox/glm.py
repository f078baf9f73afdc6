"""Maximum-likelihood logistic regression with Wald inference.

Fitting is Newton-type iteratively reweighted least squares with step-halving
when the deviance would increase. Standard errors come from the inverse
observed information at the optimum. Backward elimination repeatedly drops the
least significant predictor until everything left clears the stay threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateOutcomeError,
    DimensionMismatchError,
    NotConvergedError,
    SeparationError,
    SingularInformationError,
    ZeroSeError,
)
from .preprocess import FeatureMatrix
from .tableio import write_csv

MAX_ITERATIONS = 100
BETA_TOL = 1e-8
DEVIANCE_TOL = 1e-10
SINGULAR_RTOL = 1e-12
SEPARATION_PROB_EPS = 1e-10
SEPARATION_BETA_BOUND = 20.0
MAX_STEP_HALVINGS = 20

# Smallest positive probability reported; keeps predictions inside (0, 1).
_PROB_FLOOR = 5e-324
_PROB_CEIL = 1.0 - 2.0**-53


@dataclass(frozen=True)
class LogisticModel:
    column_names: tuple[str, ...]
    beta: np.ndarray
    se: np.ndarray
    covariance: np.ndarray
    log_likelihood: float
    iterations: int
    converged: bool
    n: int
    ridge: float = 0.0


@dataclass(frozen=True)
class EliminationTrace:
    steps: tuple[tuple[str, float], ...]
    final_model: LogisticModel


def sigmoid(eta: np.ndarray | float) -> np.ndarray | float:
    """Numerically stable standard logistic function."""
    eta = np.asarray(eta, dtype=np.float64)
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    exp_eta = np.exp(eta[~pos])
    out[~pos] = exp_eta / (1.0 + exp_eta)
    return out


def _log_likelihood(eta: np.ndarray, y: np.ndarray) -> float:
    # y*eta - log(1 + exp(eta)), evaluated stably
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def find_collinear_columns(X: np.ndarray, names: tuple[str, ...]) -> tuple[str, ...]:
    """Columns linearly dependent on the columns before them."""
    offenders = []
    rank = 0
    for j in range(X.shape[1]):
        new_rank = np.linalg.matrix_rank(X[:, : j + 1])
        if new_rank == rank:
            offenders.append(names[j])
        rank = new_rank
    return tuple(offenders)


def fit_logistic(
    fm: FeatureMatrix, *, ridge: float = 0.0, start: np.ndarray | None = None
) -> LogisticModel:
    """Fit by IRLS; raises instead of returning a bad model.

    ``ridge`` adds a diagnostic penalty to the information matrix when
    chasing near-collinearity and is never applied implicitly. ``start``
    warm-starts the iteration (used by resampling loops); the optimum does
    not depend on it.
    """
    X, y = fm.X, fm.y
    n, p = X.shape
    if n <= p:
        raise SingularInformationError(
            f"n={n} rows cannot identify {p} coefficients",
            find_collinear_columns(X, fm.column_names),
        )
    positives = float(np.sum(y))
    if positives == 0.0 or positives == float(n):
        raise DegenerateOutcomeError("outcome has a single class")

    beta = np.zeros(p) if start is None else np.asarray(start, dtype=np.float64).copy()
    if beta.shape != (p,):
        raise DimensionMismatchError(f"start vector has shape {beta.shape}, expected ({p},)")

    eta = X @ beta
    ll = _log_likelihood(eta, y)
    converged = False
    iterations = 0

    for iterations in range(1, MAX_ITERATIONS + 1):
        prob = sigmoid(eta)
        if np.any((prob < SEPARATION_PROB_EPS) | (prob > 1.0 - SEPARATION_PROB_EPS)):
            if np.max(np.abs(beta)) > SEPARATION_BETA_BOUND:
                raise SeparationError(
                    "fitted probabilities pinned at 0/1 with diverging coefficients"
                )
        weights = prob * (1.0 - prob)
        info = (X * weights[:, None]).T @ X
        if ridge > 0.0:
            info = info + ridge * np.eye(p)
        score = X.T @ (y - prob)
        delta = _solve_information(info, score, X, fm.column_names)

        step = 1.0
        new_beta = beta + delta
        new_eta = X @ new_beta
        new_ll = _log_likelihood(new_eta, y)
        halvings = 0
        while (not math.isfinite(new_ll) or new_ll < ll) and halvings < MAX_STEP_HALVINGS:
            step *= 0.5
            halvings += 1
            new_beta = beta + step * delta
            new_eta = X @ new_beta
            new_ll = _log_likelihood(new_eta, y)

        beta_change = float(np.max(np.abs(new_beta - beta)))
        dev_change = abs(-2.0 * new_ll - (-2.0 * ll)) / (abs(-2.0 * ll) + 1.0)
        beta, eta, ll = new_beta, new_eta, new_ll
        if beta_change < BETA_TOL or dev_change < DEVIANCE_TOL:
            converged = True
            break

    if not converged:
        raise NotConvergedError(f"no convergence after {MAX_ITERATIONS} iterations")

    prob = sigmoid(eta)
    if np.any((prob < SEPARATION_PROB_EPS) | (prob > 1.0 - SEPARATION_PROB_EPS)):
        if np.max(np.abs(beta)) > SEPARATION_BETA_BOUND:
            raise SeparationError(
                "fitted probabilities pinned at 0/1 with diverging coefficients"
            )
    weights = prob * (1.0 - prob)
    info = (X * weights[:, None]).T @ X
    if ridge > 0.0:
        info = info + ridge * np.eye(p)
    covariance = _invert_information(info, X, fm.column_names)

    return LogisticModel(
        column_names=fm.column_names,
        beta=beta,
        se=np.sqrt(np.diag(covariance)),
        covariance=covariance,
        log_likelihood=ll,
        iterations=iterations,
        converged=True,
        n=n,
        ridge=ridge,
    )


def _check_conditioning(info: np.ndarray, X: np.ndarray, names: tuple[str, ...]) -> None:
    eigvals = np.linalg.eigvalsh(info)
    if eigvals[-1] <= 0.0 or eigvals[0] <= eigvals[-1] * SINGULAR_RTOL:
        raise SingularInformationError(
            "information matrix is singular at working tolerance",
            find_collinear_columns(X, names),
        )


def _solve_information(
    info: np.ndarray, rhs: np.ndarray, X: np.ndarray, names: tuple[str, ...]
) -> np.ndarray:
    try:
        chol = np.linalg.cholesky(info)
    except np.linalg.LinAlgError:
        raise SingularInformationError(
            "information matrix is not positive definite",
            find_collinear_columns(X, names),
        ) from None
    _check_conditioning(info, X, names)
    z = np.linalg.solve(chol, rhs)
    return np.linalg.solve(chol.T, z)


def _invert_information(info: np.ndarray, X: np.ndarray, names: tuple[str, ...]) -> np.ndarray:
    try:
        np.linalg.cholesky(info)
    except np.linalg.LinAlgError:
        raise SingularInformationError(
            "information matrix is not positive definite",
            find_collinear_columns(X, names),
        ) from None
    _check_conditioning(info, X, names)
    cov = np.linalg.inv(info)
    return (cov + cov.T) / 2.0


def predict_prob(model: LogisticModel, x: np.ndarray) -> float:
    """Event probability for one feature row, clipped inside (0, 1)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != model.beta.shape:
        raise DimensionMismatchError(
            f"row has {x.shape} entries, model has {model.beta.shape}"
        )
    p = float(sigmoid(float(x @ model.beta)))
    return min(max(p, _PROB_FLOOR), _PROB_CEIL)


def predict_matrix(model: LogisticModel, X: np.ndarray) -> np.ndarray:
    """Event probabilities for each row of a design matrix."""
    if X.shape[1] != len(model.beta):
        raise DimensionMismatchError(
            f"matrix has {X.shape[1]} columns, model has {len(model.beta)}"
        )
    p = sigmoid(X @ model.beta)
    return np.clip(p, _PROB_FLOOR, _PROB_CEIL)


def normal_two_sided_p(z: float) -> float:
    """Two-sided tail probability of the standard normal."""
    return math.erfc(abs(z) / math.sqrt(2.0))


def wald(model: LogisticModel, j: int | str) -> tuple[float, float]:
    """(z, two-sided p) for one coefficient."""
    if isinstance(j, str):
        j = model.column_names.index(j)
    se = float(model.se[j])
    if not (se > 0.0) or not math.isfinite(se):
        raise ZeroSeError(f"standard error of '{model.column_names[j]}' is not positive")
    z = float(model.beta[j]) / se
    return z, normal_two_sided_p(z)


def backward_eliminate(fm: FeatureMatrix, alpha_stay: float) -> EliminationTrace:
    """Drop the largest-p predictor until all remaining p-values <= alpha_stay.

    The intercept is never a candidate. Exact p-value ties are broken by
    removing the column declared later.
    """
    current = fm
    steps: list[tuple[str, float]] = []
    model = fit_logistic(current)
    while True:
        worst_j = -1
        worst_p = -1.0
        for j, name in enumerate(current.column_names):
            if name == "intercept":
                continue
            _, p_value = wald(model, j)
            if p_value >= worst_p:  # >= keeps the later column on ties
                worst_p = p_value
                worst_j = j
        if worst_j < 0 or worst_p <= alpha_stay:
            break
        removed = current.column_names[worst_j]
        steps.append((removed, worst_p))
        kept = tuple(n for n in current.column_names if n != removed)
        current = current.select_columns(kept)
        model = fit_logistic(current)
    return EliminationTrace(steps=tuple(steps), final_model=model)


def column_std(fm: FeatureMatrix) -> np.ndarray:
    """Sample standard deviation (ddof=1) per column; 0 for constant columns."""
    if fm.n < 2:
        return np.zeros(fm.p)
    return np.std(fm.X, axis=0, ddof=1)


def normalized_coefficients(model: LogisticModel, fm: FeatureMatrix) -> np.ndarray:
    """Coefficient times sample standard deviation, per column.

    Intercept and constant columns get 0: there is no spread to scale by.
    """
    if fm.column_names != model.column_names:
        raise DimensionMismatchError("matrix columns do not match the fitted model")
    sd = column_std(fm)
    return model.beta * sd


def coefficient_report_rows(model: LogisticModel, fm: FeatureMatrix) -> list[tuple]:
    sd = column_std(fm)
    normalized = normalized_coefficients(model, fm)
    rows = []
    for j, name in enumerate(model.column_names):
        z, p_value = wald(model, j)
        rows.append(
            (
                name,
                float(model.beta[j]),
                float(model.se[j]),
                float(sd[j]),
                float(normalized[j]),
                z,
                p_value,
            )
        )
    return rows


def write_coefficient_report(path, model: LogisticModel, fm: FeatureMatrix) -> None:
    write_csv(
        path,
        ("variable", "coefficient", "std_error", "std_dev", "normalized_coefficient", "z", "p_value"),
        coefficient_report_rows(model, fm),
    )


def write_elimination_trace(path, trace: EliminationTrace) -> None:
    write_csv(
        path,
        ("step", "removed_variable", "p_value"),
        [(i + 1, name, p) for i, (name, p) in enumerate(trace.steps)],
    )
