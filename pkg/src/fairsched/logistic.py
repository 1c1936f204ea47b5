"""Logistic-regression risk model: training, scoring, persistence.

Training is full-batch gradient descent with Armijo backtracking, started
from the zero vector, so identical inputs give bit-identical coefficients.
The objective is the mean negative log-likelihood over raw (unstandardized)
features plus 0.5 * l2_weight * ||w||^2 on the raw coefficients; descent
runs in a variance-scaled basis purely for conditioning, which changes the
iterate path but not the objective or its optimum.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from fairsched import DataError, DegenerateLabelsError, NumericError
from fairsched.ingest import FeatureRow
from fairsched.kernels import logistic_loss_grad

logger = logging.getLogger(__name__)

# Scores are clamped into the open interval so downstream consumers can rely
# on 0 < score < 1 even when the linear term saturates the sigmoid.
_SCORE_FLOOR = 1e-15
_SCORE_CEIL = 1.0 - 1e-15

_ARMIJO_C1 = 1e-4
_MAX_BACKTRACKS = 60


@dataclass(frozen=True)
class TrainConfig:
    max_iterations: int = 1000
    step_size: float = 1.0
    convergence_tolerance: float = 1e-7
    l2_weight: float = 1e-4
    seed: int = 0  # reserved; every bundled trainer is deterministic

    def __post_init__(self):
        if self.max_iterations <= 0 or self.step_size <= 0 or self.convergence_tolerance <= 0:
            raise ValueError("max_iterations, step_size, convergence_tolerance must be positive")
        if self.l2_weight < 0:
            raise ValueError("l2_weight must be >= 0")


@dataclass(frozen=True)
class TrainedModel:
    """Named coefficient vector plus intercept; scores via the logistic link."""

    feature_names: tuple[str, ...]
    coefficients: tuple[float, ...]
    intercept: float
    converged: bool = True

    def __post_init__(self):
        if len(self.feature_names) != len(self.coefficients):
            raise ValueError("one coefficient per feature name required")
        values = list(self.coefficients) + [self.intercept]
        if not all(math.isfinite(v) for v in values):
            raise NumericError("model has non-finite parameters")

    def coefficient(self, name: str) -> float:
        return self.coefficients[self.feature_names.index(name)]

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.feature_names, self.coefficients))


@dataclass(frozen=True)
class RiskScore:
    inspection_id: str
    score: float

    def __post_init__(self):
        if not 0.0 < self.score < 1.0:
            raise ValueError(f"score {self.score} outside (0, 1)")


def design_matrix(
    rows: list[FeatureRow], feature_names: tuple[str, ...] | None = None
) -> tuple[np.ndarray, tuple[str, ...]]:
    """Stack feature rows into a dense matrix, optionally restricted to a
    feature subset; raises DataError on non-finite values."""
    if not rows:
        raise DataError("no feature rows supplied")
    if feature_names is None:
        feature_names = rows[0].names
        for row in rows:
            if row.names != feature_names:
                raise DataError("feature rows disagree on feature names")
        X = np.array([row.values for row in rows], dtype=np.float64)
    else:
        feature_names = tuple(feature_names)
        X = np.array([[row.value(name) for name in feature_names] for row in rows], dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise DataError("feature matrix contains non-finite values")
    return X, feature_names


def standardize_columns(X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Column-wise (X - mean) / std with zero-variance columns left unscaled."""
    mu = X.mean(axis=0)
    sigma = X.std(axis=0)
    sigma = np.where(sigma > 0, sigma, 1.0)
    return (X - mu) / sigma, mu, sigma


def raw_coefficients(v: np.ndarray, b: float, mu: np.ndarray, sigma: np.ndarray) -> tuple[np.ndarray, float]:
    """Map coefficients fit on standardized columns back to raw-feature space."""
    w = v / sigma
    return w, float(b - np.dot(v, mu / sigma))


def _labels_array(labels) -> np.ndarray:
    y = np.asarray([1.0 if bool(v) else 0.0 for v in labels], dtype=np.float64)
    if y.min() == y.max():
        raise DegenerateLabelsError("labels are all one class")
    return y


def minimize_logistic(
    X: np.ndarray,
    y: np.ndarray,
    config: TrainConfig,
    sample_weight: np.ndarray | None = None,
    penalty_grad=None,
    loss_trace: list | None = None,
    initial: np.ndarray | None = None,
    warn: bool = True,
) -> tuple[np.ndarray, float, bool]:
    """Armijo-backtracking gradient descent on the penalized log loss.

    The base objective is the kernel's weighted mean NLL plus
    0.5 * l2 * ||w||^2 over the columns of X as given. ``penalty_grad``, when
    supplied, is called as penalty_grad(w, intercept) -> (extra_loss,
    extra_grad) and added to both; it lets the fair trainers reuse this
    loop. ``initial`` warm-starts the iterate (coefficients then intercept);
    the default is the zero vector. Returns (coefficients, intercept,
    converged).
    """
    n, d = X.shape
    theta = np.zeros(d + 1) if initial is None else np.array(initial, dtype=np.float64)

    def evaluate(t: np.ndarray) -> tuple[float, np.ndarray]:
        loss, grad = logistic_loss_grad(X, y, t[:d], t[d], config.l2_weight, sample_weight)
        if penalty_grad is not None:
            extra_loss, extra_grad = penalty_grad(t[:d], t[d])
            loss += extra_loss
            grad = grad + extra_grad
        return loss, grad

    loss, grad = evaluate(theta)
    if loss_trace is not None:
        loss_trace.append(loss)
    step = config.step_size
    converged = False
    for _ in range(config.max_iterations):
        if np.max(np.abs(grad)) <= config.convergence_tolerance:
            converged = True
            break
        descent = float(grad @ grad)
        accepted = False
        for _ in range(_MAX_BACKTRACKS):
            candidate = theta - step * grad
            candidate_loss, candidate_grad = evaluate(candidate)
            if candidate_loss <= loss - _ARMIJO_C1 * step * descent:
                theta, loss, grad = candidate, candidate_loss, candidate_grad
                accepted = True
                break
            step *= 0.5
        if not accepted:
            raise NumericError("line search failed: no step satisfies the descent condition")
        if loss_trace is not None:
            loss_trace.append(loss)
        # warm-start the next line search just above the accepted step
        step = min(step * 2.0, 256.0 * config.step_size)
    else:
        if np.max(np.abs(grad)) <= config.convergence_tolerance:
            converged = True
    if not converged and warn:
        logger.warning(
            "gradient descent stopped at max_iterations=%d with gradient norm %.3g",
            config.max_iterations,
            float(np.max(np.abs(grad))),
        )
    return theta[:d], float(theta[d]), converged


def unpenalized(config: TrainConfig) -> TrainConfig:
    """The same schedule with the kernel's own L2 disabled (the penalty is
    applied through a closure instead)."""
    return TrainConfig(
        max_iterations=config.max_iterations,
        step_size=config.step_size,
        convergence_tolerance=config.convergence_tolerance,
        l2_weight=0.0,
        seed=config.seed,
    )


def scaled_ridge_penalty(sigma: np.ndarray, l2: float):
    """Raw-space ridge expressed in the standardized basis.

    0.5*l2*sum(w_j^2) becomes 0.5*l2*sum((v_j/sigma_j)^2) for standardized
    coefficients v, so descending with this closure optimizes the raw
    objective; returns None when l2 is zero. Shared by every trainer so the
    fair variants and the baseline minimize the same base objective.
    """
    if l2 <= 0:
        return None
    inv_sq = 1.0 / (sigma * sigma)

    def penalty(v: np.ndarray, _b: float):
        grad = np.zeros(v.size + 1)
        grad[:-1] = l2 * v * inv_sq
        return 0.5 * l2 * float(np.dot(v * v, inv_sq)), grad

    return penalty


def _fit_preconditioned(
    X: np.ndarray,
    y: np.ndarray,
    config: TrainConfig,
    sample_weight: np.ndarray | None = None,
    loss_trace: list | None = None,
) -> tuple[np.ndarray, float, bool]:
    """Fit the raw-feature objective by descending in the standardized basis,
    mapping the optimum exactly back to raw coordinates."""
    Xs, mu, sigma = standardize_columns(X)
    v, b, converged = minimize_logistic(
        Xs,
        y,
        unpenalized(config),
        sample_weight,
        penalty_grad=scaled_ridge_penalty(sigma, config.l2_weight),
        loss_trace=loss_trace,
    )
    w, intercept = raw_coefficients(v, b, mu, sigma)
    return w, intercept, converged


def train_logistic(
    features: list[FeatureRow],
    labels,
    config: TrainConfig | None = None,
    feature_names: tuple[str, ...] | None = None,
    sample_weight=None,
    loss_trace: list | None = None,
) -> TrainedModel:
    """Train the risk model on raw features.

    Requires at least one positive and one negative label. Deterministic
    given (data, config); non-convergence inside max_iterations logs a
    warning and returns the best iterate with converged=False.
    """
    config = config or TrainConfig()
    X, names = design_matrix(features, feature_names)
    y = _labels_array(labels)
    if y.size != X.shape[0]:
        raise DataError("label count does not match feature row count")
    weights = None if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
    w, intercept, converged = _fit_preconditioned(X, y, config, weights, loss_trace)
    return TrainedModel(
        feature_names=names,
        coefficients=tuple(float(c) for c in w),
        intercept=intercept,
        converged=converged,
    )


def linear_term(model: TrainedModel, row: FeatureRow) -> float:
    return model.intercept + sum(
        c * row.value(name) for name, c in zip(model.feature_names, model.coefficients)
    )


def sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def predict_score(model: TrainedModel, row: FeatureRow) -> RiskScore:
    """Risk score in (0, 1); raises MissingFeatureError if the row lacks a
    model feature."""
    p = sigmoid(linear_term(model, row))
    return RiskScore(row.inspection_id, min(max(p, _SCORE_FLOOR), _SCORE_CEIL))


def score_rows(model: TrainedModel, rows: list[FeatureRow]) -> dict[str, float]:
    return {row.inspection_id: predict_score(model, row).score for row in rows}


def log_loss_and_gradient(
    model: TrainedModel,
    features: list[FeatureRow],
    labels,
    l2_weight: float = 0.0,
    sample_weight=None,
) -> tuple[float, np.ndarray]:
    """Penalized mean log loss and its gradient at the model's parameters.

    The gradient carries one entry per coefficient plus a final entry for
    the intercept.
    """
    X, _ = design_matrix(features, model.feature_names)
    y = np.asarray([1.0 if bool(v) else 0.0 for v in labels], dtype=np.float64)
    weights = None if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
    w = np.asarray(model.coefficients, dtype=np.float64)
    return logistic_loss_grad(X, y, w, model.intercept, l2_weight, weights)


INTERCEPT_KEY = "__intercept__"


def save_model(model: TrainedModel, sink) -> None:
    """Write `name<TAB>value` lines; 17 significant digits round-trip floats
    bit-exactly."""
    for name, value in zip(model.feature_names, model.coefficients):
        sink.write(f"{name}\t{format(value, '.17g')}\n")
    sink.write(f"{INTERCEPT_KEY}\t{format(model.intercept, '.17g')}\n")


def load_model(source) -> TrainedModel:
    names: list[str] = []
    values: list[float] = []
    intercept = None
    for line_number, line in enumerate(source, start=1):
        line = line.rstrip("\n")
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError(f"model file line {line_number}: expected name<TAB>value")
        name, text = parts
        try:
            value = float(text)
        except ValueError:
            raise DataError(f"model file line {line_number}: malformed value {text!r}") from None
        if name == INTERCEPT_KEY:
            intercept = value
        else:
            names.append(name)
            values.append(value)
    if intercept is None:
        raise DataError(f"model file lacks the {INTERCEPT_KEY} line")
    return TrainedModel(feature_names=tuple(names), coefficients=tuple(values), intercept=intercept)
