"""Fairness-aware risk-model trainers sharing one optimizer.

Four variants around the baseline logistic model:

- no-sanitarian: drops the six cluster indicator features;
- zafar: bounds the covariance between the decision value and each cluster
  indicator (quadratic penalty, multiplier doubling until satisfied);
- binary-fair (surrogate): penalized squared gap in mean score between the
  two halves of a binary cluster split, demographic-parity or
  equal-opportunity flavored;
- proportional-fair (surrogate): multiplicative-weights ensemble steering
  training weight toward whichever cluster is furthest below the accuracy
  its own standalone model achieves.

The binary-fair and proportional-fair trainers are documented surrogates:
they fill the same experimental role as published robust-optimization and
proportional-utility methods (same protected attribute, knob, and scoring
interface) without reproducing those codebases, and every report labels
them "(surrogate)".

Penalized trainers standardize features internally so penalty scales are
comparable across features, then map coefficients back to raw space; the
linear term per row is unchanged by that mapping.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from fairsched import DataError, DegenerateLabelsError
from fairsched.ingest import (
    CLUSTERS,
    FeatureRow,
    InspectionRecord,
    NONCLUSTER_FEATURE_NAMES,
    binarize_cluster,
)
from fairsched.logistic import (
    INTERCEPT_KEY,
    RiskScore,
    TrainConfig,
    TrainedModel,
    design_matrix,
    linear_term,
    load_model,
    minimize_logistic,
    predict_score,
    raw_coefficients,
    save_model,
    scaled_ridge_penalty,
    standardize_columns,
    train_logistic,
    unpenalized,
)

logger = logging.getLogger(__name__)

POLYVALENT = "polyvalent-cluster"
BINARY = "binary-cluster"

ZAFAR_GRID = (0.0, 1e-6, 0.001, 0.01, 0.1)
BINARY_FAIR_GRID = (0.001, 0.005, 0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5)

# Constraint bookkeeping for the covariance-bounded trainer.
_COV_SLACK = 1e-4
_RHO_INITIAL = 10.0
_MAX_ESCALATIONS = 20

# Multiplicative-weights settings for the proportional ensemble.
ENSEMBLE_LEARNING_RATE = 1.0
MIN_GROUP_ROWS = 10


@dataclass(frozen=True)
class ProtectedSpec:
    """Protected attribute A: a value per inspection id.

    kind is "polyvalent-cluster" (A ranges over the six cluster names) or
    "binary-cluster" (A in {0, 1} from the rate-based split).
    """

    kind: str
    values: dict[str, object]

    def __post_init__(self):
        if self.kind not in (POLYVALENT, BINARY):
            raise ValueError(f"unknown protected kind {self.kind!r}")

    def value_for(self, inspection_id: str):
        try:
            return self.values[inspection_id]
        except KeyError:
            raise DataError(f"no protected value for inspection {inspection_id!r}") from None

    def aligned(self, rows: list[FeatureRow]) -> list:
        return [self.value_for(row.inspection_id) for row in rows]


def cluster_protected(records: list[InspectionRecord]) -> ProtectedSpec:
    return ProtectedSpec(POLYVALENT, {r.inspection_id: r.cluster for r in records})


def binary_cluster_protected(records: list[InspectionRecord]) -> ProtectedSpec:
    return ProtectedSpec(BINARY, {r.inspection_id: binarize_cluster(r.cluster) for r in records})


@dataclass(frozen=True)
class EnsembleModel:
    """Weighted set of logistic members; weights are normalized to sum 1."""

    members: tuple[tuple[TrainedModel, float], ...]

    def __post_init__(self):
        if not self.members:
            raise ValueError("ensemble needs at least one member")
        if any(weight < 0 for _, weight in self.members):
            raise ValueError("member weights must be >= 0")
        total = sum(weight for _, weight in self.members)
        if not math.isclose(total, 1.0, rel_tol=0, abs_tol=1e-9):
            raise ValueError(f"member weights sum to {total}, expected 1")

    @classmethod
    def from_unnormalized(cls, members) -> "EnsembleModel":
        total = sum(weight for _, weight in members)
        if total <= 0:
            raise ValueError("member weights must have positive total")
        return cls(tuple((model, weight / total) for model, weight in members))


def train_no_sanitarian(
    features: list[FeatureRow], labels, config: TrainConfig | None = None
) -> TrainedModel:
    """Baseline trainer restricted to the ten non-cluster features."""
    return train_logistic(features, labels, config, feature_names=NONCLUSTER_FEATURE_NAMES)


def _attribute_values(protected: ProtectedSpec, aligned: list) -> list:
    present = sorted(set(aligned), key=str)
    if protected.kind == POLYVALENT:
        missing = [c for c in CLUSTERS if c not in present]
        if missing:
            logger.warning("clusters absent from data, excluded from covariance: %s", missing)
    if len(present) < 2:
        raise DataError("protected attribute takes fewer than 2 values on this data")
    return present


def covariance_decision_protected(
    model: TrainedModel, features: list[FeatureRow], protected: ProtectedSpec
) -> dict:
    """Empirical covariance between the signed decision value and the
    one-vs-rest indicator of each protected value (population 1/n form)."""
    aligned = protected.aligned(features)
    z = np.array([linear_term(model, row) for row in features])
    out = {}
    for value in _attribute_values(protected, aligned):
        indicator = np.array([1.0 if a == value else 0.0 for a in aligned])
        out[value] = float(np.mean((z - z.mean()) * (indicator - indicator.mean())))
    return out


def _covariance_directions(Xs: np.ndarray, aligned: list, values: list) -> np.ndarray:
    """Rows g_k with cov_k(v) = g_k . v for the standardized design: the
    intercept drops out of a covariance, so each constraint is linear."""
    n = Xs.shape[0]
    G = np.zeros((len(values), Xs.shape[1]))
    for k, value in enumerate(values):
        indicator = np.array([1.0 if a == value else 0.0 for a in aligned])
        G[k] = Xs.T @ (indicator - indicator.mean()) / n
    return G


def train_zafar(
    features: list[FeatureRow],
    labels,
    protected: ProtectedSpec,
    c: float,
    config: TrainConfig | None = None,
) -> TrainedModel:
    """Logistic loss under |cov(decision value, one-vs-rest(A=a))| <= c for
    every attribute value a.

    Enforced by a quadratic penalty rho * sum_k max(0, |cov_k| - c)^2 with
    rho doubled (warm-started) until every covariance is within c + 1e-4 or
    20 escalations pass; an infeasible instance gets the best iterate and a
    logged violation report.
    """
    if c < 0:
        raise ValueError("covariance threshold c must be >= 0")
    config = config or TrainConfig()
    X, names = design_matrix(features)
    y = np.asarray([1.0 if bool(v) else 0.0 for v in labels], dtype=np.float64)
    if y.min() == y.max():
        raise DegenerateLabelsError("labels are all one class")
    Xs, mu, sigma = standardize_columns(X)
    aligned = protected.aligned(features)
    values = _attribute_values(protected, aligned)
    G = _covariance_directions(Xs, aligned, values)

    bare = unpenalized(config)
    ridge = scaled_ridge_penalty(sigma, config.l2_weight)

    v, b, _ = minimize_logistic(Xs, y, bare, penalty_grad=ridge, warn=False)
    rho = _RHO_INITIAL
    for _ in range(_MAX_ESCALATIONS):
        cov = G @ v
        if np.max(np.abs(cov)) <= c + _COV_SLACK:
            break

        def penalty(w: np.ndarray, b_: float, rho=rho):
            cov = G @ w
            excess = np.maximum(0.0, np.abs(cov) - c)
            grad = np.zeros(w.size + 1)
            grad[:-1] = 2.0 * rho * (excess * np.sign(cov)) @ G
            loss = rho * float(excess @ excess)
            if ridge is not None:
                ridge_loss, ridge_grad = ridge(w, b_)
                loss += ridge_loss
                grad = grad + ridge_grad
            return loss, grad

        v, b, _ = minimize_logistic(
            Xs, y, bare, penalty_grad=penalty, initial=np.append(v, b), warn=False
        )
        rho *= 2.0
    cov = G @ v
    if np.max(np.abs(cov)) > c + _COV_SLACK:
        worst = {values[k]: float(cov[k]) for k in np.flatnonzero(np.abs(cov) > c + _COV_SLACK)}
        logger.warning(
            "covariance constraint not met at c=%g after %d escalations; violations: %s",
            c,
            _MAX_ESCALATIONS,
            worst,
        )
    w, intercept = raw_coefficients(v, b, mu, sigma)
    return TrainedModel(names, tuple(float(x) for x in w), intercept)


def train_binary_fair(
    features: list[FeatureRow],
    labels,
    protected: ProtectedSpec,
    objective: str,
    C: float,
    config: TrainConfig | None = None,
) -> TrainedModel:
    """Logistic loss plus C * (mean score gap between the two protected
    halves)^2; objective "DP" gaps over all rows, "EOpp" over Y=1 rows only.
    """
    if objective not in ("DP", "EOpp"):
        raise ValueError(f"objective must be 'DP' or 'EOpp', got {objective!r}")
    if C <= 0:
        raise ValueError("penalty strength C must be > 0")
    if protected.kind != BINARY:
        raise DataError("binary-fair trainer needs a binary-cluster protected spec")
    config = config or TrainConfig()
    X, names = design_matrix(features)
    y = np.asarray([1.0 if bool(v) else 0.0 for v in labels], dtype=np.float64)
    if y.min() == y.max():
        raise DegenerateLabelsError("labels are all one class")
    a = np.asarray(protected.aligned(features), dtype=np.float64)

    keep = np.ones(y.size, dtype=bool) if objective == "DP" else y == 1.0
    group1 = keep & (a == 1.0)
    group0 = keep & (a == 0.0)
    if not group1.any() or not group0.any():
        raise DegenerateLabelsError(
            f"objective {objective}: a protected group has no qualifying rows"
        )

    Xs, mu, sigma = standardize_columns(X)
    X1, X0 = Xs[group1], Xs[group0]
    n1, n0 = X1.shape[0], X0.shape[0]

    bare = unpenalized(config)
    ridge = scaled_ridge_penalty(sigma, config.l2_weight)

    def penalty(w: np.ndarray, b: float):
        def group_terms(Xg, ng):
            z = Xg @ w + b
            p = np.empty_like(z)
            pos = z >= 0
            p[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
            ez = np.exp(z[~pos])
            p[~pos] = ez / (1.0 + ez)
            s = p * (1.0 - p)
            return p.mean(), Xg.T @ s / ng, s.sum() / ng

        m1, gw1, gb1 = group_terms(X1, n1)
        m0, gw0, gb0 = group_terms(X0, n0)
        gap = m1 - m0
        grad = np.empty(w.size + 1)
        grad[:-1] = 2.0 * C * gap * (gw1 - gw0)
        grad[-1] = 2.0 * C * gap * (gb1 - gb0)
        loss = C * gap * gap
        if ridge is not None:
            ridge_loss, ridge_grad = ridge(w, b)
            loss += ridge_loss
            grad = grad + ridge_grad
        return loss, grad

    v0, b0, _ = minimize_logistic(Xs, y, bare, penalty_grad=ridge, warn=False)
    v, b, _ = minimize_logistic(
        Xs, y, bare, penalty_grad=penalty, initial=np.append(v0, b0), warn=False
    )
    w, intercept = raw_coefficients(v, b, mu, sigma)
    return TrainedModel(names, tuple(float(x) for x in w), intercept)


def score_gap(model: TrainedModel, features: list[FeatureRow], protected: ProtectedSpec,
              labels=None) -> float:
    """Mean score of the A=1 half minus the A=0 half; with labels given,
    restricted to Y=1 rows (the EOpp flavor)."""
    a = protected.aligned(features)
    scores = [predict_score(model, row).score for row in features]
    if labels is None:
        keep = [True] * len(features)
    else:
        keep = [bool(v) for v in labels]
    side1 = [s for s, av, k in zip(scores, a, keep) if k and av == 1]
    side0 = [s for s, av, k in zip(scores, a, keep) if k and av == 0]
    if not side1 or not side0:
        raise DataError("a protected group has no qualifying rows")
    return float(np.mean(side1) - np.mean(side0))


def _accuracy(model: TrainedModel, rows: list[FeatureRow], y: np.ndarray) -> float:
    predicted = np.array([1.0 if predict_score(model, r).score >= 0.5 else 0.0 for r in rows])
    return float(np.mean(predicted == y))


def train_proportional_ensemble(
    features: list[FeatureRow],
    labels,
    groups,
    rounds: int,
    config: TrainConfig | None = None,
) -> EnsembleModel:
    """Multiplicative-weights ensemble chasing proportional group accuracy.

    Round 1 trains on uniform weights (the pooled baseline). After each
    round, a group's multiplier is scaled by exp(eta * (1 - ratio)) where
    ratio = member accuracy on the group / the accuracy of that group's own
    standalone model, so underserved groups gain training weight. Members
    are weighted uniformly. Groups smaller than MIN_GROUP_ROWS, or with
    one-class labels, keep uniform weight and are scored against their
    majority rate.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    config = config or TrainConfig()
    y = np.asarray([1.0 if bool(v) else 0.0 for v in labels], dtype=np.float64)
    group_labels = list(groups)
    if len(group_labels) != len(features):
        raise DataError("group label count does not match feature row count")

    names = sorted(set(group_labels), key=str)
    index = {g: np.flatnonzero(np.array([gl == g for gl in group_labels])) for g in names}

    # Standalone target accuracy per group; majority rate when a standalone
    # model cannot be trained.
    target: dict = {}
    excluded: list = []
    for g in names:
        idx = index[g]
        rate = float(y[idx].mean())
        majority = max(rate, 1.0 - rate)
        if idx.size < MIN_GROUP_ROWS or rate in (0.0, 1.0):
            excluded.append(g)
            target[g] = majority
            continue
        standalone = train_logistic([features[i] for i in idx], y[idx], config)
        target[g] = max(_accuracy(standalone, [features[i] for i in idx], y[idx]), majority)
    if excluded:
        logger.warning("groups excluded from reweighting (too small or one-class): %s", excluded)

    multiplier = {g: 1.0 for g in names}
    members = []
    for _ in range(rounds):
        row_weight = np.array([multiplier[g] for g in group_labels])
        member = train_logistic(features, y, config, sample_weight=row_weight)
        members.append((member, 1.0))
        for g in names:
            if g in excluded:
                continue
            idx = index[g]
            acc = _accuracy(member, [features[i] for i in idx], y[idx])
            ratio = acc / target[g]
            multiplier[g] *= math.exp(ENSEMBLE_LEARNING_RATE * (1.0 - ratio))
    return EnsembleModel.from_unnormalized(members)


def ensemble_score(ensemble: EnsembleModel, row: FeatureRow, threshold: float = 0.5) -> RiskScore:
    """Total weight of members scoring the row at or above the threshold,
    nudged into the open interval (0, 1) to keep the score contract."""
    total = sum(
        weight
        for model, weight in ensemble.members
        if predict_score(model, row).score >= threshold
    )
    return RiskScore(row.inspection_id, min(max(total, 1e-15), 1.0 - 1e-15))


def ensemble_score_rows(
    ensemble: EnsembleModel, rows: list[FeatureRow], threshold: float = 0.5
) -> dict[str, float]:
    return {row.inspection_id: ensemble_score(ensemble, row, threshold).score for row in rows}


def save_ensemble(ensemble: EnsembleModel, sink) -> None:
    """members<TAB>k header, then per member a weight line and the model
    block (terminated by its intercept line)."""
    sink.write(f"members\t{len(ensemble.members)}\n")
    for model, weight in ensemble.members:
        sink.write(f"weight\t{format(weight, '.17g')}\n")
        save_model(model, sink)


def load_ensemble(source) -> EnsembleModel:
    lines = [line.rstrip("\n") for line in source]
    if not lines or not lines[0].startswith("members\t"):
        raise DataError("ensemble file must start with a members<TAB>k header")
    try:
        count = int(lines[0].split("\t", 1)[1])
    except ValueError:
        raise DataError("malformed member count in ensemble header") from None
    members = []
    cursor = 1
    for _ in range(count):
        if cursor >= len(lines) or not lines[cursor].startswith("weight\t"):
            raise DataError(f"ensemble file line {cursor + 1}: expected a weight line")
        weight = float(lines[cursor].split("\t", 1)[1])
        cursor += 1
        block = []
        while cursor < len(lines):
            block.append(lines[cursor])
            cursor += 1
            if block[-1].startswith(INTERCEPT_KEY + "\t"):
                break
        else:
            raise DataError("ensemble member block missing its intercept line")
        members.append((load_model(block), weight))
    return EnsembleModel(tuple(members))
