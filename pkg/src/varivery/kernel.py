"""Fidelity-kernel pipeline: Gram matrices, ridge fitting, prediction, and a
classical linear baseline for toy-scale comparisons.

The fitted model is kernel ridge regression, alpha = (K + lambda I)^-1 y.
Any empirical-risk minimizer over the span of training-point kernels does the
job here, and ridge has a closed-form symmetric solve.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .errors import ConditioningError, DegenerateModelError, ShapeError, ValidationError
from .statevec import StateVector, overlap
from .train import Dataset, classify

DEFAULT_RIDGE_LAMBDA = 1e-3
_PSD_TOL = -1e-8
_SYM_TOL = 1e-10
_RESIDUAL_TOL = 1e-8

FeatureMap = Callable[[int], StateVector]


@dataclass(frozen=True)
class GramMatrix:
    entries: np.ndarray
    support: tuple[int, ...]

    def __post_init__(self):
        k = np.asarray(self.entries, dtype=float)
        n = len(self.support)
        if k.shape != (n, n):
            raise ShapeError(f"Gram shape {k.shape} does not match {n} inputs")
        if np.abs(k - k.T).max() > _SYM_TOL:
            raise ValidationError("Gram matrix is not symmetric within 1e-10")
        if float(np.linalg.eigvalsh(k).min()) < _PSD_TOL:
            raise ValidationError("Gram matrix is not positive semidefinite within -1e-8")
        object.__setattr__(self, "entries", k)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.entries).min())

    def to_csv(self) -> str:
        lines = [",".join(f"{v:.17g}" for v in row) for row in self.entries]
        return "\n".join(lines) + "\n"


def gram(feature_map: FeatureMap, inputs) -> GramMatrix:
    """Pairwise fidelities |<phi(x_i)|phi(x_j)>|^2, exactly symmetrized."""
    inputs = tuple(inputs)
    states = [feature_map(x) for x in inputs]
    n = len(states)
    k = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            val = abs(overlap(states[i], states[j])) ** 2
            k[i, j] = k[j, i] = val
    return GramMatrix(k, inputs)


@dataclass(frozen=True)
class KernelModel:
    alpha: np.ndarray
    support: tuple[int, ...]
    feature_map_id: str
    regularization: float
    feature_map: FeatureMap = field(compare=False, repr=False, default=None)
    _support_states: tuple = field(compare=False, repr=False, default=None)

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float)
        if len(a) != len(self.support):
            raise ShapeError("alpha length must match the support size")
        if not np.all(np.isfinite(a)):
            raise ValidationError("alpha must be finite")
        object.__setattr__(self, "alpha", a)
        if self.feature_map is not None:
            states = tuple(self.feature_map(x) for x in self.support)
            object.__setattr__(self, "_support_states", states)

    def to_json(self) -> str:
        return json.dumps(
            {
                "alpha": [float(a) for a in self.alpha],
                "support": list(self.support),
                "lambda": self.regularization,
                "feature_map": self.feature_map_id,
            },
            sort_keys=True,
        )


def fit(gram_matrix: GramMatrix, labels, regularization: float,
        feature_map: FeatureMap = None, feature_map_id: str = "") -> KernelModel:
    """Ridge solve alpha = (K + lambda I)^-1 y with a residual check."""
    if regularization <= 0:
        raise ValidationError("regularization must be positive")
    y = np.asarray(labels, dtype=float)
    n = len(gram_matrix.support)
    if y.shape != (n,):
        raise ShapeError(f"labels shape {y.shape} does not match {n} support points")
    system = gram_matrix.entries + regularization * np.eye(n)
    try:
        alpha = scipy.linalg.solve(system, y, assume_a="pos")
    except scipy.linalg.LinAlgError as err:
        raise ConditioningError(
            f"ridge system solve failed: {err}", condition_estimate=float(np.linalg.cond(system))
        ) from err
    residual = float(np.abs(system @ alpha - y).max())
    if residual > _RESIDUAL_TOL:
        raise ConditioningError(
            f"ridge residual {residual} exceeds {_RESIDUAL_TOL}",
            condition_estimate=float(np.linalg.cond(system)),
        )
    return KernelModel(alpha, gram_matrix.support, feature_map_id, regularization, feature_map)


def predict(model: KernelModel, x) -> float:
    """f(x) = sum_i alpha_i k(x, x_i)."""
    if model.feature_map is None:
        raise ValidationError("model carries no feature map; rebuild it with one")
    phi = model.feature_map(x)
    kvec = np.array([abs(overlap(phi, s)) ** 2 for s in model._support_states])
    return float(model.alpha @ kvec)


def predict_label(model: KernelModel, x) -> float:
    return classify(predict(model, x))


def model_accuracy(model: KernelModel, dataset: Dataset) -> float:
    hits = [predict_label(model, x) == y for x, y in dataset.samples]
    return float(np.mean(hits))


# ---------------------------------------------------------------------------
# classical baseline


def _bit_features(x: int, n_bits: int) -> np.ndarray:
    return np.array([(x >> (n_bits - 1 - i)) & 1 for i in range(n_bits)], dtype=float)


@dataclass(frozen=True)
class BaselineClassifier:
    kind: str
    weights: np.ndarray  # bias first, then one weight per bit
    n_bits: int

    def score(self, x: int) -> float:
        feats = np.concatenate([[1.0], _bit_features(x, self.n_bits)])
        return float(self.weights @ feats)

    def predict_label(self, x: int) -> float:
        return classify(self.score(x))

    def accuracy(self, dataset: Dataset) -> float:
        return float(np.mean([self.predict_label(x) == y for x, y in dataset.samples]))


def classical_baseline_fit(dataset: Dataset, kind: str = "logistic", seed: int = 0):
    """Linear model over raw bit features; 'logistic' or 'linear'."""
    feats = np.stack(
        [np.concatenate([[1.0], _bit_features(x, dataset.n_bits)]) for x in dataset.xs()]
    )
    y = dataset.labels()
    if kind == "linear":
        weights, *_ = np.linalg.lstsq(feats, y, rcond=None)
        return BaselineClassifier(kind, weights, dataset.n_bits)
    if kind == "logistic":
        from sklearn.linear_model import LogisticRegression

        if len(set(y)) == 1:
            # single-class set: constant predictor at that class
            bias = 1e6 if y[0] > 0 else -1e6
            weights = np.zeros(feats.shape[1])
            weights[0] = bias
            return BaselineClassifier(kind, weights, dataset.n_bits)
        clf = LogisticRegression(random_state=seed, max_iter=2000)
        clf.fit(feats[:, 1:], y)
        weights = np.concatenate([clf.intercept_, clf.coef_[0]])
        return BaselineClassifier(kind, weights, dataset.n_bits)
    raise ValidationError(f"unknown baseline kind {kind!r}")
