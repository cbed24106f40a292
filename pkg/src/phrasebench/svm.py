"""Linear epsilon-insensitive SVM trained one-vs-rest by primal subgradient descent.

Each class c gets a scalar machine f_c(x) = w_c . x + b_c fitted to targets
y in {+1, -1} under the objective

    0.5 ||w||^2 + (C/N) sum_i max(0, |y_i - f(x_i)| - epsilon)

which is the unconstrained equivalent of the soft-margin formulation with
slack variables: residuals inside the epsilon band cost nothing.  Prediction
takes the argmax of the per-class decision values, lowest class id winning
ties.  Training starts from zero and is fully deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import DocTermMatrix, Vocabulary, tokenize, vectorize


class TrainingError(ValueError):
    """Invalid training input (empty matrix, missing class, bad values)."""


@dataclass(frozen=True)
class SvmConfig:
    """Hyperparameters: regularization C, band width epsilon, step schedule.

    The step at iteration t is step / (1 + t * step_decay).  Training stops
    at max_iters, or earlier once the best objective has improved by less
    than tolerance over a 100-iteration window.
    """

    c: float = 1.0
    epsilon: float = 0.1
    step: float = 0.5
    step_decay: float = 0.01
    max_iters: int = 2000
    tolerance: float = 1e-8

    def __post_init__(self) -> None:
        if self.c <= 0:
            raise ValueError("C must be positive")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.step <= 0 or self.step_decay < 0:
            raise ValueError("step schedule must have step > 0 and decay >= 0")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")


_STALL_WINDOW = 100


def svm_objective(
    x: np.ndarray, y: np.ndarray, w: np.ndarray, b: float, c: float, epsilon: float
) -> float:
    """Primal objective of one scalar machine on (x, y)."""
    residual = x @ w + b - y
    slack = np.maximum(0.0, np.abs(residual) - epsilon)
    return float(0.5 * w @ w + (c / len(y)) * slack.sum())


def svm_subgradient(
    x: np.ndarray, y: np.ndarray, w: np.ndarray, b: float, c: float, epsilon: float
) -> tuple[np.ndarray, float]:
    """Analytic subgradient of the objective at (w, b)."""
    residual = x @ w + b - y
    s = np.sign(residual) * (np.abs(residual) > epsilon)
    g_w = w + (c / len(y)) * (x.T @ s)
    g_b = (c / len(y)) * s.sum()
    return g_w, float(g_b)


@dataclass
class SvmModel:
    """Per-class weight vectors and biases over a shared vocabulary."""

    weights: np.ndarray  # (n_classes, n_terms)
    biases: np.ndarray  # (n_classes,)
    classes: tuple[int, ...]
    vocabulary: Vocabulary
    config: SvmConfig
    iterations: int = 0
    objective_trace: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    phrase_texts: tuple[str, ...] | None = None

    def class_objectives(self, matrix: DocTermMatrix) -> np.ndarray:
        """Objective value of each one-vs-rest machine on a labeled matrix."""
        if matrix.labels is None:
            raise TrainingError("matrix has no labels")
        return np.array(
            [
                svm_objective(
                    matrix.rows,
                    np.where(matrix.labels == cls, 1.0, -1.0),
                    self.weights[i],
                    float(self.biases[i]),
                    self.config.c,
                    self.config.epsilon,
                )
                for i, cls in enumerate(self.classes)
            ]
        )


def train_svm(
    matrix: DocTermMatrix, config: SvmConfig = SvmConfig(), classes: Sequence[int] | None = None
) -> SvmModel:
    """Fit one machine per class by full-batch subgradient descent.

    All machines share the feature matrix, so the descent runs vectorized
    across classes; each class keeps its own best iterate, which is what the
    returned model carries.
    """
    if matrix.labels is None or matrix.n_docs == 0:
        raise TrainingError("training needs a non-empty labeled matrix")
    if not np.all(np.isfinite(matrix.rows)):
        raise TrainingError("non-finite feature values")
    present = set(int(v) for v in matrix.labels)
    cls_list = tuple(sorted(present)) if classes is None else tuple(sorted(classes))
    for cls in cls_list:
        if cls not in present:
            raise TrainingError(f"class {cls} has no training examples")

    x = matrix.rows
    n, m = x.shape
    k = len(cls_list)
    y = np.where(matrix.labels[:, None] == np.array(cls_list)[None, :], 1.0, -1.0)  # (n, k)
    scale = config.c / n

    w = np.zeros((k, m))
    b = np.zeros(k)
    best_w = w.copy()
    best_b = b.copy()
    best_obj = _objectives(x, y, w, b, scale, config.epsilon)
    trace = np.empty(config.max_iters)
    window_mark = best_obj.sum()
    iterations = 0

    for t in range(config.max_iters):
        residual = x @ w.T + b - y  # (n, k)
        s = np.sign(residual) * (np.abs(residual) > config.epsilon)
        g_w = w + scale * (s.T @ x)
        g_b = scale * s.sum(axis=0)
        eta = config.step / (1.0 + t * config.step_decay)
        w = w - eta * g_w
        b = b - eta * g_b

        obj = _objectives(x, y, w, b, scale, config.epsilon)
        improved = obj < best_obj
        if improved.any():
            best_obj = np.where(improved, obj, best_obj)
            best_w[improved] = w[improved]
            best_b[improved] = b[improved]
        trace[t] = best_obj.sum()
        iterations = t + 1
        if (t + 1) % _STALL_WINDOW == 0:
            if window_mark - trace[t] < config.tolerance:
                break
            window_mark = trace[t]

    return SvmModel(
        weights=best_w,
        biases=best_b,
        classes=cls_list,
        vocabulary=matrix.vocabulary,
        config=config,
        iterations=iterations,
        objective_trace=trace[:iterations].copy(),
    )


def _objectives(x, y, w, b, scale, epsilon):
    residual = x @ w.T + b - y
    slack = np.maximum(0.0, np.abs(residual) - epsilon)
    return 0.5 * (w * w).sum(axis=1) + scale * slack.sum(axis=0)


def decision_value(model: SvmModel, x: np.ndarray, cls: int) -> float:
    """w_c . x + b_c for one class."""
    x = np.asarray(x, dtype=float)
    if x.shape != (len(model.vocabulary),):
        raise ValueError(f"feature vector length {x.shape} != vocabulary size {len(model.vocabulary)}")
    i = model.classes.index(cls)
    return float(model.weights[i] @ x + model.biases[i])


def decision_values(model: SvmModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (len(model.vocabulary),):
        raise ValueError(f"feature vector length {x.shape} != vocabulary size {len(model.vocabulary)}")
    return model.weights @ x + model.biases


def classify_svm(model: SvmModel, transcript: str) -> int:
    """tokenize -> vectorize -> argmax of decision values (lowest id on ties)."""
    x = vectorize(tokenize(transcript), model.vocabulary)
    return model.classes[int(np.argmax(decision_values(model, x)))]


def model_to_dict(model: SvmModel) -> dict:
    doc = {
        "format": "phrasebench-model",
        "kind": "svm",
        "version": 1,
        "config": {
            "c": model.config.c,
            "epsilon": model.config.epsilon,
            "step": model.config.step,
            "step_decay": model.config.step_decay,
            "max_iters": model.config.max_iters,
            "tolerance": model.config.tolerance,
        },
        "vocabulary": list(model.vocabulary.terms),
        "classes": list(model.classes),
        "weights": [list(map(float, row)) for row in model.weights],
        "biases": [float(v) for v in model.biases],
    }
    if model.phrase_texts is not None:
        doc["phrases"] = list(model.phrase_texts)
    return doc


def model_from_dict(doc: dict) -> SvmModel:
    if doc.get("kind") != "svm":
        raise ValueError(f"not an svm model document: kind={doc.get('kind')!r}")
    terms = tuple(doc["vocabulary"])
    return SvmModel(
        weights=np.array(doc["weights"], dtype=float),
        biases=np.array(doc["biases"], dtype=float),
        classes=tuple(int(c) for c in doc["classes"]),
        vocabulary=Vocabulary(terms=terms, index={t: i for i, t in enumerate(terms)}),
        config=SvmConfig(**doc["config"]),
        phrase_texts=tuple(doc["phrases"]) if "phrases" in doc else None,
    )


def save_svm(model: SvmModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2, sort_keys=True), encoding="utf-8")


def load_svm(path: str | Path) -> SvmModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
