"""Conditional exponential-form classifier over word-frequency features.

P(c | d) is proportional to exp(lambda_c . x_d), where x_d is the normalized
word-frequency vector of document d and lambda holds one weight per
(term, class) pair.  Training runs full-batch gradient ascent on the
conditional log-likelihood; at the optimum the model's expected feature
values match the empirical ones, and the gap between the two is both the
stopping criterion and a diagnostic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import DocTermMatrix, Vocabulary, tokenize, vectorize
from .svm import TrainingError


@dataclass(frozen=True)
class TrainingDiagnostics:
    iterations: int
    final_gap: float
    final_log_likelihood: float
    converged: bool
    stop_reason: str


@dataclass
class MaxentModel:
    """Parameter matrix lam (n_terms x n_classes) over a shared vocabulary."""

    lam: np.ndarray
    classes: tuple[int, ...]
    vocabulary: Vocabulary
    diagnostics: TrainingDiagnostics | None = None
    phrase_texts: tuple[str, ...] | None = None


def _class_matrix(labels: np.ndarray, classes: Sequence[int]) -> np.ndarray:
    return (labels[:, None] == np.asarray(classes)[None, :]).astype(float)


def _log_proba(x: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Row-wise log P(c|d) for stacked feature rows, max-shifted for stability."""
    scores = x @ lam
    shift = scores.max(axis=-1, keepdims=True)
    logz = shift + np.log(np.exp(scores - shift).sum(axis=-1, keepdims=True))
    return scores - logz


def predict_proba(model: MaxentModel, x: np.ndarray) -> np.ndarray:
    """Class probabilities for one feature vector; strictly positive, sums to 1."""
    x = np.asarray(x, dtype=float)
    if x.shape != (len(model.vocabulary),):
        raise ValueError(f"feature vector length {x.shape} != vocabulary size {len(model.vocabulary)}")
    return np.exp(_log_proba(x[None, :], model.lam)[0])


def conditional_log_likelihood(matrix: DocTermMatrix, lam: np.ndarray, classes: Sequence[int]) -> float:
    """sum_d log P(c(d) | d) under the given parameters."""
    if matrix.labels is None:
        raise TrainingError("matrix has no labels")
    logp = _log_proba(matrix.rows, lam)
    idx = np.searchsorted(np.asarray(classes), matrix.labels)
    return float(logp[np.arange(matrix.n_docs), idx].sum())


def log_likelihood_gradient(matrix: DocTermMatrix, lam: np.ndarray, classes: Sequence[int]) -> np.ndarray:
    """Gradient of the conditional log-likelihood with respect to lam.

    Equals n_docs * (empirical - model) feature expectations, which is why
    ascending the likelihood drives the expectation gap to zero.
    """
    if matrix.labels is None:
        raise TrainingError("matrix has no labels")
    p = np.exp(_log_proba(matrix.rows, lam))
    return matrix.rows.T @ (_class_matrix(matrix.labels, classes) - p)


def feature_expectation_gap(model: MaxentModel, matrix: DocTermMatrix) -> float:
    """Max over (term, class) of |empirical - model| expected feature value.

    Both expectations average uniformly over the given documents.  At the
    unregularized optimum this is zero: the defining constraint of the model.
    """
    if matrix.labels is None or matrix.n_docs == 0:
        raise TrainingError("gap needs a non-empty labeled matrix")
    y = _class_matrix(matrix.labels, model.classes)
    p = np.exp(_log_proba(matrix.rows, model.lam))
    empirical = matrix.rows.T @ y / matrix.n_docs
    modeled = matrix.rows.T @ p / matrix.n_docs
    return float(np.abs(empirical - modeled).max())


def train_maxent(
    matrix: DocTermMatrix,
    max_iters: int = 500,
    step: float = 1.0,
    tolerance: float = 1e-4,
    l2: float = 0.0,
    classes: Sequence[int] | None = None,
) -> MaxentModel:
    """Full-batch gradient ascent with backtracking step halving.

    Deterministic from a zero start.  Stops when the feature expectation gap
    drops below tolerance, when max_iters is reached, or when no uphill step
    can be found (numerically at the optimum).  An optional L2 penalty keeps
    parameters finite on separable corpora.
    """
    if matrix.labels is None or matrix.n_docs == 0:
        raise TrainingError("training needs a non-empty labeled matrix")
    present = set(int(v) for v in matrix.labels)
    cls_list = tuple(sorted(present)) if classes is None else tuple(sorted(classes))
    for cls in cls_list:
        if cls not in present:
            raise TrainingError(f"class {cls} has no training examples")

    x = matrix.rows
    n, m = x.shape
    k = len(cls_list)
    y = _class_matrix(matrix.labels, cls_list)
    lam = np.zeros((m, k))

    def loglik(l: np.ndarray) -> float:
        logp = _log_proba(x, l)
        ll = float((logp * y).sum()) - 0.5 * l2 * float((l * l).sum())
        return ll

    current_ll = loglik(lam)
    current_p = np.exp(_log_proba(x, lam))
    gap = float(np.abs(x.T @ (y - current_p)).max()) / n
    stop_reason = "max_iters"
    iterations = 0
    s = step

    for t in range(max_iters):
        if gap < tolerance:
            stop_reason = "tolerance"
            break
        grad = x.T @ (y - current_p) - l2 * lam
        accepted = False
        s = min(step, s * 2.0)  # probe back up after earlier halvings
        for _ in range(60):
            cand = lam + s * grad
            cand_ll = loglik(cand)
            if not np.isfinite(cand_ll):
                raise TrainingError(f"non-finite likelihood at iteration {t}")
            if cand_ll >= current_ll:
                accepted = True
                break
            s *= 0.5
        if not accepted:
            stop_reason = "stalled"
            break
        lam = cand
        current_ll = cand_ll
        current_p = np.exp(_log_proba(x, lam))
        gap = float(np.abs(x.T @ (y - current_p)).max()) / n
        iterations = t + 1
    else:
        if gap < tolerance:
            stop_reason = "tolerance"

    diagnostics = TrainingDiagnostics(
        iterations=iterations,
        final_gap=gap,
        final_log_likelihood=current_ll,
        converged=gap < tolerance,
        stop_reason=stop_reason,
    )
    return MaxentModel(lam=lam, classes=cls_list, vocabulary=matrix.vocabulary, diagnostics=diagnostics)


def classify_maxent(model: MaxentModel, transcript: str) -> int:
    """tokenize -> vectorize -> argmax of P(c|x); lowest class id on ties."""
    x = vectorize(tokenize(transcript), model.vocabulary)
    return model.classes[int(np.argmax(predict_proba(model, x)))]


def model_to_dict(model: MaxentModel) -> dict:
    doc = {
        "format": "phrasebench-model",
        "kind": "maxent",
        "version": 1,
        "vocabulary": list(model.vocabulary.terms),
        "classes": list(model.classes),
        "lambda": [list(map(float, row)) for row in model.lam],
    }
    if model.diagnostics is not None:
        doc["diagnostics"] = {
            "iterations": model.diagnostics.iterations,
            "final_gap": model.diagnostics.final_gap,
            "final_log_likelihood": model.diagnostics.final_log_likelihood,
            "converged": model.diagnostics.converged,
            "stop_reason": model.diagnostics.stop_reason,
        }
    if model.phrase_texts is not None:
        doc["phrases"] = list(model.phrase_texts)
    return doc


def model_from_dict(doc: dict) -> MaxentModel:
    if doc.get("kind") != "maxent":
        raise ValueError(f"not a maxent model document: kind={doc.get('kind')!r}")
    terms = tuple(doc["vocabulary"])
    diag = None
    if "diagnostics" in doc:
        diag = TrainingDiagnostics(**doc["diagnostics"])
    return MaxentModel(
        lam=np.array(doc["lambda"], dtype=float),
        classes=tuple(int(c) for c in doc["classes"]),
        vocabulary=Vocabulary(terms=terms, index={t: i for i, t in enumerate(terms)}),
        diagnostics=diag,
        phrase_texts=tuple(doc["phrases"]) if "phrases" in doc else None,
    )


def save_maxent(model: MaxentModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2, sort_keys=True), encoding="utf-8")


def load_maxent(path: str | Path) -> MaxentModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
