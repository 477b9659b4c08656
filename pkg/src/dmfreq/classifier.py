"""L1-regularized logistic regression, one-vs-rest, with class oversampling.

Each binary problem minimizes ``||w||_1 + c * sum_i log(1 + exp(-y_i w.x_i))``
where ``x_i`` carries a trailing constant 1 so the bias is penalized like
any other weight. The solver is coordinate descent with a one-dimensional
Newton direction and Armijo backtracking, so the objective never increases
between sweeps.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np

MODEL_SCHEMA = "dmfreq.linear_model/1"
DEFAULT_TOL = 1e-6
DEFAULT_MAX_SWEEPS = 10_000


@numba.njit(cache=True)
def _log1pexp_neg(m):
    # log(1 + exp(-m)) without overflow
    if m > 0:
        return np.log1p(np.exp(-m))
    return -m + np.log1p(np.exp(m))


@numba.njit(cache=True)
def _objective(w, z, y, c):
    loss = 0.0
    for i in range(z.shape[0]):
        loss += _log1pexp_neg(y[i] * z[i])
    return np.abs(w).sum() + c * loss


@numba.njit(cache=True)
def _cd_solve(X, y, c, w, tol, max_sweeps, trace):
    n, d = X.shape
    z = X @ w
    # e[i] = exp(-|m_i|) for the current margins, reused by gradient and line search
    e = np.empty(n)
    e_try = np.empty(n)
    loss = 0.0
    for i in range(n):
        m = y[i] * z[i]
        e[i] = np.exp(-abs(m))
        loss += np.log1p(e[i]) + (-m if m < 0 else 0.0)
    obj = np.abs(w).sum() + c * loss
    trace[0] = obj
    sweeps = 0
    converged = False
    while sweeps < max_sweeps:
        for j in range(d):
            g = 0.0
            h = 0.0
            for i in range(n):
                q = 1.0 / (1.0 + e[i])
                # s = sigmoid(m), r = 1 - s
                if y[i] * z[i] > 0:
                    s, r = q, e[i] * q
                else:
                    s, r = e[i] * q, q
                xij = X[i, j]
                g -= y[i] * xij * r
                h += xij * xij * s * r
            g *= c
            h = c * h + 1e-12
            wj = w[j]
            if g + 1.0 <= h * wj:
                step = -(g + 1.0) / h
            elif g - 1.0 >= h * wj:
                step = -(g - 1.0) / h
            else:
                step = -wj
            if step == 0.0:
                continue
            decrease = g * step + abs(wj + step) - abs(wj)
            lam = 1.0
            for _ in range(40):
                new_loss = 0.0
                for i in range(n):
                    m = y[i] * (z[i] + lam * step * X[i, j])
                    e_try[i] = np.exp(-abs(m))
                    new_loss += np.log1p(e_try[i]) + (-m if m < 0 else 0.0)
                diff = abs(wj + lam * step) - abs(wj) + c * (new_loss - loss)
                if diff <= 0.01 * lam * decrease:
                    w[j] = wj + lam * step
                    for i in range(n):
                        z[i] += lam * step * X[i, j]
                        e[i] = e_try[i]
                    loss = new_loss
                    break
                lam *= 0.5
        sweeps += 1
        # recompute from z so accumulated rounding cannot drift into the stopping test
        new_obj = _objective(w, z, y, c)
        trace[sweeps] = new_obj
        if abs(obj - new_obj) <= tol * abs(new_obj):
            converged = True
            break
        obj = new_obj
    return sweeps, converged


def l1_logistic_objective(w: np.ndarray, X: np.ndarray, y: np.ndarray, c: float) -> float:
    """Objective on an already bias-augmented design and labels in {-1, +1}."""
    m = y * (X @ w)
    return float(np.abs(w).sum() + c * np.logaddexp(0.0, -m).sum())


def augment(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return np.hstack([X, np.ones((X.shape[0], 1))])


def solve_binary(X: np.ndarray, y: np.ndarray, c: float, w0: np.ndarray | None = None,
                 tol: float = DEFAULT_TOL, max_sweeps: int = DEFAULT_MAX_SWEEPS,
                 return_trace: bool = False):
    """Minimize the L1-logistic objective for labels ``y`` in {-1, +1}.

    ``X`` must already include the bias column. Returns
    ``(w, sweeps, converged)`` and, optionally, the per-sweep objective.
    """
    X = np.ascontiguousarray(X, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    w = np.zeros(X.shape[1]) if w0 is None else np.array(w0, dtype=float)
    trace = np.empty(max_sweeps + 1)
    sweeps, converged = _cd_solve(X, y, float(c), w, float(tol), int(max_sweeps), trace)
    if return_trace:
        return w, sweeps, converged, trace[: sweeps + 1].copy()
    return w, sweeps, converged


def oversample_indices(labels: Sequence) -> np.ndarray:
    """Indices that repeat minority-class samples cyclically to equal counts.

    Samples keep their original order within each class; the result lists
    classes in sorted order.
    """
    labels = np.asarray(labels)
    classes = np.unique(labels)
    groups = [np.flatnonzero(labels == cl) for cl in classes]
    target = max(g.size for g in groups)
    return np.concatenate([np.resize(g, target) for g in groups])


@dataclass
class LinearModel:
    """One-vs-rest weights; binary problems store one row scoring ``classes[1]``."""

    classes: list
    weights: np.ndarray
    bias: np.ndarray
    cost: float
    converged: bool = True
    iterations: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return self.weights.shape[1]

    def decision_values(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        d = X @ self.weights.T + self.bias
        if len(self.classes) == 2:
            d = np.hstack([-d, d])
        return d

    def to_json(self) -> str:
        doc = {
            "schema": MODEL_SCHEMA,
            "classes": [c.item() if hasattr(c, "item") else c for c in self.classes],
            "cost": self.cost,
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "LinearModel":
        doc = json.loads(text)
        if doc.get("schema") != MODEL_SCHEMA:
            raise ValueError(f"unsupported model schema {doc.get('schema')!r}")
        return cls(doc["classes"], np.array(doc["weights"], dtype=float),
                   np.array(doc["bias"], dtype=float), float(doc["cost"]),
                   doc["converged"], doc["iterations"])


def train(xs, ys: Sequence, c: float, *, tol: float = DEFAULT_TOL,
          max_sweeps: int = DEFAULT_MAX_SWEEPS, warm_start: LinearModel | None = None) -> LinearModel:
    """Fit an L1-regularized logistic model with cost ``c``.

    Minority classes are oversampled by repetition before fitting. A
    previous model with the same classes may be passed as ``warm_start``.
    """
    X = np.asarray([getattr(x, "values", x) for x in xs], dtype=float)
    ys = np.asarray(ys)
    if X.ndim != 2 or X.shape[0] != ys.shape[0]:
        raise ValueError("xs and ys must have matching lengths")
    if not np.all(np.isfinite(X)):
        raise ValueError("features contain non-finite values")
    if not c > 0:
        raise ValueError(f"cost must be positive, got {c}")
    classes = sorted(np.unique(ys).tolist())
    if len(classes) < 2:
        raise ValueError("training data contain a single class")
    idx = oversample_indices(ys)
    Xa = augment(X[idx])
    yb = ys[idx]
    targets = classes[1:] if len(classes) == 2 else classes
    weights, total, ok = [], 0, True
    for row, cl in enumerate(targets):
        y = np.where(yb == cl, 1.0, -1.0)
        w0 = None
        if warm_start is not None and warm_start.classes == classes:
            w0 = np.append(warm_start.weights[row], warm_start.bias[row])
        w, sweeps, conv = solve_binary(Xa, y, c, w0, tol, max_sweeps)
        weights.append(w)
        total += sweeps
        ok &= conv
    W = np.array(weights)
    return LinearModel(classes, W[:, :-1].copy(), W[:, -1].copy(), float(c), ok, total)


def predict(m: LinearModel, x) -> object:
    """Class label with the largest decision value; ties go to the lowest index."""
    return predict_many(m, np.atleast_2d(getattr(x, "values", x)))[0]


def predict_many(m: LinearModel, X) -> list:
    d = m.decision_values(X)
    return [m.classes[i] for i in np.argmax(d, axis=1)]


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes."""

    counts: np.ndarray
    classes: tuple

    @classmethod
    def from_labels(cls, y_true: Sequence, y_pred: Sequence, classes: Sequence) -> "ConfusionMatrix":
        classes = tuple(classes)
        pos = {c: i for i, c in enumerate(classes)}
        counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
        for t, p in zip(y_true, y_pred):
            counts[pos[t], pos[p]] += 1
        return cls(counts, classes)

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if self.classes != other.classes:
            raise ValueError("confusion matrices over different classes")
        return ConfusionMatrix(self.counts + other.counts, self.classes)

    def to_dict(self) -> dict:
        return {"classes": [str(c) for c in self.classes], "counts": self.counts.tolist()}


def balanced_accuracy(cm: ConfusionMatrix, skip_empty: bool = False) -> float:
    """Mean per-class recall.

    Classes with no test samples raise unless ``skip_empty`` is set, in
    which case only classes present are averaged.
    """
    rows = cm.counts.sum(axis=1)
    if (rows == 0).any():
        if not skip_empty:
            empty = [cm.classes[i] for i in np.flatnonzero(rows == 0)]
            raise ValueError(f"no test samples for class(es) {empty}")
        present = rows > 0
        if not present.any():
            raise ValueError("confusion matrix is empty")
        return float(np.mean(np.diag(cm.counts)[present] / rows[present]))
    return float(np.mean(np.diag(cm.counts) / rows))
