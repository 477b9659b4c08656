"""Repeated, stratified, nested cross-validation over cost and SVD rank.

Fold plans depend only on the group labels and a seed, so one plan per
repeat is shared by every feature kind. Within an outer training set the
``(k, c)`` pair with the best mean inner balanced accuracy is chosen
(ties: smaller ``k``, then smaller ``c``), refit on the whole outer
training set and scored on the held-out fold.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .classifier import ConfusionMatrix, balanced_accuracy, predict_many, train

DEFAULT_COSTS: tuple[float, ...] = tuple(10.0 ** e for e in range(-1, 9))
DEFAULT_KS: tuple = (tuple(range(1, 11)) + tuple(range(15, 55, 5))
                     + tuple(range(100, 500, 50)) + ("full",))


class LeakageError(RuntimeError):
    """A held-out subject reached a training step of its own fold."""


@dataclass(frozen=True)
class HyperGrid:
    costs: tuple[float, ...] = DEFAULT_COSTS
    ks: tuple = DEFAULT_KS

    def __post_init__(self):
        if not self.costs or any(not c > 0 for c in self.costs):
            raise ValueError("costs must be a non-empty list of positive values")
        if not self.ks:
            raise ValueError("ks must be non-empty")
        for k in self.ks:
            if not (k is None or k == "full" or (isinstance(k, (int, np.integer)) and k >= 1)):
                raise ValueError(f"invalid k {k!r}")

    def sorted_costs(self) -> tuple[float, ...]:
        return tuple(sorted(self.costs))

    def sorted_ks(self) -> tuple:
        def key(k):
            return math.inf if k in (None, "full") else k
        return tuple(sorted(dict.fromkeys(self.ks), key=key))


def _k_rank(k) -> float:
    return math.inf if k in (None, "full") else float(k)


def _rng(*key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(x) for x in key])))


def stratified_folds(ids: Sequence[str], groups: Sequence, n_folds: int,
                     rng: np.random.Generator) -> dict[str, int]:
    """Assign each subject a fold so that every group's fold sizes differ by <= 1."""
    if len(ids) == 0:
        raise ValueError("empty cohort")
    groups = list(groups)
    out: dict[str, int] = {}
    offset = 0
    for g in sorted(set(groups), key=str):
        members = [i for i, gg in zip(ids, groups) if gg == g]
        perm = rng.permutation(len(members))
        for pos, m in enumerate(perm):
            out[members[m]] = (offset + pos) % n_folds
        offset = (offset + len(members)) % n_folds
    return out


@dataclass(frozen=True)
class CvPlan:
    """Outer fold per subject plus an inner fold map for each outer fold."""

    repeat: int
    seed: int
    outer: Mapping[str, int]
    inner: tuple[Mapping[str, int], ...]
    n_folds: int

    def test_ids(self, fold: int) -> list[str]:
        return [s for s, f in self.outer.items() if f == fold]

    def train_ids(self, fold: int) -> list[str]:
        return [s for s, f in self.outer.items() if f != fold]


def make_plan(subject_ids: Sequence[str], groups: Sequence, seed: int, repeat: int = 1,
              n_folds: int = 10, inner_folds: int = 10) -> CvPlan:
    ids = list(subject_ids)
    if len(ids) == 0:
        raise ValueError("empty cohort")
    if len(set(ids)) != len(ids):
        raise ValueError("subject ids must be unique")
    label = dict(zip(ids, groups))
    outer = stratified_folds(ids, [label[i] for i in ids], n_folds, _rng(seed, repeat, 0))
    inner = []
    for f in range(n_folds):
        tr = [i for i in ids if outer[i] != f]
        inner.append(stratified_folds(tr, [label[i] for i in tr], inner_folds,
                                      _rng(seed, repeat, f + 1)) if tr else {})
    return CvPlan(repeat, seed, dict(outer), tuple(inner), n_folds)


def make_plans(subject_ids: Sequence[str], groups: Sequence, seed: int, n_repeats: int = 10,
               n_folds: int = 10, inner_folds: int = 10) -> list[CvPlan]:
    return [make_plan(subject_ids, groups, seed, r, n_folds, inner_folds)
            for r in range(1, n_repeats + 1)]


@dataclass
class FoldResult:
    repeat: int
    fold: int
    kind: str
    chosen_c: float
    chosen_k: object
    inner_score: float
    balanced_accuracy: float
    confusion: ConfusionMatrix


@dataclass
class CvResult:
    kind: str
    classes: tuple
    folds: list[FoldResult] = field(default_factory=list)

    def repeat_accuracies(self) -> dict[int, float]:
        """Mean outer-fold balanced accuracy per repeat."""
        by: dict[int, list[float]] = {}
        for fr in self.folds:
            if not math.isnan(fr.balanced_accuracy):
                by.setdefault(fr.repeat, []).append(fr.balanced_accuracy)
        return {r: float(np.mean(v)) for r, v in sorted(by.items())}

    def mean_accuracy(self) -> float:
        return float(np.mean(list(self.repeat_accuracies().values())))

    def confusion(self) -> ConfusionMatrix:
        total = ConfusionMatrix(np.zeros((len(self.classes),) * 2, dtype=np.int64), self.classes)
        for fr in self.folds:
            total = total + fr.confusion
        return total


FeatureGetter = Callable[[str, object], np.ndarray]


class _Design:
    """Builds design matrices and refuses rows from tainted subjects."""

    def __init__(self, getter: FeatureGetter, labels: Mapping[str, object]):
        self.getter = getter
        self.labels = labels

    def build(self, ids: Sequence[str], k, tainted: frozenset = frozenset()):
        bad = tainted.intersection(ids)
        if bad:
            raise LeakageError(f"held-out subject(s) {sorted(bad)} in a training set")
        X = np.array([self.getter(i, k) for i in ids], dtype=float)
        y = np.array([self.labels[i] for i in ids])
        return X, y


def _score(model, X, y, classes) -> float:
    cm = ConfusionMatrix.from_labels(y, predict_many(model, X), classes)
    return balanced_accuracy(cm, skip_empty=True)


def _select(design: _Design, plan: CvPlan, fold: int, grid: HyperGrid, classes,
            tainted: frozenset) -> tuple[float, object, float]:
    train_ids = plan.train_ids(fold)
    inner = plan.inner[fold]
    inner_folds = sorted(set(inner.values()))
    best = (-math.inf, None, None)
    for k in grid.sorted_ks():
        scores = np.zeros(len(grid.costs))
        counts = np.zeros(len(grid.costs))
        for f in inner_folds:
            tr = [i for i in train_ids if inner[i] != f]
            te = [i for i in train_ids if inner[i] == f]
            Xtr, ytr = design.build(tr, k, tainted)
            if len(set(ytr.tolist())) < 2 or not te:
                continue
            Xte, yte = design.build(te, k, tainted)
            model = None
            for ci, c in enumerate(grid.sorted_costs()):
                model = train(Xtr, ytr, c, warm_start=model)
                scores[ci] += _score(model, Xte, yte, classes)
                counts[ci] += 1
        for ci, c in enumerate(grid.sorted_costs()):
            if counts[ci] == 0:
                continue
            s = scores[ci] / counts[ci]
            # strict improvement only: earlier (smaller k, then smaller c) wins ties
            if s > best[0]:
                best = (s, k, c)
    if best[0] == -math.inf:
        return grid.sorted_costs()[0], grid.sorted_ks()[0], math.nan
    return best[2], best[1], best[0]


def _run_fold(args) -> FoldResult:
    design, plan, fold, grid, classes, kind = args
    test = plan.test_ids(fold)
    tainted = frozenset(test)
    c, k, inner_score = _select(design, plan, fold, grid, classes, tainted)
    Xtr, ytr = design.build(plan.train_ids(fold), k, tainted)
    if not test:
        empty = ConfusionMatrix(np.zeros((len(classes),) * 2, dtype=np.int64), tuple(classes))
        return FoldResult(plan.repeat, fold, kind, c, k, inner_score, math.nan, empty)
    Xte, yte = design.build(test, k)
    model = train(Xtr, ytr, c)
    pred = predict_many(model, Xte)
    cm = ConfusionMatrix.from_labels(yte, pred, classes)
    return FoldResult(plan.repeat, fold, kind, c, k, inner_score,
                      balanced_accuracy(cm, skip_empty=True), cm)


def nested_cv(subject_ids: Sequence[str], groups: Sequence, kind: str, grid: HyperGrid,
              plans: Sequence[CvPlan], features: FeatureGetter | Mapping, jobs: int = 1) -> CvResult:
    """Nested cross-validation of one feature kind over all plans.

    ``features(subject_id, k)`` returns the subject's feature vector for
    SVD rank ``k`` (a mapping keyed by ``(subject_id, k)`` also works).
    Kinds that do not depend on ``k`` should use a grid with ``ks=(None,)``.
    """
    labels = dict(zip(subject_ids, groups))
    classes = tuple(sorted(set(labels.values()), key=str))
    if len(classes) < 2:
        raise ValueError("nested_cv needs at least two groups")
    if isinstance(features, Mapping):
        table = {key: np.asarray(v, dtype=float) for key, v in features.items()}
    else:
        table = {(s, k): np.asarray(features(s, k), dtype=float)
                 for s in subject_ids for k in grid.sorted_ks()}
    design = _Design(_TableGetter(table), labels)
    tasks = [(design, plan, f, grid, classes, kind)
             for plan in plans for f in range(plan.n_folds)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            folds = list(pool.map(_run_fold, tasks))
    else:
        folds = [_run_fold(t) for t in tasks]
    folds.sort(key=lambda fr: (fr.repeat, fr.fold))
    return CvResult(kind, classes, folds)


class _TableGetter:
    """Picklable lookup into a precomputed feature table."""

    def __init__(self, table):
        self.table = table

    def __call__(self, sid, k):
        return self.table[(sid, k)]


def fmt_k(k) -> str:
    return "full" if k in (None, "full") else str(k)


def write_results_csv(path, results: Sequence[CvResult]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["repeat", "fold", "kind", "chosen_c", "chosen_k", "inner_score",
                    "balanced_accuracy"])
        for res in results:
            for fr in res.folds:
                w.writerow([fr.repeat, fr.fold + 1, fr.kind, repr(fr.chosen_c),
                            "-" if res.kind == "amplitude" else fmt_k(fr.chosen_k),
                            repr(fr.inner_score), repr(fr.balanced_accuracy)])


def write_summary_csv(path, results: Sequence[CvResult]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "repeat", "balanced_accuracy"])
        for res in results:
            for r, acc in res.repeat_accuracies().items():
                w.writerow([res.kind, r, repr(acc)])


def write_confusion_json(path, results: Sequence[CvResult]) -> None:
    doc = {"schema": "dmfreq.confusion/1",
           "kinds": {res.kind: res.confusion().to_dict() for res in results}}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
