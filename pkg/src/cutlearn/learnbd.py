"""Benders decomposition with learned cut selection.

Each iteration prices every scenario as usual, but a classifier decides
per violated cut whether it enters the master, using the cut's violation
and its scenario's prior cut count as features.  When the classifier
rejects every candidate while the gap is still open, it is retrained down
a decreasing list of labeling thresholds (a less strict notion of a
valuable cut); if the list runs out, the run falls back to classic
behavior and adds every violated cut from then on, which restores the
classic method's convergence guarantee.

Retraining never consumes an iteration: the iteration counter advances
only when the master is solved.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .benders import (
    STATUS_CONVERGED, BendersResult, run_decomposition,
)
from .phase1 import RowStore, transform_labels
from .solver_core import InputError
from .svm import predict, train_svm

FALLBACK = "fallback"


@dataclass
class DeltaSchedule:
    """Strictly decreasing labeling thresholds walked during retraining."""

    values: list
    index: int = 0

    def __post_init__(self):
        if not self.values:
            raise InputError("threshold schedule is empty")
        if any(b >= a for a, b in zip(self.values, self.values[1:])):
            raise InputError("threshold schedule must be strictly decreasing")

    @classmethod
    def default(cls):
        # 1.20 down to 0.70 in steps of 0.01
        return cls([round(1.2 - 0.01 * i, 2) for i in range(51)])

    @property
    def exhausted(self):
        return self.index >= len(self.values)

    @property
    def current(self):
        return None if self.exhausted else self.values[self.index]

    def advance(self):
        if not self.exhausted:
            self.index += 1


@dataclass
class LearnBdResult:
    status: str
    objective: float
    x: np.ndarray | None
    lb: float
    ub: float
    gap_pct: float
    iterations: int
    cuts_total: int
    retrain_count: int
    delta_trace: list          # (delta or "fallback", first_iter, last_iter)
    fallback_used: bool
    state: object
    train_time_s: float        # classifier training time, outside solve time


class _ClassifierBank:
    """Lazily trained model per threshold, from the persisted raw rows."""

    def __init__(self, rows, C, gamma, feature_transform=None,
                 classifier_factory=None, standardize=True):
        self.rows = rows
        self.C = C
        self.gamma = gamma
        self.feature_transform = feature_transform
        self.classifier_factory = classifier_factory
        self.standardize = standardize
        self._cache = {}
        self.train_time_s = 0.0

    def model_for(self, delta):
        if delta not in self._cache:
            t0 = time.perf_counter()
            if self.classifier_factory is not None:
                self._cache[delta] = self.classifier_factory(delta)
            else:
                labeled = transform_labels(self.rows, delta)
                if self.feature_transform is not None:
                    labeled = [type(r)(self.feature_transform(r.features),
                                       r.label, r.delta) for r in labeled]
                self._cache[delta] = train_svm(labeled, self.C, self.gamma,
                                               standardize=self.standardize)
            self.train_time_s += time.perf_counter() - t0
        return self._cache[delta]


def _classify(model, observation, feature_transform):
    features = observation.as_vector()
    if feature_transform is not None:
        features = feature_transform(observation)
    if hasattr(model, "predict_label"):
        return model.predict_label(features)
    return predict(model, features)[0]


def run_learnbd(problem, rows, tolerance_pct, C=1.0, gamma=1.0,
                schedule: DeltaSchedule | None = None, max_iterations=10000,
                time_limit_s=None, feature_transform=None,
                classifier_factory=None, standardize=True) -> LearnBdResult:
    """Learning-guided decomposition run.

    rows is the raw Phase-1 store (RowStore or list of TrainingRow);
    classifier_factory(delta) may replace SVM training entirely (stubs,
    pre-trained models).  feature_transform maps a CutObservation to the
    feature vector models were trained on (classifier transfer).
    """
    if schedule is None:
        schedule = DeltaSchedule.default()
    if isinstance(rows, RowStore):
        rows = rows.rows
    if classifier_factory is None and not rows:
        raise InputError("phase-1 rows required to train the cut classifier")
    bank = _ClassifierBank(rows, C, gamma, feature_transform,
                           classifier_factory, standardize)
    retrains = 0
    fallback = {"active": False}
    trace = []   # (delta_or_fallback, iteration) transitions

    def current_delta():
        return FALLBACK if fallback["active"] else schedule.current

    def select_cuts(candidates, state):
        nonlocal retrains
        if fallback["active"]:
            chosen = list(candidates)
        else:
            chosen = []
            while True:
                model = bank.model_for(schedule.current)
                chosen = [cut for cut in candidates
                          if _classify(model, cut.observation,
                                       feature_transform) == 1]
                if chosen:
                    break
                schedule.advance()
                retrains += 1
                if schedule.exhausted:
                    fallback["active"] = True
                    chosen = list(candidates)
                    break
        trace.append((current_delta(), state.iteration))
        return chosen

    def log_extras(state):
        value = current_delta()
        return (None if value == FALLBACK else value, retrains)

    base: BendersResult = run_decomposition(
        problem, tolerance_pct, select_cuts=select_cuts,
        max_iterations=max_iterations, time_limit_s=time_limit_s,
        log_extras=log_extras)

    delta_trace = _compress_trace(trace)
    return LearnBdResult(
        status=base.status, objective=base.objective, x=base.x,
        lb=base.lb, ub=base.ub, gap_pct=base.gap_pct,
        iterations=base.iterations, cuts_total=base.cuts_total,
        retrain_count=retrains, delta_trace=delta_trace,
        fallback_used=fallback["active"], state=base.state,
        train_time_s=bank.train_time_s)


def _compress_trace(transitions):
    """Collapse per-iteration threshold values into iteration ranges."""
    ranges = []
    for value, iteration in transitions:
        if ranges and ranges[-1][0] == value:
            ranges[-1] = (value, ranges[-1][1], iteration)
        else:
            ranges.append((value, iteration, iteration))
    return ranges


class ConstantClassifier:
    """Test/fallback stub that labels every cut the same way."""

    def __init__(self, label):
        self.label = int(label)

    def predict_label(self, features):
        return self.label
