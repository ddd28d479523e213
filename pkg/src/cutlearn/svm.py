"""Soft-margin SVM with an RBF kernel, trained by sequential minimal
optimization on the dual:

    max  sum(a) - 1/2 sum_dd' l_d l_d' a_d a_d' K(o_d, o_d')
    s.t. sum(a * l) = 0,  0 <= a <= C.

The working pair is the maximal KKT violator (most violated index from
above vs. below); the intercept is recovered from the margin support
vectors, or from the midpoint of the interval the bound vectors leave for
it.  Features are z-scored by default because the two cut features live on
very different scales and the RBF kernel is scale-sensitive.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .benders import CutObservation
from .phase1 import RowStore, transform_labels
from .solver_core import InputError

KKT_TOL = 1e-6
MAX_PAIR_UPDATES = 100_000
_SV_KEEP_TOL = 1e-9
_MARGIN_BAND = 1e-6


def rbf_kernel(o1, o2, gamma):
    """exp(-gamma * squared distance); 1 at zero distance."""
    o1 = np.asarray(o1, dtype=float)
    o2 = np.asarray(o2, dtype=float)
    if o1.shape != o2.shape:
        raise InputError(f"feature dimensions differ: {o1.shape} vs {o2.shape}")
    if gamma <= 0:
        raise InputError("gamma must be positive")
    d = o1 - o2
    return float(np.exp(-gamma * (d @ d)))


def _kernel_matrix(A, B, gamma):
    sq = (np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :]
          - 2.0 * A @ B.T)
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


@dataclass
class FeatureScaler:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X):
        std = X.std(axis=0)
        std = np.where(std < 1e-12, 1.0, std)
        return cls(X.mean(axis=0), std)

    def transform(self, X):
        return (X - self.mean) / self.std


@dataclass
class SvmModel:
    """Trained classifier: support vectors live in the scaled feature
    space; coefficients are label-signed dual weights l_s * a_s."""

    support_vectors: np.ndarray
    coefficients: np.ndarray
    intercept: float
    gamma: float
    C: float
    scaler: FeatureScaler | None = None
    constant_label: int | None = None   # single-class training data
    dual_objective: float = 0.0

    @property
    def n_support(self):
        return 0 if self.constant_label is not None else len(self.coefficients)


def _features_labels(data):
    X = np.array([np.asarray(row.features.as_vector(), dtype=float)
                  if isinstance(row.features, CutObservation)
                  else np.asarray(row.features, dtype=float)
                  for row in data])
    y = np.array([row.label for row in data], dtype=float)
    return X, y


def _smo(K, y, C):
    """SMO coordinate ascent on the dual.

    The first working index is the maximal KKT violator from above; the
    partner is chosen by the second-order rule (largest guaranteed
    objective gain), which avoids the zigzagging the plain
    most-violating-pair rule suffers on clustered kernels.
    """
    n = y.size
    a = np.zeros(n)
    g = np.zeros(n)             # sum_e a_e l_e K(d, e)
    diag = np.diag(K).copy()
    for _ in range(MAX_PAIR_UPDATES):
        m = y - g               # l_d - g_d; equals b for margin vectors
        up = ((y > 0) & (a < C - 1e-12)) | ((y < 0) & (a > 1e-12))
        low = ((y < 0) & (a < C - 1e-12)) | ((y > 0) & (a > 1e-12))
        if not up.any() or not low.any():
            break
        i = int(np.flatnonzero(up)[np.argmax(m[up])])
        low_idx = np.flatnonzero(low)
        if m[i] - float(m[low_idx].min()) <= KKT_TOL:
            break
        gaps = m[i] - m[low_idx]
        improving = gaps > 0
        low_idx = low_idx[improving]
        gaps = gaps[improving]
        etas = np.maximum(diag[i] + diag[low_idx] - 2.0 * K[i, low_idx], 1e-12)
        j = int(low_idx[np.argmax(gaps * gaps / etas)])
        eta = max(K[i, i] + K[j, j] - 2.0 * K[i, j], 1e-12)
        # Platt's pair step with errors E_d = g_d + b - l_d = b - m_d
        delta = y[j] * (m[j] - m[i]) / eta
        aj_old, ai_old = a[j], a[i]
        if y[i] != y[j]:
            lo = max(0.0, aj_old - ai_old)
            hi = min(C, C + aj_old - ai_old)
        else:
            lo = max(0.0, ai_old + aj_old - C)
            hi = min(C, ai_old + aj_old)
        aj = min(max(aj_old + delta, lo), hi)
        ai = ai_old + y[i] * y[j] * (aj_old - aj)
        if abs(aj - aj_old) < 1e-14:
            break
        a[j], a[i] = aj, ai
        g += (ai - ai_old) * y[i] * K[:, i] + (aj - aj_old) * y[j] * K[:, j]
    return a, g


def _recover_intercept(a, g, y, C):
    m = y - g
    margin = (a > _MARGIN_BAND) & (a < C - _MARGIN_BAND)
    if margin.any():
        return float(m[margin].mean())
    lower = ((a <= _MARGIN_BAND) & (y > 0)) | ((a >= C - _MARGIN_BAND) & (y < 0))
    upper = ((a <= _MARGIN_BAND) & (y < 0)) | ((a >= C - _MARGIN_BAND) & (y > 0))
    lo = m[lower].max() if lower.any() else None
    hi = m[upper].min() if upper.any() else None
    if lo is None:
        return float(hi)
    if hi is None:
        return float(lo)
    return float(0.5 * (lo + hi))


def _fit_dual(X, y, C, gamma, standardize):
    """Dual fit returning the full coefficient vector and workspace;
    train_svm packages the result, tests inspect it directly."""
    scaler = FeatureScaler.fit(X) if standardize else None
    Xs = scaler.transform(X) if scaler else X
    K = _kernel_matrix(Xs, Xs, gamma)
    a, g = _smo(K, y, C)
    b = _recover_intercept(a, g, y, C)
    return {"a": a, "g": g, "b": b, "K": K, "Xs": Xs, "scaler": scaler}


def train_svm(data, C, gamma, standardize=True) -> SvmModel:
    """Fit the dual on labeled rows.  Single-class input produces a
    constant classifier (the equality constraint forces all weights to
    zero, leaving nothing to separate)."""
    if len(data) == 0:
        raise InputError("training data is empty")
    if C <= 0 or gamma <= 0:
        raise InputError("C and gamma must be positive")
    X, y = _features_labels(data)
    if not np.all(np.isfinite(X)):
        raise InputError("non-finite feature value")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise InputError("labels must be -1 or 1")
    if np.unique(y).size == 1:
        return SvmModel(support_vectors=np.zeros((0, X.shape[1])),
                        coefficients=np.zeros(0), intercept=0.0,
                        gamma=gamma, C=C, scaler=None,
                        constant_label=int(y[0]))
    fit = _fit_dual(X, y, C, gamma, standardize)
    a, g = fit["a"], fit["g"]
    dual_obj = float(a.sum() - 0.5 * (a * y) @ g)
    keep = a > _SV_KEEP_TOL
    return SvmModel(support_vectors=fit["Xs"][keep].copy(),
                    coefficients=(a * y)[keep],
                    intercept=fit["b"], gamma=gamma, C=C, scaler=fit["scaler"],
                    dual_objective=dual_obj)


def decision_values(model: SvmModel, X):
    """Raw scores for a batch of observations (rows of X, unscaled)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if model.constant_label is not None:
        return np.full(X.shape[0], float(model.constant_label))
    Xs = model.scaler.transform(X) if model.scaler else X
    K = _kernel_matrix(Xs, model.support_vectors, model.gamma)
    return K @ model.coefficients + model.intercept


def predict(model: SvmModel, obs):
    """(label, raw score).  A zero score classifies as +1 so the enclosing
    algorithm always makes progress on knife-edge cuts; scores within
    1e-12 of zero count as that tie."""
    if isinstance(obs, CutObservation):
        obs = obs.as_vector()
    obs = np.asarray(obs, dtype=float)
    if model.constant_label is None and obs.shape != (model.support_vectors.shape[1],):
        raise InputError(
            f"expected {model.support_vectors.shape[1]} features, got {obs.shape}")
    u = float(decision_values(model, obs[None, :])[0])
    return (1 if u >= -1e-12 else -1), u


def hinge_loss(u, label):
    if label not in (-1, 1):
        raise InputError("label must be -1 or 1")
    return max(0.0, 1.0 - label * u)


def accuracy(model: SvmModel, data) -> float:
    """Percentage of rows whose predicted label matches."""
    if len(data) == 0:
        raise InputError("cannot score an empty dataset")
    X, y = _features_labels(data)
    u = decision_values(model, X)
    predicted = np.where(u >= -1e-12, 1.0, -1.0)
    return 100.0 * float(np.mean(predicted == y))


def _stratified_folds(labels, n_folds):
    fold_of = np.empty(labels.size, dtype=int)
    for cls in (-1.0, 1.0):
        idx = np.flatnonzero(labels == cls)
        fold_of[idx] = np.arange(idx.size) % n_folds
    return fold_of


def grid_search(rows, delta, c_grid, gamma_grid, n_folds=5, standardize=True):
    """Pick (C, gamma) by mean stratified cross-validation accuracy on the
    rows labeled at the given threshold; ties prefer smaller C, then
    smaller gamma."""
    if isinstance(rows, RowStore):
        rows = rows.rows
    if n_folds < 2:
        raise InputError("need at least 2 folds")
    labeled = transform_labels(rows, delta)
    if len(labeled) < n_folds:
        raise InputError(f"{len(labeled)} rows cannot fill {n_folds} folds")
    labels = np.array([r.label for r in labeled], dtype=float)
    fold_of = _stratified_folds(labels, n_folds)
    best = None
    for C in sorted(set(float(c) for c in c_grid)):
        for gamma in sorted(set(float(g) for g in gamma_grid)):
            scores = []
            for fold in range(n_folds):
                train = [r for r, f in zip(labeled, fold_of) if f != fold]
                val = [r for r, f in zip(labeled, fold_of) if f == fold]
                if not train or not val:
                    continue
                model = train_svm(train, C, gamma, standardize=standardize)
                scores.append(accuracy(model, val))
            mean_acc = float(np.mean(scores)) if scores else 0.0
            if best is None or mean_acc > best[0] + 1e-9:
                best = (mean_acc, C, gamma)
    return best[1], best[2]


# ---------------------------------------------------------------------------
# feature scaling for classifier transfer between instances
# ---------------------------------------------------------------------------

@dataclass
class TransferScaling:
    """Dimensionless feature scaling so classifiers trained on one
    facility-location instance can score cuts from another: violations are
    divided by the instance's relative total transport cost, cut counts by
    the size of its transport network."""

    violation_scale: float
    count_scale: float

    @classmethod
    def from_cflp(cls, data):
        mean_cost = float(data.transport_costs.mean())
        mean_setup = float(data.setup_costs.mean())
        if mean_setup <= 0:
            raise InputError("setup costs must not all be zero")
        violation_scale = float(data.demands.sum()) * mean_cost / mean_setup
        count_scale = float(data.n_facilities * data.n_customers)
        return cls(violation_scale, count_scale)

    def __post_init__(self):
        if self.violation_scale == 0 or self.count_scale == 0:
            raise InputError("transfer scaling factors must be nonzero")


def scale_features_transfer(obs, scaling: TransferScaling):
    if isinstance(obs, CutObservation):
        obs = obs.as_vector()
    obs = np.asarray(obs, dtype=float)
    return np.array([obs[0] / scaling.violation_scale,
                     obs[1] / scaling.count_scale])


# ---------------------------------------------------------------------------
# serialization (JSON; repr-exact floats)
# ---------------------------------------------------------------------------

def save_model(model: SvmModel, fh):
    doc = {
        "support_vectors": model.support_vectors.tolist(),
        "coefficients": model.coefficients.tolist(),
        "intercept": model.intercept,
        "gamma": model.gamma,
        "C": model.C,
        "scaler": None if model.scaler is None else {
            "mean": model.scaler.mean.tolist(),
            "std": model.scaler.std.tolist(),
        },
        "constant_label": model.constant_label,
        "dual_objective": model.dual_objective,
    }
    json.dump(doc, fh)


def load_model(fh) -> SvmModel:
    doc = json.load(fh)
    scaler = None
    if doc["scaler"] is not None:
        scaler = FeatureScaler(np.array(doc["scaler"]["mean"]),
                               np.array(doc["scaler"]["std"]))
    sv = np.array(doc["support_vectors"], dtype=float)
    if sv.size == 0:
        sv = sv.reshape(0, 0 if sv.ndim < 2 else sv.shape[1])
    return SvmModel(support_vectors=sv,
                    coefficients=np.array(doc["coefficients"], dtype=float),
                    intercept=doc["intercept"], gamma=doc["gamma"], C=doc["C"],
                    scaler=scaler, constant_label=doc["constant_label"],
                    dual_objective=doc.get("dual_objective", 0.0))
