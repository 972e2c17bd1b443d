"""C-SVM on precomputed kernels, one-vs-one voting and repeated cross-validation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Sequence

import numpy as np
from sklearn.model_selection import KFold, StratifiedKFold

from .rng import substream_int

log = logging.getLogger(__name__)

DEFAULT_C_GRID = (1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3, 1e4)
MAX_ITER = 100_000
TAU = 1e-12


@dataclass
class SvmModel:
    support_indices: np.ndarray
    dual_coefficients: np.ndarray
    bias: float
    class_pair: tuple = (1, -1)
    alpha: Optional[np.ndarray] = field(default=None, repr=False)
    objective: float = 0.0
    iterations: int = 0
    converged: bool = True

    @property
    def n_train(self) -> int:
        return len(self.alpha)

    def decision(self, k_rows) -> np.ndarray:
        """Decision values for rows of kernel values against *all* training points."""
        k_rows = np.atleast_2d(np.asarray(k_rows, dtype=float))
        return k_rows[:, self.support_indices] @ self.dual_coefficients + self.bias


def smo_train(k_sub, labels, C: float, tol: float = 1e-3, max_iter: int = MAX_ITER) -> SvmModel:
    """Solve the C-SVM dual with SMO on a precomputed kernel.

    Minimises ``0.5 a^T Q a - sum(a)`` with ``Q = (y y^T) * K``, subject to
    ``0 <= a <= C`` and ``y^T a = 0``. The working pair is the maximal violating
    pair; iteration stops once the KKT gap drops below ``tol``. Non-positive
    curvature along the pair direction is replaced by a tiny positive value, so
    slightly indefinite kernels train without error.
    """
    K = np.asarray(k_sub, dtype=float)
    y = np.asarray(labels, dtype=float)
    n = len(y)
    if K.shape != (n, n):
        raise ValueError(f"kernel shape {K.shape} does not match {n} labels")
    if not np.all(np.isfinite(K)):
        raise ValueError("kernel matrix contains non-finite entries")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be +1 or -1")
    if np.all(y == y[0]):
        raise ValueError("both classes must be present to train")
    if not C > 0 or not tol > 0:
        raise ValueError("C and tol must be positive")

    Q = K * np.outer(y, y)
    qd = np.diag(Q).copy()
    alpha = np.zeros(n)
    grad = -np.ones(n)
    pos = y > 0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        up = np.where(pos, alpha < C, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < C)
        score = -y * grad
        i = int(np.argmax(np.where(up, score, -np.inf)))
        j = int(np.argmin(np.where(low, score, np.inf)))
        if score[i] - score[j] < tol:
            converged = True
            break
        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = max(qd[i] + qd[j] + 2 * Q[i, j], TAU)
            delta = (-grad[i] - grad[j]) / quad
            diff = ai - aj
            ni, nj = ai + delta, aj + delta
            if diff > 0:
                if nj < 0:
                    nj, ni = 0.0, diff
            elif ni < 0:
                ni, nj = 0.0, -diff
            if diff > 0:
                if ni > C:
                    ni, nj = C, C - diff
            elif nj > C:
                nj, ni = C, C + diff
        else:
            quad = max(qd[i] + qd[j] - 2 * Q[i, j], TAU)
            delta = (grad[i] - grad[j]) / quad
            total = ai + aj
            ni, nj = ai - delta, aj + delta
            if total > C:
                if ni > C:
                    ni, nj = C, total - C
                if nj > C:
                    nj, ni = C, total - C
            else:
                if nj < 0:
                    nj, ni = 0.0, total
                if ni < 0:
                    ni, nj = 0.0, total
        grad += Q[i] * (ni - ai) + Q[j] * (nj - aj)
        alpha[i], alpha[j] = ni, nj
    else:
        log.warning("SMO hit the iteration cap (%d) without converging", max_iter)

    yg = y * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = float(yg[free].mean())
    else:
        # no free multiplier: take the midpoint of the feasible interval for rho
        lo_bound = np.max(yg[np.where(pos, alpha >= C, alpha <= 0)], initial=-np.inf)
        hi_bound = np.min(yg[np.where(pos, alpha <= 0, alpha >= C)], initial=np.inf)
        if np.isfinite(lo_bound) and np.isfinite(hi_bound):
            rho = 0.5 * (lo_bound + hi_bound)
        else:
            rho = hi_bound if np.isfinite(hi_bound) else lo_bound
    sv = np.flatnonzero(alpha > 0)
    # grad = Q a - 1, so 0.5 a^T Q a - sum(a) = 0.5 a.grad - 0.5 sum(a)
    objective = float(0.5 * alpha @ grad - 0.5 * alpha.sum())
    return SvmModel(sv, alpha[sv] * y[sv], -float(rho), (1, -1), alpha, objective, it, converged)


def predict(model: SvmModel, k_row) -> tuple[int, float]:
    """Label (+1/-1) and decision value for one point given its kernel row."""
    k_row = np.asarray(k_row, dtype=float)
    if model.alpha is not None and k_row.shape[-1] != model.n_train:
        raise ValueError(f"kernel row has {k_row.shape[-1]} entries, expected {model.n_train}")
    value = float(model.decision(k_row)[0])
    return (1 if value >= 0 else -1), value


class OneVsOneSvm:
    """Multiclass C-SVM by pairwise voting; vote ties go to the smaller class id."""

    def __init__(self, C: float = 1.0, tol: float = 1e-3):
        self.C = C
        self.tol = tol

    def fit(self, K, y) -> "OneVsOneSvm":
        K = np.asarray(K, dtype=float)
        y = np.asarray(y)
        self.classes_ = np.unique(y)
        self.models_ = []
        for a, b in combinations(self.classes_, 2):
            idx = np.flatnonzero((y == a) | (y == b))
            sub_y = np.where(y[idx] == a, 1.0, -1.0)
            model = smo_train(K[np.ix_(idx, idx)], sub_y, self.C, self.tol)
            self.models_.append((a, b, idx, model))
        return self

    def predict(self, K_test) -> np.ndarray:
        """``K_test`` holds kernel values of test points (rows) against training points."""
        K_test = np.atleast_2d(np.asarray(K_test, dtype=float))
        if len(self.classes_) == 1:
            return np.full(K_test.shape[0], self.classes_[0])
        votes = np.zeros((K_test.shape[0], len(self.classes_)), dtype=int)
        pos = {c: i for i, c in enumerate(self.classes_)}
        for a, b, idx, model in self.models_:
            d = model.decision(K_test[:, idx])
            votes[:, pos[a]] += d >= 0
            votes[:, pos[b]] += d < 0
        return self.classes_[np.argmax(votes, axis=1)]


@dataclass
class CvReport:
    mean_accuracy: float
    std_error: float
    per_repeat: list[float]
    c_selected: list[float]
    seed: int
    folds: int
    repeats: int
    meta: dict = field(default_factory=dict)

    def summary(self) -> str:
        return f"{self.mean_accuracy:.2f} ± {self.std_error:.2f}"


def _splitter(y: np.ndarray, n_splits: int, seed: int):
    counts = np.bincount(np.unique(y, return_inverse=True)[1])
    if counts.min() >= n_splits:
        return StratifiedKFold(n_splits, shuffle=True, random_state=seed).split(np.zeros(len(y)), y)
    log.warning(
        "smallest class has %d members (< %d folds); using unstratified shuffled folds",
        counts.min(), n_splits,
    )
    return KFold(n_splits, shuffle=True, random_state=seed).split(np.zeros(len(y)))


def _select_c(K: np.ndarray, y: np.ndarray, grid: Sequence[float], n_splits: int, seed: int, tol: float) -> float:
    n_splits = min(n_splits, len(y))
    if n_splits < 2 or len(np.unique(y)) < 2:
        return grid[0]
    splits = list(_splitter(y, n_splits, seed))
    best_c, best_hits = grid[0], -1
    for c in grid:
        hits = 0
        for tr, te in splits:
            clf = OneVsOneSvm(c, tol).fit(K[np.ix_(tr, tr)], y[tr])
            hits += int(np.sum(clf.predict(K[np.ix_(te, tr)]) == y[te]))
        if hits > best_hits:
            best_c, best_hits = c, hits
    return best_c


def cross_validate(
    km,
    labels,
    folds: int = 10,
    repeats: int = 10,
    c_grid: Sequence[float] = DEFAULT_C_GRID,
    seed: int = 42,
    inner_folds: int = 5,
    tol: float = 1e-3,
) -> CvReport:
    """Repeated k-fold accuracy of a precomputed-kernel C-SVM.

    Within each outer fold, C is picked from ``c_grid`` by an inner
    ``inner_folds``-fold search on the training part (ties to the smallest C).
    Folds are stratified by class whenever every class has at least ``folds``
    members. All splits derive from ``seed`` through named sub-streams.
    """
    K = np.asarray(getattr(km, "values", km), dtype=float)
    y = np.asarray(labels)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError(f"kernel matrix must be square, got {K.shape}")
    if K.shape[0] != len(y):
        raise ValueError(f"kernel matrix is {K.shape[0]}x{K.shape[0]} but there are {len(y)} labels")
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    grid = sorted(float(c) for c in c_grid)
    if not grid:
        raise ValueError("c_grid is empty")

    per_repeat, chosen = [], []
    for r in range(repeats):
        split_seed = substream_int(seed, f"cv/repeat{r}")
        hits = 0
        for f, (tr, te) in enumerate(_splitter(y, folds, split_seed)):
            inner_seed = substream_int(seed, f"cv/repeat{r}/fold{f}/inner")
            c = _select_c(K[np.ix_(tr, tr)], y[tr], grid, inner_folds, inner_seed, tol)
            chosen.append(c)
            clf = OneVsOneSvm(c, tol).fit(K[np.ix_(tr, tr)], y[tr])
            hits += int(np.sum(clf.predict(K[np.ix_(te, tr)]) == y[te]))
        per_repeat.append(100.0 * hits / len(y))
    mean = float(np.mean(per_repeat))
    se = float(np.std(per_repeat, ddof=1) / math.sqrt(repeats)) if repeats > 1 else 0.0
    return CvReport(mean, se, per_repeat, chosen, seed, folds, repeats)
