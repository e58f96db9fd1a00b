"""K-fold plans, structural cross-validation and its rate calibration.

Structural CV holds each candidate's pattern ``S U`` fixed and refits only the
``rbar x m`` factor coefficients on every training split, so all K trainings
describe the same model. Conventional fixed-parameter CV (``fixed_lambda_cv``)
reruns a learner on every split with the tuning value held fixed instead.
"""

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .criteria import ZERO_FIT_TOL, complexity_penalty
from .exceptions import DegenerateDesignError, ParameterError
from .matrix_core import SOLVE_TOL, as_matrix, numerical_rank
from .patterns import StructuralPattern, factor_design

log = logging.getLogger(__name__)

SCV_ALPHA1 = 4.6
SCV_ALPHA2 = 3.5
SCV_FRAC_ALPHA1 = 2.0
SCV_FRAC_ALPHA2 = 2.4
DEFAULT_K = 5


@dataclass(frozen=True)
class FoldPlan:
    n: int
    K: int
    seed: int
    assignment: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=int)
        a.setflags(write=False)
        object.__setattr__(self, "assignment", a)

    def test_index(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == k)

    def train_index(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != k)

    def splits(self):
        for k in range(self.K):
            yield self.train_index(k), self.test_index(k)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.K)


def make_folds(n: int, K: int, seed: int = 0) -> FoldPlan:
    """Uniformly random balanced partition of ``range(n)`` into K folds."""
    if K < 2 or K > n:
        raise ParameterError(f"need 2 <= K <= n, got K={K}, n={n}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    assignment = np.empty(n, dtype=int)
    assignment[perm] = np.arange(n) % K
    return FoldPlan(n, K, seed, assignment)


@dataclass
class CvReport:
    """Per-candidate cross-validation summary (one entry per pattern)."""

    cv_err: np.ndarray
    trn_err: np.ndarray
    fold_errors: np.ndarray
    calibrated: np.ndarray
    excluded: np.ndarray
    reasons: List[Optional[str]]
    patterns: list = field(default_factory=list)

    def select(self, penalties: Optional[Sequence[float]] = None, which: str = "calibrated") -> int:
        from .criteria import argmin_with_ties

        values = np.where(self.excluded, np.inf, getattr(self, which))
        if penalties is None:
            penalties = [pat.J * max(pat.rank, 1) for pat in self.patterns]
        return argmin_with_ties(values, penalties)


def _lstsq_fit(Z, Y):
    U, s, Vt = np.linalg.svd(Z, full_matrices=False)
    if s[0] == 0.0 or s[-1] <= SOLVE_TOL * s[0]:
        raise DegenerateDesignError("factor design is rank deficient")
    return Vt.T @ ((U.T @ Y) / s[:, None])


def scv_correction(cv_err, trn_err, R, IF, m, n, alpha1=SCV_ALPHA1, alpha2=SCV_ALPHA2):
    """``CV + alpha1 (Trn / mn) R + alpha2 (Trn / mn) IF`` with no exclusion rule."""
    sigma2_hat = trn_err / (m * n)
    return cv_err + alpha1 * sigma2_hat * R + alpha2 * sigma2_hat * IF


def calibrate_scv(cv_err, trn_err, J, r, p, q, m, n, alpha1=SCV_ALPHA1, alpha2=SCV_ALPHA2):
    """Plug-in calibrated SCV error.

    ``scv_correction`` with ``R = (min(q, J) - r) r`` and ``IF = J log(ep/J)``;
    ``+inf`` when ``alpha1 * DF + alpha2 * IF > mn`` where
    ``DF = (min(q, J) + m - r) r``.
    """
    pen = complexity_penalty(J, r, p, q, m)
    if alpha1 * pen.df + alpha2 * pen.inflation > m * n:
        return math.inf
    return scv_correction(cv_err, trn_err, pen.residual_df, pen.inflation, m, n, alpha1, alpha2)


def calibrate_scv_fractional(cv_err, R, IF, m, n, alpha1=SCV_FRAC_ALPHA1, alpha2=SCV_FRAC_ALPHA2):
    """``CV / (1 - alpha1 R / mn - alpha2 IF / mn)``; ``+inf`` if the denominator is <= 0."""
    denom = 1.0 - alpha1 * R / (m * n) - alpha2 * IF / (m * n)
    if denom <= 0.0:
        return math.inf
    return cv_err / denom


def scv_evaluate(
    X,
    Y,
    patterns: Sequence[StructuralPattern],
    plan: FoldPlan,
    alpha1: float = SCV_ALPHA1,
    alpha2: float = SCV_ALPHA2,
    form: str = "plugin",
    q: Optional[int] = None,
) -> CvReport:
    """Structural cross-validation of fixed patterns.

    For every pattern and fold, ``Y[train]`` is regressed on
    ``X[train] @ S U`` and scored on the held-out rows. A pattern whose
    training design is rank deficient on any fold is excluded (not fatal).
    ``form`` selects the plug-in (default) or fractional calibration.
    """
    X = as_matrix(X, "X")
    Y = as_matrix(Y, "Y")
    n, p = X.shape
    m = Y.shape[1]
    if plan.n != n:
        raise ParameterError(f"fold plan covers n={plan.n} rows, data has {n}")
    if plan.K != DEFAULT_K and (alpha1, alpha2) in {(SCV_ALPHA1, SCV_ALPHA2), (SCV_FRAC_ALPHA1, SCV_FRAC_ALPHA2)}:
        warnings.warn(
            f"calibration constants were tuned for K={DEFAULT_K}; K={plan.K} may need others",
            stacklevel=2,
        )
    if q is None:
        q = numerical_rank(X)
    y_norm2 = float(np.sum(Y * Y))
    splits = list(plan.splits())
    min_train = min(len(tr) for tr, _ in splits)
    N = len(patterns)
    cv = np.zeros(N)
    trn = np.zeros(N)
    folds = np.zeros((N, plan.K))
    cal = np.full(N, np.inf)
    excluded = np.zeros(N, dtype=bool)
    reasons: List[Optional[str]] = [None] * N
    for i, pat in enumerate(patterns):
        if pat.rank > min_train:
            excluded[i] = True
            reasons[i] = "insufficient fold rank"
            cv[i] = trn[i] = np.inf
            folds[i] = np.inf
            continue
        Z = factor_design(X, pat)
        try:
            C = _lstsq_fit(Z, Y)
            R = Y - Z @ C
            trn[i] = float(np.sum(R * R))
            for k, (tr, te) in enumerate(splits):
                Ck = _lstsq_fit(Z[tr], Y[tr])
                Rk = Y[te] - Z[te] @ Ck
                folds[i, k] = float(np.sum(Rk * Rk))
        except DegenerateDesignError:
            excluded[i] = True
            reasons[i] = "degenerate fold design"
            cv[i] = trn[i] = np.inf
            folds[i] = np.inf
            continue
        # exact fits: roundoff residuals count as zero
        folds[i] = [0.0 if e <= ZERO_FIT_TOL * y_norm2 else e for e in folds[i]]
        if trn[i] <= ZERO_FIT_TOL * y_norm2:
            trn[i] = 0.0
        cv[i] = float(np.sum(folds[i]))
        r = min(pat.rank, m)
        if form == "plugin":
            cal[i] = calibrate_scv(cv[i], trn[i], pat.J, r, p, q, m, n, alpha1, alpha2)
        elif form == "fractional":
            pen = complexity_penalty(pat.J, r, p, q, m)
            cal[i] = calibrate_scv_fractional(cv[i], pen.residual_df, pen.inflation, m, n, alpha1, alpha2)
        else:
            raise ValueError(f"unknown calibration form {form!r}")
        if not np.isfinite(cal[i]):
            reasons[i] = "too complex"
    return CvReport(cv, trn, folds, cal, excluded, reasons, list(patterns))


@dataclass
class FixedLambdaCv:
    """Conventional CV of a learner with its tuning value held fixed per fold."""

    lambdas: list
    cv_err: np.ndarray
    fold_errors: np.ndarray
    cardinalities: np.ndarray
    failed: np.ndarray

    def best(self) -> int:
        values = np.where(self.failed.any(axis=1), np.inf, self.cv_err)
        return int(np.argmin(values))


def fixed_lambda_cv(X, Y, learner: Callable, lambda_grid, plan: FoldPlan) -> FixedLambdaCv:
    """Run ``learner`` on each training split with every tuning value fixed.

    ``learner(X_train, Y_train, lambda_grid)`` must return one ``p x m``
    coefficient matrix per grid value (``None`` marks a failed fit). The
    result holds per-value validation errors and the support size of every
    fold's fit, whose spread across folds exposes training inconsistency.
    """
    X = as_matrix(X, "X")
    Y = as_matrix(Y, "Y")
    lambdas = list(lambda_grid)
    L = len(lambdas)
    folds = np.zeros((L, plan.K))
    cards = np.zeros((L, plan.K), dtype=int)
    failed = np.zeros((L, plan.K), dtype=bool)
    for k, (tr, te) in enumerate(plan.splits()):
        try:
            fits = learner(X[tr], Y[tr], lambdas)
        except Exception as exc:  # learner crash: flag every value on this fold
            log.warning("learner failed on fold %d: %s", k, exc)
            failed[:, k] = True
            folds[:, k] = np.inf
            continue
        for i, B in enumerate(fits):
            if B is None:
                failed[i, k] = True
                folds[i, k] = np.inf
                cards[i, k] = -1
                continue
            B = np.asarray(B, dtype=float).reshape(X.shape[1], -1)
            R = Y[te] - X[te] @ B
            folds[i, k] = float(np.sum(R * R))
            cards[i, k] = int(np.sum(np.linalg.norm(B, axis=1) > 0))
    return FixedLambdaCv(lambdas, folds.sum(axis=1), folds, cards, failed)


def scv_fold_supports(X, Y, pattern: StructuralPattern, plan: FoldPlan) -> List[tuple]:
    """Row supports of the K structural fold fits ``S U C_k`` of one pattern."""
    X = as_matrix(X, "X")
    Y = as_matrix(Y, "Y")
    Z = factor_design(X, pattern)
    out = []
    for tr, _ in plan.splits():
        Ck = _lstsq_fit(Z[tr], Y[tr])
        Bk = np.zeros((pattern.p, Y.shape[1]))
        Bk[list(pattern.support)] = pattern.U @ Ck
        out.append(tuple(int(j) for j in np.flatnonzero(np.linalg.norm(Bk, axis=1) > 0)))
    return out
