"""Candidate generation: row-sparse, rank-constrained estimates on a (J, r) grid.

``group_iht_fit`` runs projected gradient descent onto
``{B : J(B) <= J, rank(B) <= r}`` (keep the J largest rows, then truncate the
SVD of the kept block) and finishes with the exact least-squares refit on the
final support. ``sparse_lowrank_path`` is the penalised (group plus nuclear
norm) learner tuned by conventional fixed-parameter cross-validation, and
``lasso_like_path`` is a single-response l1 path used by the inconsistency audit.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .exceptions import DegenerateDesignError, ParameterError
from .matrix_core import as_matrix
from .patterns import CandidateModel, candidate_from_matrix, reduced_rank_refit

log = logging.getLogger(__name__)

MAX_J_GRID = 50
KKT_TOL = 1e-8


@dataclass
class PathConfig:
    J_grid: Optional[Sequence[int]] = None
    r_grid: Optional[Sequence[int]] = None
    max_iter: int = 300
    step_scale: float = 1.0
    tol: float = 1e-7
    seed: int = 0
    warm_start: bool = True

    def __post_init__(self):
        if not 0.0 < self.step_scale <= 1.0:
            raise ParameterError("step_scale must lie in (0, 1]")
        if self.tol <= 0:
            raise ParameterError("tol must be positive")
        if self.max_iter < 1:
            raise ParameterError("max_iter must be >= 1")

    def resolve(self, n: int, p: int, m: int):
        """Concrete (J_grid, r_grid) for a dataset of shape (n, p, m)."""
        if self.J_grid is None:
            J_grid = default_J_grid(n, p)
        else:
            J_grid = sorted({int(j) for j in self.J_grid})
        if not J_grid or J_grid[0] < 1 or J_grid[-1] > p:
            raise ParameterError(f"J_grid must lie within [1, {p}]")
        if self.r_grid is None:
            r_grid = list(range(1, min(m, J_grid[-1]) + 1))
        else:
            r_grid = sorted({int(r) for r in self.r_grid})
        if not r_grid or r_grid[0] < 1 or r_grid[-1] > min(m, J_grid[-1]):
            raise ParameterError(f"r_grid must lie within [1, {min(m, J_grid[-1])}]")
        return J_grid, r_grid


def default_J_grid(n: int, p: int, max_points: int = MAX_J_GRID):
    top = max(1, min(p, n - 1))
    if top <= max_points:
        return list(range(1, top + 1))
    return sorted({int(round(v)) for v in np.linspace(1, top, max_points)})


def _top_rows(norms: np.ndarray, J: int) -> np.ndarray:
    # stable sort: equal norms keep the lower index
    return np.sort(np.argsort(-norms, kind="stable")[:J])


def _project(G: np.ndarray, rows: np.ndarray, r: int) -> np.ndarray:
    out = np.zeros_like(G)
    block = G[rows]
    if r < min(block.shape):
        U, s, Vt = np.linalg.svd(block, full_matrices=False)
        block = (U[:, :r] * s[:r]) @ Vt[:r]
    out[rows] = block
    return out


class _Quadratic:
    """0.5 ||Y - X B||_F^2 evaluated through the Gram matrices."""

    def __init__(self, X, Y):
        self.X = X
        self.Y = Y
        self.XtX = X.T @ X
        self.XtY = X.T @ Y
        self.yy = float(np.sum(Y * Y))
        self.L = float(np.linalg.norm(X, 2) ** 2)

    def value(self, B):
        XtXB = self.XtX @ B
        return 0.5 * (self.yy - 2.0 * np.sum(B * self.XtY) + np.sum(B * XtXB))

    def neg_grad(self, B):
        return self.XtY - self.XtX @ B


def _iht(f: _Quadratic, J: int, r: int, cfg: PathConfig, B0=None):
    p, m = f.XtY.shape
    B = np.zeros((p, m)) if B0 is None else _project(B0, _top_rows(np.linalg.norm(B0, axis=1), J), r)
    obj = f.value(B)
    step = cfg.step_scale / f.L if f.L > 0 else 0.0
    history = [obj]
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        G = B + step * f.neg_grad(B)
        rows = _top_rows(np.linalg.norm(G, axis=1), J)
        B_new = _project(G, rows, r)
        new_obj = f.value(B_new)
        if new_obj > obj:
            # keep the current support: exact projection there cannot ascend
            cur = np.flatnonzero(np.linalg.norm(B, axis=1) > 0)
            if cur.size == 0:
                cur = rows
            B_new = _project(G, cur, r)
            new_obj = f.value(B_new)
        if new_obj > obj:
            # rounding only; treat as stalled
            converged = True
            break
        rel = (obj - new_obj) / max(abs(obj), 1e-300)
        B, obj = B_new, new_obj
        history.append(obj)
        if rel < cfg.tol:
            converged = True
            break
    return B, obj, it, converged, history


def group_iht_fit(X, Y, J: int, r: int, cfg: Optional[PathConfig] = None, B0=None, _f=None) -> CandidateModel:
    """Row-sparse rank-constrained fit by iterative hard thresholding.

    The iterate ``B <- Trunc_r(TopRows_J(B + X^T (Y - X B) / L))`` runs from
    ``B0`` (zero by default) until the relative objective decrease drops below
    ``cfg.tol``; the final support is then refit exactly under the rank
    constraint. A fit that stops at ``max_iter`` is returned with
    ``info["max_iter_reached"] = True``.
    """
    cfg = cfg or PathConfig()
    if _f is None:
        X = as_matrix(X, "X")
        Y = as_matrix(Y, "Y")
        _f = _Quadratic(X, Y)
    p, m = _f.XtY.shape
    if not 1 <= J <= p:
        raise ParameterError(f"J={J} outside [1, {p}]")
    if not 1 <= r <= min(J, m):
        raise ParameterError(f"r={r} outside [1, min(J, m)={min(J, m)}]")
    B, obj, iters, converged, history = _iht(_f, J, r, cfg, B0)
    info = {
        "iterations": iters,
        "max_iter_reached": not converged,
        "pre_polish_objective": obj,
        "history": history,
        "target": (J, r),
    }
    support = np.flatnonzero(np.linalg.norm(B, axis=1) > 0)
    if support.size < J:
        # zero rows in the iterate: pad with the largest-gradient rows
        g = np.linalg.norm(_f.neg_grad(B), axis=1)
        g[support] = np.inf
        support = _top_rows(g, J)
    try:
        polished = reduced_rank_refit(_f.X, _f.Y, support, r)
        info["objective"] = 0.5 * polished.rss(_f.X, _f.Y)
        info["polished"] = True
        polished.info.update(info)
        return polished
    except DegenerateDesignError:
        log.debug("polish failed for J=%d r=%d; keeping IHT iterate", J, r)
    info["objective"] = obj
    info["polished"] = False
    rows = np.flatnonzero(np.linalg.norm(B, axis=1) > 0)
    if rows.size == 0:
        raise DegenerateDesignError(f"IHT produced the zero matrix for J={J}, r={r}")
    cand = candidate_from_matrix(B)
    cand.info.update(info)
    return cand


def solution_path(X, Y, cfg: Optional[PathConfig] = None):
    """One candidate per feasible (J, r) grid cell, deduplicated by pattern.

    For each rank the cells are visited in decreasing J, each warm-started
    from the previous (larger) fit. Failed cells are skipped and logged.
    """
    cfg = cfg or PathConfig()
    X = as_matrix(X, "X")
    Y = as_matrix(Y, "Y")
    n, p = X.shape
    m = Y.shape[1]
    J_grid, r_grid = cfg.resolve(n, p, m)
    f = _Quadratic(X, Y)
    out = []
    seen = set()
    for r in r_grid:
        B_prev = None
        for J in sorted(J_grid, reverse=True):
            if r > min(J, m):
                continue
            try:
                cand = group_iht_fit(X, Y, J, r, cfg, B0=B_prev if cfg.warm_start else None, _f=f)
            except (DegenerateDesignError, ParameterError) as exc:
                log.warning("path cell J=%d r=%d failed: %s", J, r, exc)
                continue
            B_prev = cand.B
            key = (cand.pattern.support, cand.r)
            if key in seen:
                continue
            seen.add(key)
            cand.info.pop("history", None)
            out.append(cand)
    return out


def path_cells(X, Y, cfg: Optional[PathConfig] = None):
    """Matrices for every feasible grid cell (no deduplication), keyed by (J, r)."""
    cfg = cfg or PathConfig()
    X = as_matrix(X, "X")
    Y = as_matrix(Y, "Y")
    n, p = X.shape
    m = Y.shape[1]
    J_grid, r_grid = cfg.resolve(n, p, m)
    f = _Quadratic(X, Y)
    cells = {}
    for r in r_grid:
        B_prev = None
        for J in sorted(J_grid, reverse=True):
            if r > min(J, m):
                continue
            try:
                cand = group_iht_fit(X, Y, J, r, cfg, B0=B_prev if cfg.warm_start else None, _f=f)
            except (DegenerateDesignError, ParameterError):
                cells[(J, r)] = None
                continue
            B_prev = cand.B
            cells[(J, r)] = cand.B
    return cells


def group_soft_threshold(G, t):
    """Shrink every row of ``G`` toward zero by ``t`` in Euclidean norm."""
    norms = np.linalg.norm(G, axis=1, keepdims=True)
    scale = np.maximum(1.0 - t / np.maximum(norms, 1e-300), 0.0)
    return G * scale


def singular_value_threshold(G, t):
    U, s, Vt = np.linalg.svd(G, full_matrices=False)
    s = np.maximum(s - t, 0.0)
    k = int(np.count_nonzero(s))
    return (U[:, :k] * s[:k]) @ Vt[:k]


def default_penalty_grids(X, Y, n_row: int = 8, n_nuc: int = 8, ratio: float = 1e-2):
    """Geometric grids for the row (group) and nuclear-norm penalties."""
    XtY = np.asarray(X).T @ np.asarray(Y)
    row_top = float(np.linalg.norm(XtY, axis=1).max())
    nuc_top = float(np.linalg.norm(XtY, 2))
    return (
        list(np.geomspace(row_top, row_top * ratio, n_row)),
        list(np.geomspace(nuc_top, nuc_top * ratio, n_nuc)),
    )


class _SparseLowRankAdmm:
    """ADMM for 0.5||Y - XB||^2 + lam_row sum_j ||B[j]|| + lam_nuc ||B||_*.

    Splits B = W1 = W2; the B-step reuses one eigendecomposition of X'X and
    rho follows the usual residual-balancing rule.
    """

    def __init__(self, f: _Quadratic):
        self.f = f
        p = f.XtX.shape[0]
        self.rho = max(f.L / p, 1e-8)
        self.eig, self.Q = np.linalg.eigh(f.XtX)
        self.eig = np.maximum(self.eig, 0.0)
        # coefficient scale used as the absolute stopping floor
        self.floor = float(np.linalg.norm(f.XtY)) / max(f.L, 1e-300)

    def solve(self, lam_row, lam_nuc, state=None, max_iter=500, tol=1e-6):
        f = self.f
        p, m = f.XtY.shape
        if state is None:
            W1 = np.zeros((p, m))
            W2 = np.zeros((p, m))
            V1 = np.zeros((p, m))
            V2 = np.zeros((p, m))
        else:
            # duals are carried unscaled so rho can change between solves
            W1, W2, V1, V2 = (a.copy() for a in state)
        rho = self.rho
        iters = 0
        for iters in range(1, max_iter + 1):
            rhs = f.XtY + rho * (W1 + W2) - V1 - V2
            B = self.Q @ ((self.Q.T @ rhs) / (self.eig + 2.0 * rho)[:, None])
            W1_old, W2_old = W1, W2
            W1 = group_soft_threshold(B + V1 / rho, lam_row / rho)
            W2 = singular_value_threshold(B + V2 / rho, lam_nuc / rho)
            V1 = V1 + rho * (B - W1)
            V2 = V2 + rho * (B - W2)
            scale = max(float(np.linalg.norm(B)), self.floor)
            primal = max(np.linalg.norm(B - W1), np.linalg.norm(B - W2))
            dual = rho * (np.linalg.norm(W1 - W1_old) + np.linalg.norm(W2 - W2_old)) / max(f.L, 1e-300)
            if primal <= tol * scale and dual <= tol * scale:
                break
            if primal > 10.0 * dual:
                rho *= 2.0
            elif dual > 10.0 * primal:
                rho /= 2.0
        self.rho = rho
        self.last_iterations = iters
        return (W1, W2, V1, V2)


def _combine(state):
    W1, W2 = state[0], state[1]
    # row support from the group block, rank from the nuclear block
    mask = np.linalg.norm(W1, axis=1) > 0
    B = np.where(mask[:, None], W2, 0.0)
    return B


def sparse_lowrank_path(X, Y, row_grid, nuc_grid, cfg: Optional[PathConfig] = None):
    """Penalised sparse low-rank fits over a (row, nuclear) penalty grid.

    Minimises ``0.5 ||Y - X B||^2 + lam_row sum_j ||B[j]||_2 + lam_nuc ||B||_*``
    by ADMM. The returned estimate keeps the rows selected by the group block
    from the low-rank block, so it is exactly row-sparse and low-rank; it is
    shrunken and never refit. Returns ``{(lam_row, lam_nuc): B}``.

    This is the regularised learner whose penalties are held fixed across
    folds in conventional cross-validation.
    """
    cfg = cfg or PathConfig(max_iter=2000, tol=1e-4)
    X = as_matrix(X, "X")
    Y = as_matrix(Y, "Y")
    solver = _SparseLowRankAdmm(_Quadratic(X, Y))
    rows = sorted((float(v) for v in row_grid), reverse=True)
    nucs = sorted((float(v) for v in nuc_grid), reverse=True)
    out = {}
    state_row = None
    for i, lr in enumerate(rows):
        state = state_row
        # serpentine order keeps consecutive warm starts close
        order = nucs if i % 2 == 0 else nucs[::-1]
        for j, ln in enumerate(order):
            state = solver.solve(lr, ln, state, cfg.max_iter, cfg.tol)
            if j == 0:
                state_row = state
            out[(lr, ln)] = _combine(state)
    return out


def soft_threshold(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def lasso_like_path(X, y, lambda_grid, cfg: Optional[PathConfig] = None):
    """Lasso solutions of ``0.5 ||y - X b||^2 + lam ||b||_1`` by coordinate descent.

    Returns an array of shape ``(len(lambda_grid), p)`` in the order given;
    internally the path runs from the largest lambda down with warm starts.
    """
    cfg = cfg or PathConfig(max_iter=10000, tol=1e-12)
    X = as_matrix(X, "X")
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape[0] != X.shape[0]:
        raise ParameterError("y length differs from X rows")
    lams = np.asarray(lambda_grid, dtype=float)
    p = X.shape[1]
    G = X.T @ X
    c = X.T @ y
    diag = np.diag(G).copy()
    out = np.zeros((lams.size, p))
    b = np.zeros(p)
    max_sweeps = max(cfg.max_iter, 1000)
    for idx in np.argsort(-lams, kind="stable"):
        lam = lams[idx]
        if lam >= np.max(np.abs(c)):
            b = np.zeros(p)
            out[idx] = b
            continue
        grad = c - G @ b  # X^T (y - X b)
        for _ in range(max_sweeps):
            delta_max = 0.0
            for j in range(p):
                if diag[j] == 0.0:
                    continue
                old = b[j]
                z = grad[j] + diag[j] * old
                new = soft_threshold(z, lam) / diag[j]
                if new != old:
                    d = new - old
                    grad -= G[:, j] * d
                    b[j] = new
                    delta_max = max(delta_max, abs(d) * np.sqrt(diag[j]))
            if delta_max <= cfg.tol * max(1.0, np.sqrt(float(y @ y))):
                break
        out[idx] = b
    return out


def lasso_kkt_residual(X, y, b, lam) -> float:
    """Largest violation of the lasso optimality conditions."""
    g = X.T @ (np.asarray(y).reshape(-1) - X @ b)
    active = b != 0
    res_active = np.abs(g[active] - lam * np.sign(b[active]))
    res_inactive = np.maximum(np.abs(g[~active]) - lam, 0.0)
    return float(max(res_active.max(initial=0.0), res_inactive.max(initial=0.0)))
