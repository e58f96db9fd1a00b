"""Monte-Carlo laboratory for the cross-validation error identity.

For a fixed pattern ``S U`` with ``rbar`` factors and i.i.d. design rows,

    E[CV-Err] = E[Trn-Err] + D + U,

where ``D = m sigma^2 (rbar + n E tr{(Z'Z)^{-1}})`` with ``Z`` the whitened
training factor design (n - d rows), and ``U >= 0`` is the extra cost of the
part of the truth that the pattern cannot represent. Under Gaussian rows ``D``
has a closed form (``d_term_gaussian``).
"""

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from .exceptions import DegenerateDesignError, InfeasibleConfigError, ParameterError
from .matrix_core import SOLVE_TOL, relative_complement, subspace_intersection
from .patterns import StructuralPattern, extract_pattern
from .resampling import make_folds

MAX_DISCARD_FRACTION = 0.10
ACCEPT_SE = 4.0


def d_term_gaussian(n: int, K: int, r_bar: int, m: int, sigma: float) -> float:
    """Closed-form D for Gaussian design rows."""
    theta = (r_bar + 1) / n
    den = (1.0 - theta) * K - 1.0
    if den <= 0.0:
        raise InfeasibleConfigError(
            f"(1 - (rbar+1)/n) K - 1 = {den:.4g} <= 0 for n={n}, K={K}, rbar={r_bar}"
        )
    return ((2.0 - theta) * K - 1.0) / den * m * r_bar * sigma**2


def d_term_upper_bound(theta: float, r_bar: int, m: int, sigma: float) -> float:
    """Bound on D valid for every K >= 2 when (rbar + 1)/n <= theta < 1/2."""
    return (3.0 + 4.0 * theta / (1.0 - 2.0 * theta)) * m * r_bar * sigma**2


@dataclass
class MCEstimate:
    value: float
    std_err: float
    reps: int
    discarded: int = 0


def gaussian_sampler(Sigma) -> Callable:
    """Row sampler ``(rng, size) -> size x p`` drawing from N(0, Sigma)."""
    Lc = np.linalg.cholesky(np.asarray(Sigma, dtype=float))

    def draw(rng, size):
        return rng.standard_normal((size, Lc.shape[0])) @ Lc.T

    return draw


def _inv_sqrt_psd(M):
    w, V = np.linalg.eigh(M)
    if w.min() <= 0:
        raise ParameterError("matrix is not positive definite")
    return (V / np.sqrt(w)) @ V.T


def _whitener(Sigma, SU):
    # ((SU)' Sigma SU)^{-1/2}: makes the rows of X SU isotropic
    return _inv_sqrt_psd(SU.T @ Sigma @ SU)


def _check_pd(Sigma):
    Sigma = np.asarray(Sigma, dtype=float)
    if not np.allclose(Sigma, Sigma.T) or np.linalg.eigvalsh(Sigma).min() <= 0:
        raise ParameterError("Sigma must be symmetric positive definite")
    return Sigma


def d_term_general(sampler, Sigma, pattern: StructuralPattern, n, K, m, sigma, reps=5000, seed=0) -> MCEstimate:
    """Monte-Carlo D for an arbitrary row distribution.

    Draws ``n - n/K`` design rows per replication, whitens the factor design
    and averages ``tr{(Z'Z)^{-1}}``. Singular draws are discarded and redrawn;
    more than 10% discards is an error.
    """
    Sigma = _check_pd(Sigma)
    if n % K:
        raise ParameterError("n must be a multiple of K")
    d = n // K
    r_bar = pattern.rank
    if n - d <= r_bar:
        raise InfeasibleConfigError("training size n - d must exceed rbar")
    if sigma == 0:
        return MCEstimate(0.0, 0.0, reps)
    SU = pattern.SU
    W = _whitener(Sigma, SU)
    traces = np.empty(reps)
    discarded = 0
    i = 0
    attempt = 0
    while i < reps:
        rng = np.random.default_rng(seed + attempt)
        attempt += 1
        Z = sampler(rng, n - d) @ SU @ W
        s = np.linalg.svd(Z, compute_uv=False)
        if s[-1] <= SOLVE_TOL * s[0]:
            discarded += 1
            if discarded > MAX_DISCARD_FRACTION * reps:
                raise DegenerateDesignError("too many singular design draws")
            continue
        traces[i] = np.sum(1.0 / s**2)
        i += 1
    scale = m * sigma**2
    value = scale * (r_bar + n * traces.mean())
    se = scale * n * traces.std(ddof=1) / math.sqrt(reps) if reps > 1 else 0.0
    return MCEstimate(float(value), float(se), reps, discarded)


def complement_projector(truth_pattern: StructuralPattern, pattern: StructuralPattern) -> np.ndarray:
    """Projector onto the part of the truth's span not shared with ``pattern``."""
    S_star = truth_pattern.subspace()
    shared = subspace_intersection(S_star, pattern.subspace())
    comp = relative_complement(S_star, shared)
    return comp.basis @ comp.basis.T


def _ols(Z, F):
    U, s, Vt = np.linalg.svd(Z, full_matrices=False)
    if s[-1] <= SOLVE_TOL * s[0]:
        raise DegenerateDesignError("singular factor design")
    return Vt.T @ ((U.T @ F) / s[:, None])


class _UAccumulator:
    """Collects the per-replication ingredients of the U term."""

    def __init__(self, Sigma, SU, n):
        self.Sigma_SU = SU.T @ (n * Sigma) @ SU
        self.grams = []
        self.full = []
        self.fold = []

    def add(self, Z, train, F):
        self.grams.append(Z.T @ Z)
        self.full.append(_ols(Z, F))
        self.fold.append(_ols(Z[train], F[train]))

    def per_rep(self):
        fold = np.array(self.fold)
        mu = fold.mean(axis=0)
        out = np.empty(len(fold))
        for i, (G, Bbar, Bk) in enumerate(zip(self.grams, self.full, fold)):
            a = Bbar - mu
            b = Bk - mu
            out[i] = np.trace(a.T @ G @ a) + np.trace(b.T @ self.Sigma_SU @ b)
        return out


def u_term(sampler, Sigma, pattern: StructuralPattern, B_star, n, K, reps=5000, seed=0) -> MCEstimate:
    """Monte-Carlo U term (underfitting surcharge) for a fixed pattern.

    Uses the first fold's training rows for the fold-level regression. Exactly
    zero when the truth lies in the span of ``S U``.
    """
    Sigma = _check_pd(Sigma)
    B_star = np.asarray(B_star, dtype=float)
    P0 = complement_projector(extract_pattern(B_star), pattern)
    if np.allclose(P0, 0.0):
        return MCEstimate(0.0, 0.0, reps)
    plan = make_folds(n, K, seed)
    train = plan.train_index(0)
    SU = pattern.SU
    acc = _UAccumulator(Sigma, SU, n)
    PB = P0 @ B_star
    for i in range(reps):
        rng = np.random.default_rng(seed + i)
        X = sampler(rng, n)
        acc.add(X @ SU, train, X @ PB)
    u = acc.per_rep()
    return MCEstimate(float(u.mean()), float(u.std(ddof=1) / math.sqrt(reps)), reps)


@dataclass
class IdentityConfig:
    n: int = 100
    K: int = 5
    p: int = 5
    m: int = 1
    sigma: float = 1.0
    rho: float = 0.5
    truth_rows: tuple = (0,)
    pattern_rows: tuple = (0, 1, 2)
    beta: float = 1.0
    pattern_U: Optional[list] = None
    seed: int = 0
    fold_seed: int = 12345

    def covariance(self):
        idx = np.arange(self.p)
        return self.rho ** np.abs(np.subtract.outer(idx, idx))

    def truth(self):
        B = np.zeros((self.p, self.m))
        B[list(self.truth_rows)] = self.beta
        return B

    def pattern(self) -> StructuralPattern:
        J = len(self.pattern_rows)
        U = np.eye(J) if self.pattern_U is None else np.asarray(self.pattern_U, dtype=float)
        return StructuralPattern(self.p, tuple(self.pattern_rows), U)


@dataclass
class IdentityReport:
    empirical_gap: float
    D_formula: float
    U_formula: float
    mc_std_err: float
    replications: int
    gap_std_err: float = 0.0
    U_std_err: float = 0.0
    mean_cv_err: float = 0.0
    mean_trn_err: float = 0.0
    r_bar: int = 0
    seeds: dict = field(default_factory=dict)

    @property
    def discrepancy(self) -> float:
        return self.empirical_gap - (self.D_formula + self.U_formula)

    @property
    def passed(self) -> bool:
        return abs(self.discrepancy) <= ACCEPT_SE * self.mc_std_err + 1e-12

    def as_dict(self):
        d = asdict(self)
        d["discrepancy"] = self.discrepancy
        d["passed"] = self.passed
        return d


def verify_identity(config: IdentityConfig, reps: int = 5000) -> IdentityReport:
    """Compare the Monte-Carlo CV/training gap against D + U.

    Every replication draws a fresh Gaussian design and noise (seed
    ``config.seed + i``) and keeps one fold plan. U is estimated from the same
    draws (common random numbers); ``mc_std_err`` is the standard error of the
    per-replication difference ``gap_i - u_i``.
    """
    cfg = config
    if cfg.n % cfg.K:
        raise ParameterError("the identity is stated for n = d K")
    if reps < 2:
        raise ParameterError("need at least 2 replications")
    Sigma = cfg.covariance()
    sample = gaussian_sampler(Sigma)
    pat = cfg.pattern()
    B_star = cfg.truth()
    r_bar = pat.rank
    D = d_term_gaussian(cfg.n, cfg.K, r_bar, cfg.m, cfg.sigma)
    plan = make_folds(cfg.n, cfg.K, cfg.fold_seed)
    splits = list(plan.splits())
    SU = pat.SU
    if np.any(B_star):
        P0 = complement_projector(extract_pattern(B_star), pat)
    else:
        P0 = np.zeros((cfg.p, cfg.p))
    underfit = not np.allclose(P0, 0.0)
    PB = P0 @ B_star
    acc = _UAccumulator(Sigma, SU, cfg.n)
    cv = np.empty(reps)
    trn = np.empty(reps)
    for i in range(reps):
        rng = np.random.default_rng(cfg.seed + i)
        X = sample(rng, cfg.n)
        E = rng.standard_normal((cfg.n, cfg.m))
        Y = X @ B_star + cfg.sigma * E
        Z = X @ SU
        R = Y - Z @ _ols(Z, Y)
        trn[i] = np.sum(R * R)
        tot = 0.0
        for tr, te in splits:
            Rk = Y[te] - Z[te] @ _ols(Z[tr], Y[tr])
            tot += np.sum(Rk * Rk)
        cv[i] = tot
        if underfit:
            acc.add(Z, splits[0][0], X @ PB)
    gap = cv - trn
    u = acc.per_rep() if underfit else np.zeros(reps)
    diff = gap - u
    root = math.sqrt(reps)
    return IdentityReport(
        empirical_gap=float(gap.mean()),
        D_formula=float(D),
        U_formula=float(u.mean()),
        mc_std_err=float(diff.std(ddof=1) / root),
        replications=reps,
        gap_std_err=float(gap.std(ddof=1) / root),
        U_std_err=float(u.std(ddof=1) / root),
        mean_cv_err=float(cv.mean()),
        mean_trn_err=float(trn.mean()),
        r_bar=r_bar,
        seeds={"base_seed": cfg.seed, "fold_seed": cfg.fold_seed},
    )


def insample_gap(X, B_star, pattern: StructuralPattern, sigma, reps=2000, seed=0) -> MCEstimate:
    """Monte-Carlo ``E||Y' - X B_hat||^2 - E||Y - X B_hat||^2`` for a fixed design.

    ``Y'`` is an independent copy of ``Y``; the expected gap is
    ``2 sigma^2 rbar m``.
    """
    X = np.asarray(X, dtype=float)
    B_star = np.asarray(B_star, dtype=float)
    n = X.shape[0]
    m = B_star.shape[1]
    Z = X @ pattern.SU
    mean = X @ B_star
    U, s, Vt = np.linalg.svd(Z, full_matrices=False)
    if s[-1] <= SOLVE_TOL * s[0]:
        raise DegenerateDesignError("singular factor design")
    gaps = np.empty(reps)
    for i in range(reps):
        rng = np.random.default_rng(seed + i)
        Y = mean + sigma * rng.standard_normal((n, m))
        Y2 = mean + sigma * rng.standard_normal((n, m))
        fit = U @ (U.T @ Y)
        gaps[i] = np.sum((Y2 - fit) ** 2) - np.sum((Y - fit) ** 2)
    return MCEstimate(float(gaps.mean()), float(gaps.std(ddof=1) / math.sqrt(reps)), reps)
