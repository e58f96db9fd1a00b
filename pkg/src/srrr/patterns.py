"""Selection-projection patterns and the estimators restricted to them.

A pattern is the pair (support, U): the rows of the coefficient matrix allowed
to be nonzero, and an orthonormal J x rbar factor whose columns span the
column space of those rows. ``X[:, support] @ U`` is then a design with only
``rbar`` factors, and every estimate sharing the pattern is ``S U C`` for some
``rbar x m`` matrix ``C``.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    DegenerateDesignError,
    DimensionError,
    EmptyModelError,
    ParameterError,
    PreconditionError,
)
from .matrix_core import (
    ORTHO_TOL,
    RANK_TOL,
    Subspace,
    as_matrix,
    numerical_rank,
    ols_fit,
    thin_orthonormal_basis,
)

ROW_ZERO_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class StructuralPattern:
    p: int
    support: tuple
    U: np.ndarray

    def __post_init__(self):
        support = tuple(int(j) for j in self.support)
        if not support:
            raise EmptyModelError("pattern support is empty")
        if len(set(support)) != len(support) or list(support) != sorted(support):
            raise PreconditionError("support must be strictly increasing")
        if support[0] < 0 or support[-1] >= self.p:
            raise DimensionError(f"support index out of range for p={self.p}")
        U = np.array(self.U, dtype=float)
        if U.ndim != 2 or U.shape[0] != len(support) or U.shape[1] < 1:
            raise DimensionError(f"U must be J x rbar with J={len(support)}, got {U.shape}")
        if np.linalg.norm(U.T @ U - np.eye(U.shape[1])) > ORTHO_TOL:
            raise PreconditionError("U does not have orthonormal columns")
        U.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "U", U)

    @property
    def J(self) -> int:
        return len(self.support)

    @property
    def rank(self) -> int:
        """The pattern rank rbar: number of factors."""
        return self.U.shape[1]

    @property
    def SU(self) -> np.ndarray:
        """The p x rbar orthonormal matrix S U."""
        M = np.zeros((self.p, self.rank))
        M[list(self.support)] = self.U
        return M

    def subspace(self) -> Subspace:
        return Subspace(self.SU)

    def projector(self) -> np.ndarray:
        SU = self.SU
        return SU @ SU.T

    def key(self):
        """Hashable identity of the spanned subspace, used for deduplication."""
        P = np.round(self.U @ self.U.T, 9) + 0.0
        return (self.p, self.support, P.tobytes())

    def __eq__(self, other):
        if not isinstance(other, StructuralPattern):
            return NotImplemented
        if (self.p, self.support, self.rank) != (other.p, other.support, other.rank):
            return False
        return bool(np.allclose(self.U @ self.U.T, other.U @ other.U.T, atol=1e-9))

    __hash__ = None

    @classmethod
    def full(cls, p: int) -> "StructuralPattern":
        return cls(p, tuple(range(p)), np.eye(p))


@dataclass(eq=False)
class CandidateModel:
    """A coefficient matrix together with its structural pattern.

    ``J`` and ``r`` are the support size and rank of ``B``. For restricted
    estimates they are read off the pattern (``r = min(rbar, m)``), which is
    the rank of ``B`` for every non-degenerate fit.
    """

    B: np.ndarray
    pattern: StructuralPattern
    J: int = None
    r: int = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.B = np.asarray(self.B, dtype=float)
        m = self.B.shape[1]
        if self.J is None:
            self.J = self.pattern.J
        if self.r is None:
            self.r = min(self.pattern.rank, m)

    @property
    def support(self) -> tuple:
        return self.pattern.support

    def rss(self, X, Y) -> float:
        R = Y - X @ self.B
        return float(np.sum(R * R))


def row_support(B, row_zero_tol=ROW_ZERO_TOL) -> tuple:
    B = np.asarray(B, dtype=float)
    norms = np.linalg.norm(B, axis=1)
    top = norms.max() if norms.size else 0.0
    if top == 0.0:
        return ()
    return tuple(int(j) for j in np.flatnonzero(norms > row_zero_tol * top))


def extract_pattern(B, row_zero_tol=ROW_ZERO_TOL, rank_tol=RANK_TOL) -> StructuralPattern:
    """Structural pattern of a nonzero coefficient matrix.

    Support is the set of rows with nonzero norm. If ``B[support]`` has rank
    below ``min(J, m)`` its column space gives ``U``; otherwise ``U`` is the
    J x J identity.
    """
    B = as_matrix(B, "B")
    p, m = B.shape
    support = row_support(B, row_zero_tol)
    if not support:
        raise EmptyModelError("cannot extract a pattern from the zero matrix")
    J = len(support)
    sub = B[list(support)]
    r = numerical_rank(sub, rank_tol)
    if r < min(J, m):
        U = thin_orthonormal_basis(sub, rank_tol).basis
    else:
        U = np.eye(J)
    return StructuralPattern(p, support, U)


def candidate_from_matrix(B, **info) -> CandidateModel:
    """Wrap an arbitrary nonzero estimate with its extracted pattern."""
    B = as_matrix(B, "B")
    pat = extract_pattern(B)
    J = pat.J
    r = numerical_rank(B[list(pat.support)])
    return CandidateModel(B, pat, J, r, dict(info))


def factor_design(X, pat: StructuralPattern) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != pat.p:
        raise DimensionError(f"X has {X.shape[-1]} columns, pattern expects p={pat.p}")
    return X[:, list(pat.support)] @ pat.U


def restricted_estimate(X, Y, pat: StructuralPattern) -> CandidateModel:
    """OLS refit of ``Y`` on the factor design ``X S U``; returns ``S U C``."""
    X = as_matrix(X, "X")
    Y = as_matrix(Y, "Y")
    Z = factor_design(X, pat)
    C = ols_fit(Z, Y)
    B = pat.SU @ C
    return CandidateModel(B, pat, info={"C": C})


def restricted_estimate_pinv(X, Y, pat: StructuralPattern, rank_tol=RANK_TOL) -> np.ndarray:
    """Minimum-norm variant ``S U (X S U)^+ Y`` via truncated SVD.

    Agrees with ``restricted_estimate`` on non-degenerate designs and stays
    defined when the factor design loses rank.
    """
    Z = factor_design(as_matrix(X, "X"), pat)
    Y = as_matrix(Y, "Y")
    U, s, Vt = np.linalg.svd(Z, full_matrices=False)
    keep = s > rank_tol * s[0] if s.size and s[0] > 0 else np.zeros(s.shape, dtype=bool)
    C = Vt[keep].T @ ((U[:, keep].T @ Y) / s[keep][:, None])
    return pat.SU @ C


def reduced_rank_refit(X, Y, support, r: int) -> CandidateModel:
    """Least squares under ``rank(B) <= r`` with rows outside ``support`` zero.

    Closed form: OLS on ``X[:, support]`` followed by projecting the
    coefficients onto the top-``r`` right singular vectors of the OLS fitted
    values.
    """
    X = as_matrix(X, "X")
    Y = as_matrix(Y, "Y")
    p = X.shape[1]
    m = Y.shape[1]
    support = tuple(sorted(int(j) for j in support))
    J = len(support)
    if J < 1:
        raise ParameterError("support must be nonempty")
    if not 1 <= r <= min(J, m):
        raise ParameterError(f"rank r={r} outside [1, min(J, m)] = [1, {min(J, m)}]")
    XJ = X[:, list(support)]
    B_ols = ols_fit(XJ, Y)
    if r == min(J, m):
        pat = StructuralPattern(p, support, np.eye(J))
        B = np.zeros((p, m))
        B[list(support)] = B_ols
        return CandidateModel(B, pat, J, r, {"C": B_ols})
    _, _, Vt = np.linalg.svd(XJ @ B_ols, full_matrices=False)
    Vr = Vt[:r].T
    coef = B_ols @ Vr
    U = thin_orthonormal_basis(coef).basis
    if U.shape[1] != r:
        raise DegenerateDesignError("rank-r coefficient factor collapsed")
    pat = StructuralPattern(p, support, U)
    B = np.zeros((p, m))
    B[list(support)] = coef @ Vr.T
    return CandidateModel(B, pat, J, r, {"C": U.T @ B[list(support)]})
