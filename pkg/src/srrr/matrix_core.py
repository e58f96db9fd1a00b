"""Dense linear-algebra kernel: bases, projectors, subspace algebra, least squares.

Every function is pure. Matrices are plain 2-D ``numpy`` float arrays; inputs
are validated with :func:`as_matrix` at the boundary of each public call.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateDesignError, DimensionError, PreconditionError

RANK_TOL = 1e-10
ANGLE_TOL = 1e-8
SOLVE_TOL = 1e-10
ORTHO_TOL = 1e-10


def as_matrix(A, name="matrix") -> np.ndarray:
    """Return ``A`` as a finite 2-D float array with no empty dimension.

    1-D input is read as a column vector.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got {A.ndim}-D")
    if A.shape[0] < 1 or A.shape[1] < 1:
        raise DimensionError(f"{name} has an empty dimension: {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains NaN or Inf")
    return A


@dataclass(frozen=True)
class Subspace:
    """A linear subspace of R^ambient_dim stored by an orthonormal basis."""

    basis: np.ndarray

    def __post_init__(self):
        B = np.asarray(self.basis, dtype=float)
        if B.ndim != 2 or B.shape[0] < 1:
            raise DimensionError(f"basis must be ambient_dim x k, got {B.shape}")
        if B.shape[1] > B.shape[0]:
            raise DimensionError("more basis vectors than ambient dimensions")
        if B.shape[1] and np.linalg.norm(B.T @ B - np.eye(B.shape[1])) > ORTHO_TOL:
            raise PreconditionError("basis columns are not orthonormal")
        B.setflags(write=False)
        object.__setattr__(self, "basis", B)

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @classmethod
    def trivial(cls, ambient_dim: int) -> "Subspace":
        return cls(np.zeros((ambient_dim, 0)))

    @classmethod
    def full(cls, ambient_dim: int) -> "Subspace":
        return cls(np.eye(ambient_dim))

    def contains(self, v, tol=1e-8) -> bool:
        """True when every column of ``v`` lies in the subspace (relative tol)."""
        v = np.asarray(v, dtype=float).reshape(self.ambient_dim, -1)
        scale = max(np.linalg.norm(v), 1.0)
        resid = v - self.basis @ (self.basis.T @ v)
        return bool(np.linalg.norm(resid) <= tol * scale)


def numerical_rank(A, rank_tol=RANK_TOL) -> int:
    """Count singular values above ``rank_tol`` times the largest one."""
    s = np.linalg.svd(np.asarray(A, dtype=float), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rank_tol * s[0]))


def thin_orthonormal_basis(A, rank_tol=RANK_TOL) -> Subspace:
    """Orthonormal basis of the column space of ``A``.

    The number of returned columns is the numerical rank of ``A``; an all-zero
    input yields the trivial subspace.
    """
    A = as_matrix(A, "A")
    U, s, _ = np.linalg.svd(A, full_matrices=False)
    if s[0] == 0.0:
        return Subspace.trivial(A.shape[0])
    k = int(np.sum(s > rank_tol * s[0]))
    return Subspace(U[:, :k])


def orthogonal_projector(S: Subspace) -> np.ndarray:
    B = S.basis
    P = B @ B.T
    # exact symmetry, not just to rounding
    return 0.5 * (P + P.T)


def subspace_intersection(S1: Subspace, S2: Subspace, angle_tol=ANGLE_TOL) -> Subspace:
    """Intersection of two subspaces via their principal angles.

    Directions whose principal-angle cosine is at least ``1 - angle_tol`` are
    taken to be shared.
    """
    if S1.ambient_dim != S2.ambient_dim:
        raise DimensionError(
            f"ambient dimensions differ: {S1.ambient_dim} vs {S2.ambient_dim}"
        )
    n = S1.ambient_dim
    if S1.dim == 0 or S2.dim == 0:
        return Subspace.trivial(n)
    Ua, cos, Vta = np.linalg.svd(S1.basis.T @ S2.basis)
    k = int(np.sum(cos >= 1.0 - angle_tol))
    if k == 0:
        return Subspace.trivial(n)
    # average the two representations of each shared direction
    W = 0.5 * (S1.basis @ Ua[:, :k] + S2.basis @ Vta[:k].T)
    Q, _ = np.linalg.qr(W)
    return Subspace(Q)


def relative_complement(S_big: Subspace, S_small: Subspace, tol=1e-8) -> Subspace:
    """Orthogonal complement of ``S_small`` inside ``S_big``.

    Raises :class:`PreconditionError` unless ``S_small`` is contained in
    ``S_big``. The result satisfies ``P_big = P_small + P_result``.
    """
    if S_big.ambient_dim != S_small.ambient_dim:
        raise DimensionError("ambient dimensions differ")
    n = S_big.ambient_dim
    if S_small.dim and not S_big.contains(S_small.basis, tol):
        raise PreconditionError("S_small is not contained in S_big")
    k = S_big.dim - S_small.dim
    if k <= 0 or S_big.dim == 0:
        return Subspace.trivial(n)
    W = S_big.basis - S_small.basis @ (S_small.basis.T @ S_big.basis)
    U, _, _ = np.linalg.svd(W, full_matrices=False)
    return Subspace(U[:, :k])


def ols_fit(X, Y, solve_tol=SOLVE_TOL) -> np.ndarray:
    """Least-squares coefficients ``argmin_C ||Y - X C||_F``.

    Raises :class:`DegenerateDesignError` when the smallest singular value of
    ``X`` is not above ``solve_tol`` times the largest (no pseudo-inverse
    fallback).
    """
    X = as_matrix(X, "X")
    Y = as_matrix(Y, "Y")
    if X.shape[0] != Y.shape[0]:
        raise DimensionError(f"row mismatch: X has {X.shape[0]}, Y has {Y.shape[0]}")
    if X.shape[1] > X.shape[0]:
        raise DegenerateDesignError(
            f"{X.shape[1]} columns exceed {X.shape[0]} rows"
        )
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    if s[0] == 0.0 or s[-1] <= solve_tol * s[0]:
        raise DegenerateDesignError("design is numerically rank deficient")
    return Vt.T @ ((U.T @ Y) / s[:, None])
