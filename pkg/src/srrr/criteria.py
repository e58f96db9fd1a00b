"""Complexity penalties and information criteria for row-sparse low-rank models.

The penalty for a model with support size ``J`` and rank ``r`` is

    P_o(J, r) = (min(q, J) + m - r) * r  +  J * log(e * p / J)

where ``q`` is the rank of the design. The first term counts free parameters
(DF); the second is the inflation paid for searching among ``p`` predictors
(IF). Scale-free forms divide through by a normalised penalty
``delta = A * P_o / (m n)`` and are +inf when ``delta >= 1``.
"""

import math
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np

from .exceptions import DimensionError, ParameterError, SrrrError
from .matrix_core import numerical_rank

PIC_A = 2.0
REC_DF_CONST = 2.0
REC_IF_CONST = 1.8
EBIC_GAMMA = 1.0
# RSS below this fraction of ||Y||_F^2 is treated as an exact fit
ZERO_FIT_TOL = 1e-20

ScaleFreeForm = Literal["fractional", "gcv", "log", "plugin"]
ClassicalKind = Literal["aic", "bic", "ebic"]


@dataclass(frozen=True)
class ComplexityPenalty:
    J: int
    r: int
    p: int
    q: int
    m: int

    @property
    def df(self) -> float:
        return float((min(self.q, self.J) + self.m - self.r) * self.r)

    @property
    def inflation(self) -> float:
        return self.J * math.log(math.e * self.p / self.J)

    @property
    def total(self) -> float:
        return self.df + self.inflation

    @property
    def residual_df(self) -> float:
        """(min(q, J) - r) * r, the DF excess over the m*r baseline."""
        return float((min(self.q, self.J) - self.r) * self.r)


def complexity_penalty(J: int, r: int, p: int, q: int, m: int) -> ComplexityPenalty:
    if not 1 <= J <= p:
        raise ParameterError(f"J={J} outside [1, p={p}]")
    if not 1 <= r <= min(J, m):
        raise ParameterError(f"r={r} outside [1, min(J, m)={min(J, m)}]")
    if q < 1:
        raise ParameterError("design rank q must be >= 1")
    return ComplexityPenalty(int(J), int(r), int(p), int(q), int(m))


@dataclass
class CriterionScore:
    candidate_id: int
    rss: float
    penalty: ComplexityPenalty
    value: float
    excluded: bool = False
    degenerate: bool = False

    def as_dict(self):
        return {
            "candidate_id": self.candidate_id,
            "J": self.penalty.J,
            "r": self.penalty.r,
            "rss": self.rss,
            "df": self.penalty.df,
            "inflation": self.penalty.inflation,
            "value": self.value,
            "excluded": self.excluded,
        }


def snap_rss(rss: float, y_norm2: float) -> float:
    """Round roundoff-level residuals of an exact fit down to zero."""
    return 0.0 if rss <= ZERO_FIT_TOL * y_norm2 else float(rss)


def scale_free_pic(rss, pen: ComplexityPenalty, m, n, form: ScaleFreeForm = "fractional", A=PIC_A):
    """Scale-free PIC value; ``+inf`` when ``A * P_o / (m n) >= 1``.

    With ``rss == 0`` the log form returns ``-inf`` (a degenerate exact fit).
    """
    if rss < 0:
        raise ParameterError("rss must be nonnegative")
    delta = A * pen.total / (m * n)
    if delta >= 1.0:
        return math.inf
    if form == "fractional":
        return rss / (1.0 - delta)
    if form == "gcv":
        return rss / (1.0 - delta) ** 2
    if form == "log":
        if rss == 0.0:
            return -math.inf
        return math.log(rss) + delta
    if form == "plugin":
        return rss + delta * rss
    raise ValueError(f"unknown scale-free form {form!r}")


def pic_recommended(rss, df, inflation, m, n):
    """Fractional PIC with DF and IF weighted by 2 and 1.8."""
    denom = 1.0 - (REC_DF_CONST * df + REC_IF_CONST * inflation) / (m * n)
    if denom <= 0.0:
        return math.inf
    return rss / denom


def log_binomial(p: int, J: int) -> float:
    return math.lgamma(p + 1) - math.lgamma(J + 1) - math.lgamma(p - J + 1)


def classical_ic(rss, df_effective, m, n, p, J, kind: ClassicalKind = "aic"):
    """Log-form AIC/BIC/EBIC: ``log(rss) + penalty / (m n)``.

    ``df_effective`` is the free-parameter count ``(J + m - r) r``. EBIC adds
    ``2 log C(p, J)`` to the BIC penalty. ``rss == 0`` gives ``-inf``.
    """
    if rss < 0:
        raise ParameterError("rss must be nonnegative")
    if kind == "aic":
        pen = 2.0 * df_effective
    elif kind == "bic":
        pen = math.log(n) * df_effective
    elif kind == "ebic":
        pen = math.log(n) * df_effective + 2.0 * EBIC_GAMMA * log_binomial(p, J)
    else:
        raise ValueError(f"unknown criterion {kind!r}")
    if rss == 0.0:
        return -math.inf
    return math.log(rss) + pen / (m * n)


def argmin_with_ties(values: Sequence[float], penalties: Sequence[float]) -> int:
    """Index of the smallest value; ties go to smaller penalty, then index.

    Raises when every value is ``+inf``.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise SrrrError("no candidates to select from")
    if np.all(values == np.inf):
        raise SrrrError("every candidate is excluded")
    order = np.lexsort((np.arange(values.size), np.asarray(penalties, dtype=float), values))
    return int(order[0])


def pic_select(candidates, X, Y, sigma: float, A: float = PIC_A, q: Optional[int] = None):
    """Select by ``0.5 * ||Y - X B||^2 + A sigma^2 P_o(B)`` with known ``sigma``.

    Returns ``(index, scores)``.
    """
    if not candidates:
        raise SrrrError("empty candidate list")
    if sigma <= 0 or A <= 0:
        raise ParameterError("sigma and A must be positive")
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n, p = X.shape
    m = Y.shape[1]
    if q is None:
        q = numerical_rank(X)
    scores = []
    for i, c in enumerate(candidates):
        if c.B.shape != (p, m):
            raise DimensionError(f"candidate {i} has shape {c.B.shape}, expected {(p, m)}")
        pen = complexity_penalty(c.J, c.r, p, q, m)
        rss = c.rss(X, Y)
        value = 0.5 * rss + A * sigma**2 * pen.total
        scores.append(CriterionScore(i, rss, pen, value))
    idx = argmin_with_ties([s.value for s in scores], [s.penalty.total for s in scores])
    return idx, scores
