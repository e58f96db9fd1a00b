"""Synthetic experiments: data designs, metrics, method comparison and bootstrap.

Every replication draws its own generator from ``(seed, rep)``, so results do
not depend on worker count or scheduling. The per-replication log is the
source of truth; summaries are always recomputed from it.
"""

import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial
from typing import Dict, List, Optional, Sequence

import numpy as np

from .criteria import (
    PIC_A,
    argmin_with_ties,
    classical_ic,
    complexity_penalty,
    pic_recommended,
    scale_free_pic,
    snap_rss,
)
from .exceptions import DimensionError, ParameterError, SrrrError
from .matrix_core import as_matrix, numerical_rank
from .path_solver import (
    PathConfig,
    default_penalty_grids,
    lasso_like_path,
    solution_path,
    sparse_lowrank_path,
)
from .patterns import CandidateModel, candidate_from_matrix, extract_pattern
from .resampling import (
    SCV_ALPHA1,
    SCV_ALPHA2,
    SCV_FRAC_ALPHA1,
    SCV_FRAC_ALPHA2,
    fixed_lambda_cv,
    make_folds,
    scv_evaluate,
    scv_fold_supports,
)

log = logging.getLogger(__name__)

METHODS = ("AIC", "BIC", "EBIC", "PIC", "PIC-rec", "2-CV", "5-CV", "10-CV", "5-SCV", "5-SCV-frac")
_ALIASES = {
    "pic-recommended": "PIC-rec",
    "5-scv(plugin)": "5-SCV",
    "5-scv-plugin": "5-SCV",
    "5-scv(fractional)": "5-SCV-frac",
    "5-scv-fractional": "5-SCV-frac",
}
LOG_COLUMNS = ("rep", "method", "J_hat", "r_hat", "mse", "m_rate", "fa_rate", "runtime_ms")


def canonical_method(name: str) -> str:
    key = name.strip()
    for m in METHODS:
        if key.lower() == m.lower():
            return m
    if key.lower() in _ALIASES:
        return _ALIASES[key.lower()]
    raise ParameterError(f"unknown method {name!r}; choose from {', '.join(METHODS)}")


@dataclass(frozen=True, eq=False)
class RegressionData:
    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = as_matrix(self.X, "X")
        Y = as_matrix(self.Y, "Y")
        if X.shape[0] != Y.shape[0]:
            raise DimensionError(f"dimension mismatch: X has {X.shape[0]} rows, Y has {Y.shape[0]}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def m(self) -> int:
        return self.Y.shape[1]


@dataclass(frozen=True)
class SimConfig:
    n: int = 100
    p: int = 60
    m: int = 15
    J_true: int = 30
    r_true: int = 5
    rho: float = 0.1
    b: float = 0.1
    sigma: float = 1.0
    reps: int = 50
    seed: int = 0

    def __post_init__(self):
        if min(self.n, self.p, self.m) < 1:
            raise ParameterError("n, p and m must be positive")
        if not 1 <= self.J_true <= self.p:
            raise ParameterError("need 1 <= J_true <= p")
        if not 1 <= self.r_true <= min(self.J_true, self.m):
            raise ParameterError("need 1 <= r_true <= min(J_true, m)")
        if not 0.0 <= self.rho < 1.0:
            raise ParameterError("rho must lie in [0, 1)")
        if self.sigma < 0:
            raise ParameterError("sigma must be nonnegative")
        if self.reps < 1:
            raise ParameterError("reps must be >= 1")


@dataclass(frozen=True, eq=False)
class SimInstance:
    data: RegressionData
    B_star: np.ndarray
    Sigma: np.ndarray
    support: tuple
    truth: Optional[CandidateModel]  # None when B* = 0


def ar1_covariance(p: int, rho: float) -> np.ndarray:
    idx = np.arange(p)
    return rho ** np.abs(np.subtract.outer(idx, idx)).astype(float)


def rep_rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(rep)])


def generate_instance(cfg: SimConfig, rep: int = 0) -> SimInstance:
    """X rows ~ N(0, Sigma_ar1), B* = b A0 A1 on the first J_true rows, Y = X B* + sigma E."""
    rng = rep_rng(cfg.seed, rep)
    Sigma = ar1_covariance(cfg.p, cfg.rho)
    L = np.linalg.cholesky(Sigma)
    X = rng.standard_normal((cfg.n, cfg.p)) @ L.T
    A0 = rng.standard_normal((cfg.J_true, cfg.r_true))
    A1 = rng.standard_normal((cfg.r_true, cfg.m))
    B_star = np.zeros((cfg.p, cfg.m))
    B_star[: cfg.J_true] = cfg.b * (A0 @ A1)
    E = rng.standard_normal((cfg.n, cfg.m))
    Y = X @ B_star + cfg.sigma * E
    truth = candidate_from_matrix(B_star) if cfg.b != 0 else None
    support = tuple(range(cfg.J_true)) if cfg.b != 0 else ()
    return SimInstance(RegressionData(X, Y), B_star, Sigma, support, truth)


def mse_metric(B_hat, B_star, Sigma, m: Optional[int] = None) -> float:
    """``tr((B_hat - B*)' Sigma (B_hat - B*)) / m`` for one replication."""
    B_hat = np.asarray(B_hat, dtype=float)
    B_star = np.asarray(B_star, dtype=float)
    if B_hat.ndim == 1:
        B_hat = B_hat[:, None]
    if B_star.ndim == 1:
        B_star = B_star[:, None]
    Sigma = np.asarray(Sigma, dtype=float)
    if B_hat.shape != B_star.shape or Sigma.shape != (B_hat.shape[0],) * 2:
        raise DimensionError(f"shapes {B_hat.shape}, {B_star.shape}, {Sigma.shape} do not conform")
    m = B_hat.shape[1] if m is None else m
    D = B_hat - B_star
    return float(np.sum(D * (Sigma @ D)) / m)


def selection_rates(J_hat, J_star, p: int):
    """Missing and false-alarm rates in percent: ``(M, FA)``."""
    J_hat, J_star = set(int(j) for j in J_hat), set(int(j) for j in J_star)
    if not J_star:
        raise ParameterError("the true support is empty")
    if any(j < 0 or j >= p for j in J_hat | J_star):
        raise ParameterError(f"indices must lie in [0, {p})")
    miss = 100.0 * len(J_star - J_hat) / len(J_star)
    nulls = p - len(J_star)
    fa = 100.0 * len(J_hat - J_star) / nulls if nulls else 0.0
    return miss, fa


# -- model selection ---------------------------------------------------------


@dataclass(frozen=True)
class SelectionSettings:
    """Constants shared by every selection method."""

    scv_folds: int = 5
    alpha1: float = SCV_ALPHA1
    alpha2: float = SCV_ALPHA2
    frac_alpha1: float = SCV_FRAC_ALPHA1
    frac_alpha2: float = SCV_FRAC_ALPHA2
    pic_A: float = PIC_A
    # fixed-parameter CV learner: points per penalty axis and grid depth
    n_penalty: int = 8
    penalty_ratio: float = 1e-2

    def __post_init__(self):
        if self.scv_folds < 2:
            raise ParameterError("scv_folds must be >= 2")
        if min(self.alpha1, self.alpha2, self.frac_alpha1, self.frac_alpha2, self.pic_A) <= 0:
            raise ParameterError("calibration constants must be positive")


@dataclass
class Selection:
    method: str
    B: np.ndarray
    J: int
    r: int
    support: tuple
    runtime_ms: float
    detail: dict = field(default_factory=dict)


def _selection(method, B, runtime_ms, **detail) -> Selection:
    support = tuple(int(j) for j in np.flatnonzero(np.linalg.norm(B, axis=1) > 0))
    r = numerical_rank(B) if support else 0
    return Selection(method, B, len(support), r, support, runtime_ms, detail)


class _Selector:
    """Lazily shares the candidate path and the penalised CV path between methods."""

    def __init__(self, data: RegressionData, path_cfg: PathConfig, settings: SelectionSettings, fold_seed: int):
        self.data = data
        self.path_cfg = path_cfg
        self.s = settings
        self.fold_seed = fold_seed
        self._path = None
        self._path_ms = 0.0
        self._scv = {}
        self._cv_full = None
        self.values = {}

    def path(self):
        if self._path is None:
            t = time.perf_counter()
            cands = solution_path(self.data.X, self.data.Y, self.path_cfg)
            if not cands:
                raise SrrrError("the candidate path is empty")
            X, Y = self.data.X, self.data.Y
            n, p = X.shape
            m = Y.shape[1]
            q = numerical_rank(X)
            y2 = float(np.sum(Y * Y))
            rss = np.array([snap_rss(c.rss(X, Y), y2) for c in cands])
            pens = [complexity_penalty(c.J, c.r, p, q, m) for c in cands]
            self._path = (cands, rss, pens, q)
            self._path_ms = 1e3 * (time.perf_counter() - t)
        return self._path

    def _pick(self, method, values):
        cands, _, pens, _ = self._path
        i = argmin_with_ties(values, [pen.total for pen in pens])
        return i, cands[i]

    def run(self, method: str) -> Selection:
        t = time.perf_counter()
        if method.endswith("-CV"):
            B, detail = self._fixed_cv(int(method.split("-")[0]))
            return _selection(method, B, 1e3 * (time.perf_counter() - t), **detail)
        cands, rss, pens, q = self.path()
        t = time.perf_counter()
        X, Y = self.data.X, self.data.Y
        n, p = X.shape
        m = Y.shape[1]
        if method in ("AIC", "BIC", "EBIC"):
            vals = [
                classical_ic(rss[i], (c.J + m - c.r) * c.r, m, n, p, c.J, method.lower())
                for i, c in enumerate(cands)
            ]
        elif method == "PIC":
            vals = [scale_free_pic(rss[i], pen, m, n, "fractional", self.s.pic_A) for i, pen in enumerate(pens)]
        elif method == "PIC-rec":
            vals = [pic_recommended(rss[i], pen.df, pen.inflation, m, n) for i, pen in enumerate(pens)]
        elif method in ("5-SCV", "5-SCV-frac"):
            vals = self._scv_values("plugin" if method == "5-SCV" else "fractional")
        else:
            raise ParameterError(f"unknown method {method!r}")
        self.values[method] = list(vals)
        i, c = self._pick(method, vals)
        ms = self._path_ms + 1e3 * (time.perf_counter() - t)
        return _selection(method, c.B, ms, candidate=i, score=float(vals[i]), pattern_rank=c.pattern.rank)

    def _scv_values(self, form):
        if form not in self._scv:
            cands, _, _, q = self._path
            plan = make_folds(self.data.n, self.s.scv_folds, self.fold_seed)
            if form == "plugin":
                a1, a2 = self.s.alpha1, self.s.alpha2
            else:
                a1, a2 = self.s.frac_alpha1, self.s.frac_alpha2
            rep = scv_evaluate(self.data.X, self.data.Y, [c.pattern for c in cands], plan, a1, a2, form, q)
            self._scv[form] = np.where(rep.excluded, np.inf, rep.calibrated)
        return self._scv[form]

    def _fixed_cv(self, K: int):
        X, Y = self.data.X, self.data.Y
        rows, nucs = default_penalty_grids(X, Y, self.s.n_penalty, self.s.n_penalty, self.s.penalty_ratio)
        if self._cv_full is None:
            self._cv_full = sparse_lowrank_path(X, Y, rows, nucs)
        cells = list(self._cv_full)

        def learner(Xt, Yt, grid):
            fits = sparse_lowrank_path(Xt, Yt, rows, nucs)
            return [fits[c] for c in grid]

        plan = make_folds(self.data.n, K, self.fold_seed)
        cv = fixed_lambda_cv(X, Y, learner, cells, plan)
        best = cv.best()
        lam_row, lam_nuc = cells[best]
        cards = cv.cardinalities[best]
        detail = {
            "lambda_row": lam_row,
            "lambda_nuclear": lam_nuc,
            "fold_card_min": int(cards.min()),
            "fold_card_max": int(cards.max()),
        }
        return self._cv_full[cells[best]], detail


PATH_METHODS = tuple(m for m in METHODS if not m.endswith("-CV"))


def score_table(
    data: RegressionData,
    methods: Sequence[str] = PATH_METHODS,
    path_cfg: Optional[PathConfig] = None,
    settings: Optional[SelectionSettings] = None,
    fold_seed: int = 0,
):
    """Selections plus one row per path candidate with every method's score.

    Returns ``(selections, rows)``. Fixed-parameter CV methods are not scored
    per candidate and are rejected here.
    """
    methods = [canonical_method(m) for m in methods]
    bad = [m for m in methods if m not in PATH_METHODS]
    if bad:
        raise ParameterError(f"methods {bad} do not score path candidates")
    sel = _Selector(data, path_cfg or PathConfig(), settings or SelectionSettings(), fold_seed)
    selections = {}
    for method in methods:
        try:
            selections[method] = sel.run(method)
        except (SrrrError, np.linalg.LinAlgError) as exc:
            log.warning("%s failed: %s", method, exc)
            selections[method] = exc
    cands, rss, pens, _ = sel.path()
    rows = []
    for i, c in enumerate(cands):
        rows.append(
            {
                "candidate_id": i,
                "support": list(c.pattern.support),
                "J": c.J,
                "r": c.r,
                "r_bar": c.pattern.rank,
                "rss": float(rss[i]),
                "df": pens[i].df,
                "inflation": pens[i].inflation,
                "scores": {},
            }
        )
    for method in methods:
        vals = sel.values.get(method)
        if vals is None:
            continue
        for row, v in zip(rows, vals):
            row["scores"][method] = float(v)
    return selections, rows


def select_models(
    data: RegressionData,
    methods: Sequence[str],
    path_cfg: Optional[PathConfig] = None,
    settings: Optional[SelectionSettings] = None,
    fold_seed: int = 0,
):
    """Run each method on one dataset.

    Returns ``{method: Selection}``; a method that fails maps to the exception
    it raised so callers can log and count it.
    """
    sel = _Selector(data, path_cfg or PathConfig(), settings or SelectionSettings(), fold_seed)
    out = {}
    for name in methods:
        method = canonical_method(name)
        try:
            out[method] = sel.run(method)
        except (SrrrError, np.linalg.LinAlgError) as exc:
            log.warning("%s failed: %s", method, exc)
            out[method] = exc
    return out


# -- experiments ---------------------------------------------------------------


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("SRRR_THREADS", "1")))
    except ValueError:
        return 1


def parallel_map(fn, items):
    """Ordered map over ``items``; uses worker processes when SRRR_THREADS > 1."""
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def fold_seed_for(seed: int, rep: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(rep), 1]).generate_state(1)[0])


def run_replication(rep: int, cfg: SimConfig, methods, path_cfg, settings, record_timing=True):
    inst = generate_instance(cfg, rep)
    results = select_models(inst.data, methods, path_cfg, settings, fold_seed_for(cfg.seed, rep))
    rows, failures = [], []
    for method, res in results.items():
        if isinstance(res, Exception):
            failures.append({"rep": rep, "method": method, "error": str(res)})
            continue
        if inst.support:
            m_rate, fa_rate = selection_rates(res.support, inst.support, cfg.p)
        else:
            m_rate, fa_rate = 0.0, 100.0 * res.J / cfg.p
        rows.append(
            {
                "rep": rep,
                "method": method,
                "J_hat": res.J,
                "r_hat": res.r,
                "mse": mse_metric(res.B, inst.B_star, inst.Sigma, cfg.m),
                "m_rate": m_rate,
                "fa_rate": fa_rate,
                "runtime_ms": round(res.runtime_ms, 3) if record_timing else 0.0,
            }
        )
    return rows, failures


@dataclass
class MethodSummary:
    method: str
    reps_ok: int
    median_mse: float
    median_mse_x1e3: float
    mse_se: Optional[float]
    median_J: float
    median_r: float
    mean_m_rate: float
    mean_fa_rate: float


@dataclass
class ExperimentReport:
    config: dict
    methods: List[str]
    summaries: Dict[str, MethodSummary]
    rows: List[dict]
    failures: List[dict]
    path_grid: dict

    def __getitem__(self, method: str) -> MethodSummary:
        return self.summaries[canonical_method(method)]

    def to_dict(self, include_rows: bool = False) -> dict:
        d = {
            "config": self.config,
            "methods": list(self.methods),
            "summaries": {k: asdict(v) for k, v in self.summaries.items()},
            "failures": list(self.failures),
            "failure_count": len(self.failures),
            "path_grid": self.path_grid,
        }
        if include_rows:
            d["rows"] = list(self.rows)
        return d


def summarize(rows: Sequence[dict], methods: Sequence[str]) -> Dict[str, MethodSummary]:
    """Per-method medians and means recomputed from log rows."""
    out = {}
    for method in methods:
        sub = sorted((r for r in rows if r["method"] == method), key=lambda r: r["rep"])
        if not sub:
            nan = math.nan
            out[method] = MethodSummary(method, 0, nan, nan, None, nan, nan, nan, nan)
            continue
        mse = np.array([r["mse"] for r in sub], dtype=float)
        se = float(np.std(mse, ddof=1) / math.sqrt(mse.size)) if mse.size > 1 else None
        med = float(np.median(mse))
        out[method] = MethodSummary(
            method,
            len(sub),
            med,
            1e3 * med,
            se,
            float(np.median([r["J_hat"] for r in sub])),
            float(np.median([r["r_hat"] for r in sub])),
            float(np.mean([r["m_rate"] for r in sub])),
            float(np.mean([r["fa_rate"] for r in sub])),
        )
    return out


def run_experiment(
    cfg: SimConfig,
    methods: Sequence[str] = METHODS,
    path_cfg: Optional[PathConfig] = None,
    settings: Optional[SelectionSettings] = None,
    record_timing: bool = True,
) -> ExperimentReport:
    methods = [canonical_method(m) for m in methods]
    path_cfg = path_cfg or PathConfig()
    settings = settings or SelectionSettings()
    J_grid, r_grid = path_cfg.resolve(cfg.n, cfg.p, cfg.m)
    fn = partial(
        run_replication,
        cfg=cfg,
        methods=methods,
        path_cfg=path_cfg,
        settings=settings,
        record_timing=record_timing,
    )
    rows, failures = [], []
    for rep_rows, rep_fail in parallel_map(fn, range(cfg.reps)):
        rows.extend(rep_rows)
        failures.extend(rep_fail)
    for f in failures:
        log.warning("rep %d, %s excluded: %s", f["rep"], f["method"], f["error"])
    return ExperimentReport(
        asdict(cfg),
        methods,
        summarize(rows, methods),
        rows,
        failures,
        {"J_grid": list(J_grid), "r_grid": list(r_grid)},
    )


# -- fold-wise inconsistency audit -------------------------------------------


@dataclass
class AuditReport:
    lambdas: np.ndarray
    min_card: np.ndarray
    med_card: np.ndarray
    max_card: np.ndarray
    fold_cards: np.ndarray
    scv_fold_supports: list
    scv_consistent: bool

    def rows(self) -> List[dict]:
        return [
            {"lambda": float(l), "min_card": int(a), "med_card": float(b), "max_card": int(c)}
            for l, a, b, c in zip(self.lambdas, self.min_card, self.med_card, self.max_card)
        ]

    def inconsistent_points(self) -> int:
        return int(np.sum(self.max_card > self.min_card))


def default_audit_grid(X, y, n_lambda: int = 30, ratio: float = 1e-2):
    top = float(np.max(np.abs(np.asarray(X).T @ np.asarray(y).reshape(-1))))
    return np.geomspace(top, top * ratio, n_lambda)


def inconsistency_audit(data: RegressionData, lambda_grid=None, K: int = 5, seed: int = 0) -> AuditReport:
    """Support sizes of fixed-lambda lasso fits across the K training splits.

    For comparison, each full-data lasso support is also cross-validated
    structurally, and the supports of its K fold fits are recorded.
    """
    if data.m != 1:
        raise ParameterError("the audit needs a single response (m = 1)")
    X, y = data.X, data.Y[:, 0]
    lams = default_audit_grid(X, y) if lambda_grid is None else np.asarray(lambda_grid, dtype=float)
    plan = make_folds(data.n, K, seed)

    def learner(Xt, Yt, grid):
        return list(lasso_like_path(Xt, Yt[:, 0], grid))

    cv = fixed_lambda_cv(X, data.Y, learner, list(lams), plan)
    cards = cv.cardinalities
    full = lasso_like_path(X, y, lams)
    supports, consistent = [], True
    for b in full:
        if not np.any(b):
            supports.append(None)
            continue
        pat = extract_pattern(b[:, None])
        try:
            folds = scv_fold_supports(X, data.Y, pat, plan)
        except SrrrError:
            supports.append(None)
            continue
        supports.append(folds)
        consistent &= all(s == pat.support for s in folds)
    return AuditReport(
        lams,
        cards.min(axis=1),
        np.median(cards, axis=1),
        cards.max(axis=1),
        cards,
        supports,
        bool(consistent),
    )


# -- bootstrap stability ------------------------------------------------------


@dataclass
class BootstrapReport:
    method: str
    J_hats: List[int]
    r_hats: List[int]
    frequencies: np.ndarray
    skipped: int
    requested: int

    @staticmethod
    def _iqr(v):
        if not v:
            return math.nan
        q1, q3 = np.percentile(v, [25, 75])
        return float(q3 - q1)

    @property
    def J_iqr(self) -> float:
        return self._iqr(self.J_hats)

    @property
    def r_iqr(self) -> float:
        return self._iqr(self.r_hats)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "J_hats": list(self.J_hats),
            "r_hats": list(self.r_hats),
            "J_iqr": self.J_iqr,
            "r_iqr": self.r_iqr,
            "frequencies": [float(f) for f in self.frequencies],
            "skipped": self.skipped,
            "requested": self.requested,
        }


def _bootstrap_one(b, data, method, path_cfg, settings, seed):
    rng = rep_rng(seed, b)
    idx = rng.integers(0, data.n, size=data.n)
    try:
        boot = RegressionData(data.X[idx], data.Y[idx])
    except SrrrError:
        return None
    res = select_models(boot, [method], path_cfg, settings, fold_seed_for(seed, b))[method]
    if isinstance(res, Exception):
        return None
    return res.J, res.r, res.support


def bootstrap_stability(
    data: RegressionData,
    method: str,
    B_reps: int,
    seed: int = 0,
    path_cfg: Optional[PathConfig] = None,
    settings: Optional[SelectionSettings] = None,
) -> BootstrapReport:
    """Distributions of the selected cardinality and rank over row resamples."""
    if B_reps < 1:
        raise ParameterError("B_reps must be >= 1")
    method = canonical_method(method)
    fn = partial(_bootstrap_one, data=data, method=method, path_cfg=path_cfg, settings=settings, seed=seed)
    J_hats, r_hats = [], []
    counts = np.zeros(data.p)
    skipped = 0
    for out in parallel_map(fn, range(B_reps)):
        if out is None:
            skipped += 1
            continue
        J_hats.append(out[0])
        r_hats.append(out[1])
        counts[list(out[2])] += 1
    done = B_reps - skipped
    freq = counts / done if done else counts
    if skipped:
        log.warning("%d of %d bootstrap resamples skipped", skipped, B_reps)
    return BootstrapReport(method, J_hats, r_hats, freq, skipped, B_reps)


# -- support recovery regime --------------------------------------------------


def kappa_surrogate(Sigma) -> float:
    """Smallest eigenvalue of the design covariance (a heuristic stand-in)."""
    return float(np.linalg.eigvalsh(np.asarray(Sigma, dtype=float))[0])


def signal_threshold(sigma, r_star, J_star, p, n, m, kappa, A=PIC_A) -> float:
    """Minimum row norm above which the selected support should contain the truth."""
    if kappa <= 0:
        raise ParameterError("kappa must be positive")
    inner = (r_star + math.log(p)) / (n * kappa) + m * r_star / (n * J_star * kappa)
    return 4.0 * math.sqrt(2.0 * A) * sigma * math.sqrt(inner)


def min_signal(B_star) -> float:
    norms = np.linalg.norm(np.asarray(B_star, dtype=float), axis=1)
    nz = norms[norms > 0]
    return float(nz.min()) if nz.size else 0.0


def meets_signal_condition(inst: SimInstance, sigma: float, A=PIC_A) -> bool:
    n, p = inst.data.X.shape
    m = inst.data.m
    if inst.truth is None:
        return False
    thr = signal_threshold(sigma, inst.truth.r, inst.truth.J, p, n, m, kappa_surrogate(inst.Sigma), A)
    return min_signal(inst.B_star) > thr
