"""Factor regressions and pairwise dependence networks.

Pairwise builders work on GARCH-filtered returns. The pair-level functions
take :class:`~finnet.volatility.FilteredSeries` and refuse plain arrays; the
network-level functions filter a :class:`ReturnsPanel` themselves.

Conventions:

* Granger edges point from cause to effect. ``i -> j`` is tested by the lag
  of ``r_i`` in the regression of ``r_j`` on an intercept, its own lag and
  the lag of ``r_i`` (two-sided t-test).
* Robust pair regressions ``r_i = b0 + b1 r_j + e`` use Student-t errors
  with fixed degrees of freedom, fitted by iteratively reweighted least
  squares. The p-value is one-sided for ``b1 > 0``. A pair is linked when
  either direction is significant (``rule="both"`` is available), with weight
  ``gamma - p`` scaled so the largest weight is 1.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .correlation import SquareDependencyMatrix
from .filtergraph.graph import FilteredGraph
from .panel import ReturnsPanel
from .volatility import FilteredSeries, GarchSpec, degarch, garch_fit

DIRECTIONS = ("undirected", "i->j", "j->i", "bidirectional")


@dataclass
class FactorFit:
    alpha: float
    betas: np.ndarray
    resid_var: float
    p_values: np.ndarray  # intercept first, then one per factor
    residuals: np.ndarray
    excess: bool = False


@dataclass(frozen=True)
class PairEdge:
    i: str
    j: str
    beta: float
    p_value: float
    direction: str = "undirected"

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p-value {self.p_value} outside [0, 1]")
        if self.direction not in DIRECTIONS:
            raise ValueError(f"unknown direction {self.direction!r}")


@dataclass
class PValueNetwork:
    graph: FilteredGraph
    gamma: float
    pvalues: SquareDependencyMatrix  # entry (i, j): p-value of the regression of i on j
    rule: str = "either"


@dataclass
class RobustFit:
    coef: np.ndarray
    se: np.ndarray
    scale: float
    weights: np.ndarray
    converged: bool
    n_iter: int


# -- least squares -----------------------------------------------------------

def _ols(y: np.ndarray, x: np.ndarray):
    """Coefficients, standard errors, residuals and residual dof; raises on rank deficiency."""
    n, k = x.shape
    if np.linalg.matrix_rank(x) < k:
        raise ValueError("regressors are collinear")
    coef, *_ = np.linalg.lstsq(x, y, rcond=None)
    resid = y - x @ coef
    dof = n - k
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(x.T @ x)
    return coef, np.sqrt(np.diag(cov)), resid, dof


def _two_sided(tstat, dof):
    return np.clip(2.0 * stats.t.sf(np.abs(tstat), dof), 0.0, 1.0)


def factor_fit(asset, factors, riskfree=None) -> FactorFit:
    """Least-squares factor model ``r = alpha + sum beta_k f_k + e``.

    Args:
        asset: return series of length T.
        factors: one factor series or a sequence of them (each length T).
        riskfree: optional risk-free series; when given it is subtracted from
            the asset and from the first factor (the market), giving the
            excess-return form.
    """
    y = np.asarray(asset, dtype=float)
    f = np.asarray(factors, dtype=float)
    if f.ndim == 1:
        f = f[None, :]
    if f.shape[1] != y.size:
        raise ValueError("asset and factor lengths differ")
    f = f.copy()
    excess = riskfree is not None
    if excess:
        rf = np.asarray(riskfree, dtype=float)
        if rf.size != y.size:
            raise ValueError("risk-free series length differs")
        y = y - rf
        f[0] = f[0] - rf
    k = f.shape[0]
    if y.size < k + 3:
        raise ValueError(f"need at least {k + 3} observations for {k} factors")
    x = np.column_stack([np.ones(y.size), f.T])
    coef, se, resid, dof = _ols(y, x)
    resid_var = float(resid @ resid) / dof
    with np.errstate(divide="ignore", invalid="ignore"):
        tstat = np.where(se > 0, coef / np.where(se > 0, se, 1.0), np.where(coef == 0, 0.0, np.inf))
    return FactorFit(float(coef[0]), coef[1:], resid_var, _two_sided(tstat, dof), resid, excess)


# -- Granger -------------------------------------------------------------------

def _require_filtered(*series):
    for s in series:
        if not isinstance(s, FilteredSeries):
            raise TypeError("expected GARCH-filtered input (FilteredSeries); de-garch the returns first")


def _lag_test(y: np.ndarray, own: np.ndarray, other: np.ndarray):
    """Slope and two-sided p-value of ``other`` in ``y ~ 1 + own + other``."""
    x = np.column_stack([np.ones(y.size), own, other])
    coef, se, _, dof = _ols(y, x)
    t = coef[2] / se[2] if se[2] > 0 else (0.0 if coef[2] == 0 else np.inf)
    return float(coef[2]), float(_two_sided(t, dof))


def granger_pair(ri: FilteredSeries, rj: FilteredSeries, names: Tuple[str, str] = ("i", "j"),
                 min_length: int = 30) -> Tuple[PairEdge, PairEdge]:
    """One-lag Granger tests in both directions.

    Returns ``(edge i->j, edge j->i)``; each carries the lag coefficient of
    the cause in the effect's equation and its p-value.
    """
    _require_filtered(ri, rj)
    x, y = np.asarray(ri.values, dtype=float), np.asarray(rj.values, dtype=float)
    if x.size != y.size:
        raise ValueError("series lengths differ")
    if x.size < min_length:
        raise ValueError(f"series too short for a Granger test ({x.size} < {min_length})")
    b_ji, p_ji = _lag_test(y[1:], y[:-1], x[:-1])  # r_i lag in r_j equation: i -> j
    b_ij, p_ij = _lag_test(x[1:], x[:-1], y[:-1])
    a, b = names
    return PairEdge(a, b, b_ji, p_ji, "i->j"), PairEdge(b, a, b_ij, p_ij, "i->j")


def pair_relation(forward: PairEdge, backward: PairEdge, alpha: float = 0.05) -> Optional[str]:
    """Classify a tested pair as ``i->j``, ``j->i``, ``bidirectional`` or ``None``."""
    f, b = forward.p_value < alpha, backward.p_value < alpha
    if f and b:
        return "bidirectional"
    if f:
        return "i->j"
    if b:
        return "j->i"
    return None


def filter_panel(panel: ReturnsPanel, spec: GarchSpec = GarchSpec()) -> List[FilteredSeries]:
    return [degarch(panel.returns[k], garch_fit(panel.returns[k], spec), a)
            for k, a in enumerate(panel.assets)]


def _map(fn, items, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))  # map keeps input order
    return [fn(it) for it in items]


def granger_network(panel: ReturnsPanel, alpha: float = 0.05, spec: GarchSpec = GarchSpec(),
                    filtered: Optional[Sequence[FilteredSeries]] = None, threads: int = 1) -> FilteredGraph:
    """Directed graph with ``i -> j`` whenever ``r_i`` Granger-causes ``r_j`` at level ``alpha``.

    Edge weights are 1; ``graph.attrs`` holds per-edge ``beta`` and ``p_value``.
    """
    assets = list(panel.assets)
    if filtered is None:
        filtered = filter_panel(panel, spec) if len(assets) > 1 else []
    pairs = list(combinations(range(len(assets)), 2))
    results = _map(lambda ij: granger_pair(filtered[ij[0]], filtered[ij[1]],
                                           (assets[ij[0]], assets[ij[1]])), pairs, threads)
    edges, betas, pvals = [], [], []
    for (i, j), (fwd, bwd) in zip(pairs, results):
        for (a, b), e in (((i, j), fwd), ((j, i), bwd)):
            if e.p_value < alpha:
                edges.append((a, b, 1.0))
                betas.append(e.beta)
                pvals.append(e.p_value)
    g = FilteredGraph(assets, edges, True, "regression")
    g.attrs.update(beta=betas, p_value=pvals, alpha=alpha)
    return g


# -- robust regression ---------------------------------------------------------

def robust_regression(y, x, nu: float = 5.0, max_iter: int = 200, tol: float = 1e-10,
                      cov: str = "huber") -> RobustFit:
    """Linear regression with Student-t errors by iteratively reweighted least squares.

    ``x`` must already contain any intercept column. Each iteration weights
    observations by ``(nu + 1) / (nu + (e / s)^2)`` and updates the scale as
    the weighted mean square residual.

    ``cov="huber"`` (default) gives the M-estimator covariance
    ``k^2 s^2 [sum psi^2 / (n - p)] / mean(psi')^2 (X'X)^-1`` with Huber's
    small-sample factor ``k``; it stays valid when the errors are not t.
    ``cov="model"`` uses the t-model information ``s^2 (nu + 3) / (nu + 1) (X'X)^-1``.
    """
    if cov not in ("huber", "model"):
        raise ValueError("cov must be 'huber' or 'model'")
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if nu <= 0:
        raise ValueError("degrees of freedom must be positive")
    if np.linalg.matrix_rank(x) < x.shape[1]:
        raise ValueError("regressors are collinear")
    coef, *_ = np.linalg.lstsq(x, y, rcond=None)
    resid = y - x @ coef
    s2 = max(float(resid @ resid) / y.size, 1e-300)
    converged = False
    w = np.ones_like(y)
    it = 0
    for it in range(1, max_iter + 1):
        w = (nu + 1.0) / (nu + resid ** 2 / s2)
        xw = x * w[:, None]
        new = np.linalg.solve(x.T @ xw, xw.T @ y)
        resid = y - x @ new
        s2_new = max(float(np.sum(w * resid ** 2)) / y.size, 1e-300)
        step = np.max(np.abs(new - coef)) + abs(s2_new - s2) / s2
        coef, s2 = new, s2_new
        if step < tol:
            converged = True
            break
    xtx_inv = np.linalg.inv(x.T @ x)
    if cov == "model":
        vcov = s2 * (nu + 3.0) / (nu + 1.0) * xtx_inv
    else:
        n, k = x.shape
        u2 = resid ** 2 / s2
        psi2 = (nu + 1.0) ** 2 * u2 / (nu + u2) ** 2
        dpsi = (nu + 1.0) * (nu - u2) / (nu + u2) ** 2
        m = float(dpsi.mean())
        kappa = 1.0 + k / n * float(dpsi.var()) / m ** 2
        vcov = kappa ** 2 * s2 * float(psi2.sum()) / (n - k) / m ** 2 * xtx_inv
    return RobustFit(coef, np.sqrt(np.diag(vcov)), float(np.sqrt(s2)), w, converged, it)


def robust_pair(ri: FilteredSeries, rj: FilteredSeries, nu: float = 5.0,
                names: Tuple[str, str] = ("i", "j")) -> Tuple[PairEdge, PairEdge]:
    """Robust slopes of ``r_i`` on ``r_j`` and of ``r_j`` on ``r_i``, one-sided p-values for a positive slope."""
    _require_filtered(ri, rj)
    x, y = np.asarray(ri.values, dtype=float), np.asarray(rj.values, dtype=float)
    if x.size != y.size:
        raise ValueError("series lengths differ")
    if x.size < 30:
        raise ValueError("series too short for a pairwise regression")
    out = []
    for dep, reg, (a, b) in ((x, y, names), (y, x, names[::-1])):
        fit = robust_regression(dep, np.column_stack([np.ones(dep.size), reg]), nu)
        t = fit.coef[1] / fit.se[1] if fit.se[1] > 0 else np.inf * np.sign(fit.coef[1])
        p = float(np.clip(stats.t.sf(t, dep.size - 2), 0.0, 1.0))
        out.append(PairEdge(a, b, float(fit.coef[1]), p, "undirected"))
    return out[0], out[1]


def robust_pair_network(panel: ReturnsPanel, gamma: float = 0.05, nu: float = 5.0, rule: str = "either",
                        spec: GarchSpec = GarchSpec(), filtered: Optional[Sequence[FilteredSeries]] = None,
                        threads: int = 1) -> PValueNetwork:
    """Undirected network of significantly positive pairwise robust regressions.

    A pair's p-value is the smaller (``rule="either"``) or larger
    (``rule="both"``) of its two regression p-values; it is linked when that
    value is strictly below ``gamma``.
    """
    if rule not in ("either", "both"):
        raise ValueError("rule must be 'either' or 'both'")
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    assets = list(panel.assets)
    n = len(assets)
    if filtered is None:
        filtered = filter_panel(panel, spec) if n > 1 else []
    pairs = list(combinations(range(n), 2))
    results = _map(lambda ij: robust_pair(filtered[ij[0]], filtered[ij[1]], nu,
                                          (assets[ij[0]], assets[ij[1]])), pairs, threads)
    pmat = np.zeros((n, n))
    raw = []
    for (i, j), (e_ij, e_ji) in zip(pairs, results):
        pmat[i, j], pmat[j, i] = e_ij.p_value, e_ji.p_value
        p = min(e_ij.p_value, e_ji.p_value) if rule == "either" else max(e_ij.p_value, e_ji.p_value)
        if p < gamma:
            raw.append((i, j, gamma - p))
    top = max((w for *_, w in raw), default=1.0)
    graph = FilteredGraph(assets, [(i, j, w / top) for i, j, w in raw], False, "regression")
    graph.attrs.update(gamma=gamma, rule=rule, nu=nu)
    return PValueNetwork(graph, gamma, SquareDependencyMatrix("pvalue", pmat, assets), rule)


# -- aggregation ---------------------------------------------------------------

def _group_key(label) -> Tuple[str, str]:
    if isinstance(label, str):
        label = (label,)
    label = tuple(label)
    if not label:
        raise ValueError("empty label")
    sector = str(label[0])
    country = str(label[1]) if len(label) > 1 else ""
    return country, sector


def aggregate_network(net: FilteredGraph, labels: Mapping[str, object]) -> FilteredGraph:
    """Collapse assets into (country, sector) groups.

    The weight between two groups is the mean weight over every cross pair
    of their members, absent links counting as zero. Within-group links are
    dropped. Labels are ``(sector, country)`` tuples; a bare sector means a
    single unnamed country. Group nodes are named ``country|sector``.
    """
    missing = [a for a in net.nodes if a not in labels]
    if missing:
        raise ValueError(f"missing label for asset {missing[0]!r}")
    keys = [_group_key(labels[a]) for a in net.nodes]
    groups = sorted(set(keys))
    gidx = {g: k for k, g in enumerate(groups)}
    member = np.array([gidx[k] for k in keys])
    m = len(groups)
    onehot = np.zeros((len(keys), m))
    onehot[np.arange(len(keys)), member] = 1.0
    totals = onehot.T @ net.adjacency() @ onehot
    sizes = onehot.sum(axis=0)
    counts = np.outer(sizes, sizes)
    edges = []
    for a in range(m):
        for b in range(m):
            if a == b or (not net.directed and b < a):
                continue
            w = totals[a, b] / counts[a, b]
            if w > 0:
                edges.append((a, b, w))
    names = [f"{c}|{s}" for c, s in groups]
    out = FilteredGraph(names, edges, net.directed, "aggregate")
    out.attrs["group_sizes"] = {nm: int(sz) for nm, sz in zip(names, sizes)}
    return out
