"""VAR estimation, generalized forecast-error variance decompositions and
the spillover networks and connectedness measures built from them."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import pandas as pd

from .correlation import SquareDependencyMatrix
from .filtergraph.graph import FilteredGraph
from .panel import ReturnsPanel

MAX_VAR_ASSETS = 50
DIAGONAL_MODES = ("own-share", "incoming-sum", "paper-sum")  # last is an alias of incoming-sum


@dataclass
class VarFit:
    p: int
    coefs: np.ndarray  # p x N x N, coefs[k] multiplies y_{t-k-1}
    intercept: np.ndarray
    omega: np.ndarray
    spectral_radius: float
    assets: List[str]
    residuals: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.coefs.shape[1]

    @property
    def stable(self) -> bool:
        return self.spectral_radius < 1.0


@dataclass
class FevdMatrix:
    horizon: int
    raw: np.ndarray
    normalized: np.ndarray
    sigma: np.ndarray  # diagonal of the residual covariance
    assets: List[str]

    def as_matrix(self, normalized: bool = True) -> SquareDependencyMatrix:
        return SquareDependencyMatrix("fevd", self.normalized if normalized else self.raw, list(self.assets))

    def to_csv(self, path, normalized: bool = True) -> None:
        self.as_matrix(normalized).to_csv(path)


def _as_array(panel):
    if isinstance(panel, ReturnsPanel):
        return panel.returns, list(panel.assets)
    x = np.atleast_2d(np.asarray(panel, dtype=float))
    return x, [f"A{i}" for i in range(x.shape[0])]


def companion(coefs: np.ndarray) -> np.ndarray:
    p, n, _ = coefs.shape
    top = np.hstack(list(coefs))
    if p == 1:
        return top
    bottom = np.hstack([np.eye(n * (p - 1)), np.zeros((n * (p - 1), n))])
    return np.vstack([top, bottom])


def var_fit(panel, p: int = 1, max_assets: int = MAX_VAR_ASSETS) -> VarFit:
    """Equation-by-equation least squares VAR(p) with intercept.

    Unstable fits (companion spectral radius >= 1) are returned and flagged
    through ``stable``, not rejected.
    """
    x, assets = _as_array(panel)
    n, t_len = x.shape
    if p < 1:
        raise ValueError("lag order p must be at least 1")
    if n > max_assets:
        raise ValueError(f"VAR is capped at {max_assets} series, got {n}")
    if t_len <= n * p + 10:
        raise ValueError(f"need more than {n * p + 10} observations, got {t_len}")
    y = x[:, p:].T
    lags = [x[:, p - k - 1:t_len - k - 1].T for k in range(p)]
    design = np.column_stack([np.ones(t_len - p)] + lags)
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise ValueError("singular regressor matrix")
    beta, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ beta
    dof = resid.shape[0] - design.shape[1]
    omega = resid.T @ resid / dof
    omega = 0.5 * (omega + omega.T)
    coefs = np.stack([beta[1 + k * n:1 + (k + 1) * n].T for k in range(p)])
    radius = float(np.max(np.abs(np.linalg.eigvals(companion(coefs)))))
    return VarFit(p, coefs, beta[0], omega, radius, assets, resid.T)


def ma_coefficients(fit: VarFit, horizon: int) -> np.ndarray:
    """``Theta_0 .. Theta_{H-1}`` with ``Theta_0 = I`` and ``Theta_h = sum_k A_k Theta_{h-k}``."""
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    n, p = fit.n, fit.p
    theta = np.zeros((horizon, n, n))
    theta[0] = np.eye(n)
    for h in range(1, horizon):
        for k in range(min(p, h)):
            theta[h] += fit.coefs[k] @ theta[h - k - 1]
    return theta


def gfevd_from_ma(theta: np.ndarray, omega: np.ndarray):
    """Raw and row-normalized generalized FEVD from MA matrices and shock covariance.

    ``d_ij = sigma_jj^-1 sum_h (e_i' Theta_h Omega e_j)^2 / sum_h e_i' Theta_h Omega Theta_h' e_i``
    """
    sigma = np.diag(omega).copy()
    if np.any(sigma <= 0):
        raise ValueError("zero shock variance")
    to = theta @ omega  # H x N x N
    num = np.sum(to ** 2, axis=0) / sigma[None, :]
    den = np.einsum("hij,hij->i", to, theta)  # diag of sum_h Theta Omega Theta'
    raw = num / den[:, None]
    return raw, raw / raw.sum(axis=1, keepdims=True), sigma


def gfevd(fit: VarFit, horizon: int = 10, require_stable: bool = True) -> FevdMatrix:
    if require_stable and not fit.stable:
        raise ValueError(f"unstable VAR (spectral radius {fit.spectral_radius:.4f})")
    raw, norm, sigma = gfevd_from_ma(ma_coefficients(fit, horizon), fit.omega)
    return FevdMatrix(horizon, raw, norm, sigma, list(fit.assets))


def spillover_network(fevd: FevdMatrix, diagonal_mode: str = "own-share") -> FilteredGraph:
    """Directed edge ``j -> i`` weighted by ``d_ij`` for every ``i != j`` with positive share.

    Self-loops are not stored; ``attrs["diagonal"]`` holds the diagonal under
    the chosen mode: the own share ``d_ii`` or the sum of incoming shares.
    """
    if diagonal_mode not in DIAGONAL_MODES:
        raise ValueError(f"diagonal_mode must be one of {DIAGONAL_MODES}")
    d = fevd.normalized
    n = d.shape[0]
    edges = [(j, i, float(d[i, j])) for j in range(n) for i in range(n) if i != j and d[i, j] > 0]
    g = FilteredGraph(list(fevd.assets), edges, True, "fevd")
    off = d - np.diag(np.diag(d))
    diag = np.diag(d) if diagonal_mode == "own-share" else off.sum(axis=1)
    g.attrs.update(diagonal=[float(v) for v in diag], diagonal_mode=diagonal_mode, horizon=fevd.horizon)
    return g


@dataclass
class Connectedness:
    to: np.ndarray
    from_: np.ndarray
    total: float
    assets: List[str]

    @property
    def net(self) -> np.ndarray:
        return self.to - self.from_

    def to_json(self) -> str:
        return json.dumps({"total": self.total,
                           "to": dict(zip(self.assets, map(float, self.to))),
                           "from": dict(zip(self.assets, map(float, self.from_)))})


def connectedness(fevd: FevdMatrix) -> Connectedness:
    """``from_i = sum_{j!=i} d_ij``, ``to_j = sum_{i!=j} d_ij``, ``total = mean of from``."""
    d = fevd.normalized
    off = d - np.diag(np.diag(d))
    frm = off.sum(axis=1)
    return Connectedness(off.sum(axis=0), frm, float(frm.sum() / d.shape[0]), list(fevd.assets))


def rolling_spillover(panel, p: int = 1, horizon: int = 10, delta_t: int = 250, step: int = 1) -> pd.DataFrame:
    """Total connectedness per window, indexed by the timestamp of the last observation.

    Windows whose VAR is unstable get ``NaN`` and ``flag`` set; fitting
    errors propagate.
    """
    x, assets = _as_array(panel)
    stamps = list(panel.timestamps) if isinstance(panel, ReturnsPanel) else [str(k) for k in range(x.shape[1])]
    t_len = x.shape[1]
    if delta_t > t_len:
        raise ValueError("window longer than the sample")
    if step < 1:
        raise ValueError("step must be at least 1")
    rows = []
    for end in range(delta_t, t_len + 1, step):
        w = x[:, end - delta_t:end]
        fit = var_fit(w, p)
        fit.assets = assets
        if fit.stable:
            rows.append((stamps[end - 1], connectedness(gfevd(fit, horizon)).total, False))
        else:
            rows.append((stamps[end - 1], float("nan"), True))
    return pd.DataFrame(rows, columns=["date", "total", "flag"])


def var_simulate(coefs, omega, n_obs: int, intercept=None, seed=None, burn: int = 500) -> np.ndarray:
    """Gaussian VAR path, N x n_obs; ``coefs`` is p x N x N (or N x N for p = 1)."""
    coefs = np.asarray(coefs, dtype=float)
    if coefs.ndim == 2:
        coefs = coefs[None]
    p, n, _ = coefs.shape
    omega = np.asarray(omega, dtype=float)
    c = np.zeros(n) if intercept is None else np.asarray(intercept, dtype=float)
    rng = np.random.default_rng(seed)
    chol = np.linalg.cholesky(omega)
    total = n_obs + burn
    shocks = rng.standard_normal((total, n)) @ chol.T
    y = np.zeros((total + p, n))
    for t in range(total):
        acc = c + shocks[t]
        for k in range(p):
            acc = acc + coefs[k] @ y[t + p - k - 1]
        y[t + p] = acc
    return y[p + burn:].T
