"""Univariate GARCH(p, q) by Gaussian quasi-maximum likelihood, de-garching,
the BEKK covariance recursion and scalar DCC.

Conventions shared by every function here:

* The mean is removed by subtracting the sample mean; no ARMA mean equation.
* The variance recursion starts at ``h[0]`` = sample variance, and pre-sample
  squared shocks and variances are set to that same value.
* Stationarity ``sum(alpha) + sum(beta) < 1`` is built into the
  parameterization (softmax over the lags plus one slack component), so the
  optimizer runs unconstrained.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy import optimize, signal
from scipy.special import logsumexp

from .panel import ReturnsPanel

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class GarchSpec:
    p: int = 1  # variance lags (beta)
    q: int = 1  # shock lags (alpha)

    def __post_init__(self):
        if self.p < 1 or self.q < 1:
            raise ValueError("GARCH orders p and q must both be at least 1")


@dataclass
class GarchFit:
    alpha0: float
    alphas: np.ndarray
    betas: np.ndarray
    h: np.ndarray
    loglik: float
    converged: bool
    mean: float = 0.0
    loglik_start: float = float("nan")
    message: str = ""

    @property
    def spec(self) -> GarchSpec:
        return GarchSpec(p=len(self.betas), q=len(self.alphas))

    @property
    def persistence(self) -> float:
        return float(np.sum(self.alphas) + np.sum(self.betas))

    @property
    def unconditional_variance(self) -> float:
        return self.alpha0 / (1.0 - self.persistence)

    def params(self) -> dict:
        return {"alpha0": self.alpha0, "alphas": [float(a) for a in self.alphas],
                "betas": [float(b) for b in self.betas]}

    def to_json(self) -> str:
        return json.dumps({"params": self.params(), "mean": self.mean,
                           "loglik": self.loglik, "converged": self.converged})


@dataclass(frozen=True)
class FilteredSeries:
    """Returns divided by their GARCH volatility.

    Network builders that model de-garched data only accept this type, so
    raw returns cannot slip through by accident.
    """

    values: np.ndarray
    name: Optional[str] = None

    def __len__(self):
        return len(self.values)


def garch_variance(eps: np.ndarray, alpha0: float, alphas, betas, h0: Optional[float] = None) -> np.ndarray:
    """Conditional variance path ``h_t = alpha0 + sum a_i eps_{t-i}^2 + sum b_i h_{t-i}``."""
    eps = np.asarray(eps, dtype=float)
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    betas = np.atleast_1d(np.asarray(betas, dtype=float))
    n = eps.size
    s2 = float(np.mean(eps ** 2)) if h0 is None else float(h0)
    q, p = alphas.size, betas.size
    e2 = np.concatenate([np.full(q, s2), eps ** 2])
    # drive[t] = alpha0 + sum_i alphas[i] * eps^2[t - 1 - i], for t = 0..n-1
    drive = alpha0 + signal.lfilter(alphas, [1.0], e2)[q - 1:q - 1 + n]
    h = np.empty(n)
    h[0] = s2
    if n > 1:
        a = np.concatenate([[1.0], -betas])
        zi = signal.lfiltic([1.0], a, y=np.full(p, s2))
        h[1:], _ = signal.lfilter([1.0], a, drive[1:], zi=zi)
    return h


def gaussian_loglik(eps: np.ndarray, h: np.ndarray) -> float:
    return float(-0.5 * np.sum(LOG_2PI + np.log(h) + eps ** 2 / h))


def _unpack(theta: np.ndarray, spec: GarchSpec, scale: float):
    alpha0 = scale * np.exp(theta[0])
    logits = np.concatenate([theta[1:], [0.0]])
    shares = np.exp(logits - logsumexp(logits))
    return alpha0, shares[:spec.q], shares[spec.q:spec.q + spec.p]


def _pack(alpha0, alphas, betas, scale):
    shares = np.concatenate([alphas, betas])
    slack = max(1.0 - shares.sum(), 1e-8)
    return np.concatenate([[np.log(alpha0 / scale)], np.log(np.maximum(shares, 1e-8) / slack)])


def garch_fit(series, spec: GarchSpec = GarchSpec(), max_iter: int = 500, min_length: int = 200) -> GarchFit:
    """Gaussian quasi-maximum-likelihood GARCH(p, q) fit.

    Failure to converge within ``max_iter`` iterations is reported through
    ``converged=False``; the best parameters found are still returned.
    """
    r = np.asarray(series, dtype=float)
    if r.size < min_length:
        raise ValueError(f"GARCH estimation needs at least {min_length} observations, got {r.size}")
    if not np.isfinite(r).all():
        raise ValueError("series contains non-finite values")
    mu = float(r.mean())
    eps = r - mu
    s2 = float(np.mean(eps ** 2))
    if not s2 > 0:
        raise ValueError("cannot fit GARCH to a constant series")
    scale = s2

    def nll(theta):
        a0, al, be = _unpack(theta, spec, scale)
        h = garch_variance(eps, a0, al, be, h0=s2)
        return -gaussian_loglik(eps, h) / r.size

    # a handful of persistence levels guards against the flat likelihood near alpha = beta = 0
    starts = []
    for a1, b1 in ((0.05, 0.90), (0.10, 0.60), (0.02, 0.20)):
        al = np.full(spec.q, a1 / spec.q)
        be = np.full(spec.p, b1 / spec.p)
        starts.append(_pack(s2 * (1 - a1 - b1), al, be, scale))
    start_vals = [nll(th) for th in starts]
    theta0 = starts[int(np.argmin(start_vals))]
    best = None
    for th in [theta0] + [s for s in starts if s is not theta0]:
        res = optimize.minimize(nll, th, method="BFGS", options={"maxiter": max_iter, "gtol": 1e-6})
        if best is None or res.fun < best.fun:
            best = res
        if res.success and best is res:
            break
    a0, al, be = _unpack(best.x, spec, scale)
    h = garch_variance(eps, a0, al, be, h0=s2)
    converged = bool(best.success or (best.status == 2 and np.isfinite(best.fun)))
    return GarchFit(
        alpha0=float(a0), alphas=np.asarray(al), betas=np.asarray(be), h=h,
        loglik=gaussian_loglik(eps, h), converged=converged, mean=mu,
        loglik_start=-min(start_vals) * r.size, message=str(best.message),
    )


def degarch(series, fit: GarchFit, name: Optional[str] = None) -> FilteredSeries:
    """Divide the demeaned returns by the fitted conditional volatility."""
    r = np.asarray(series, dtype=float)
    if r.shape != fit.h.shape:
        raise ValueError("series and variance path lengths differ")
    if np.any(fit.h <= 0):
        raise ValueError("conditional variance must be strictly positive")
    return FilteredSeries((r - fit.mean) / np.sqrt(fit.h), name)


def degarch_panel(panel: ReturnsPanel, spec: GarchSpec = GarchSpec()) -> List[FilteredSeries]:
    return [degarch(panel.returns[k], garch_fit(panel.returns[k], spec), a)
            for k, a in enumerate(panel.assets)]


def garch_simulate(alpha0: float, alphas, betas, n_obs: int, seed=None, burn: int = 1000,
                   innovations=None) -> np.ndarray:
    """Simulate a stationary GARCH path with i.i.d. standard normal innovations.

    ``innovations`` may supply custom unit-variance draws of length
    ``n_obs + burn``.
    """
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    betas = np.atleast_1d(np.asarray(betas, dtype=float))
    if alpha0 <= 0 or np.any(alphas < 0) or np.any(betas < 0):
        raise ValueError("GARCH parameters must be non-negative with alpha0 > 0")
    pers = alphas.sum() + betas.sum()
    if pers >= 1:
        raise ValueError(f"non-stationary parameters: persistence {pers} >= 1")
    total = n_obs + burn
    if innovations is None:
        v = np.random.default_rng(seed).standard_normal(total)
    else:
        v = np.asarray(innovations, dtype=float)
        if v.size != total:
            raise ValueError("innovations must have length n_obs + burn")
    q, p = alphas.size, betas.size
    m = max(p, q)
    uncond = alpha0 / (1.0 - pers)
    h = np.full(total + m, uncond)
    e = np.zeros(total + m)
    e2 = np.full(total + m, uncond)
    for t in range(m, total + m):
        ht = alpha0
        for i in range(q):
            ht += alphas[i] * e2[t - 1 - i]
        for i in range(p):
            ht += betas[i] * h[t - 1 - i]
        h[t] = ht
        e[t] = v[t - m] * np.sqrt(ht)
        e2[t] = e[t] * e[t]
    return e[m + burn:]


# -- multivariate -------------------------------------------------------------

def bekk_step(h_prev, r_prev, c, a_list: Sequence, b_list: Sequence) -> np.ndarray:
    """One BEKK update ``C'C + sum A_k' r r' A_k + sum B_k' H B_k``."""
    h_prev = np.asarray(h_prev, dtype=float)
    r_prev = np.asarray(r_prev, dtype=float).reshape(-1)
    c = np.asarray(c, dtype=float)
    n = r_prev.size
    if h_prev.shape != (n, n) or c.shape != (n, n):
        raise ValueError("dimension mismatch in BEKK inputs")
    if not np.allclose(c, np.triu(c)):
        raise ValueError("C must be upper triangular")
    rr = np.outer(r_prev, r_prev)
    out = c.T @ c
    for a in a_list:
        a = np.asarray(a, dtype=float)
        if a.shape != (n, n):
            raise ValueError("dimension mismatch in A matrices")
        out = out + a.T @ rr @ a
    for b in b_list:
        b = np.asarray(b, dtype=float)
        if b.shape != (n, n):
            raise ValueError("dimension mismatch in B matrices")
        out = out + b.T @ h_prev @ b
    return 0.5 * (out + out.T)


@dataclass
class DccFit:
    fits: List[GarchFit]
    a: float
    b: float
    qbar: np.ndarray
    R: np.ndarray  # T x N x N
    loglik: float
    converged: bool
    assets: List[str] = field(default_factory=list)
    loglik_start: float = float("nan")

    def to_json(self) -> str:
        return json.dumps({
            "params": {"a": self.a, "b": self.b},
            "loglik": self.loglik, "converged": self.converged,
            "univariate": {a: json.loads(f.to_json()) for a, f in zip(self.assets, self.fits)},
        })


def dcc_q_path(z: np.ndarray, a: float, b: float, qbar: np.ndarray) -> np.ndarray:
    """``Q_t = (1-a-b) Qbar + a z_{t-1} z_{t-1}' + b Q_{t-1}`` with ``Q_0 = Qbar``; z is T x N."""
    t_len, n = z.shape
    outer = (z[:, :, None] * z[:, None, :]).reshape(t_len, n * n)
    drive = (1.0 - a - b) * qbar.reshape(-1) + a * np.vstack([qbar.reshape(1, -1), outer[:-1]])
    q = np.empty((t_len, n * n))
    q[0] = qbar.reshape(-1)
    if t_len > 1:
        q[1:], _ = signal.lfilter([1.0], [1.0, -b], drive[1:], axis=0, zi=(b * qbar.reshape(-1))[None, :])
    return q.reshape(t_len, n, n)


def dcc_correlations(q: np.ndarray) -> np.ndarray:
    d = np.sqrt(np.einsum("tii->ti", q))
    r = q / (d[:, :, None] * d[:, None, :])
    idx = np.arange(q.shape[1])
    r[:, idx, idx] = 1.0
    return r


def dcc_loglik(z: np.ndarray, a: float, b: float, qbar: np.ndarray) -> float:
    """Correlation part of the DCC quasi-likelihood."""
    r = dcc_correlations(dcc_q_path(z, a, b, qbar))
    sign, logdet = np.linalg.slogdet(r)
    if np.any(sign <= 0):
        return -np.inf
    quad = np.einsum("ti,ti->t", z, np.linalg.solve(r, z[:, :, None])[:, :, 0])
    return float(-0.5 * np.sum(logdet + quad - np.einsum("ti,ti->t", z, z)))


def dcc_fit(panel, spec: GarchSpec = GarchSpec(), max_assets: int = 100) -> DccFit:
    """Two-step DCC: univariate GARCH per asset, then the scalar ``(a, b)`` correlation dynamics."""
    if isinstance(panel, ReturnsPanel):
        x, assets = panel.returns, list(panel.assets)
    else:
        x = np.atleast_2d(np.asarray(panel, dtype=float))
        assets = [f"A{i}" for i in range(x.shape[0])]
    n = x.shape[0]
    if n > max_assets:
        raise ValueError(f"DCC is capped at {max_assets} assets, got {n}")
    fits = [garch_fit(x[k], spec) for k in range(n)]
    z = np.column_stack([degarch(x[k], fits[k]).values for k in range(n)])
    qbar = np.corrcoef(z, rowvar=False)

    def nll(theta):
        a, b = theta
        if a < 0 or b < 0 or a + b >= 1:
            return 1e10
        val = dcc_loglik(z, a, b, qbar)
        return -val if np.isfinite(val) else 1e10

    start = np.array([0.02, 0.95])
    ll_start = -nll(start)
    best = None
    for s in (start, np.array([0.05, 0.90]), np.array([0.01, 0.50])):
        res = optimize.minimize(
            nll, s, method="SLSQP", bounds=[(0.0, 1.0), (0.0, 1.0)],
            constraints=[{"type": "ineq", "fun": lambda th: 1.0 - 1e-6 - th[0] - th[1]}],
            options={"maxiter": 200, "ftol": 1e-10},
        )
        if best is None or res.fun < best.fun:
            best = res
    a, b = (float(v) for v in np.clip(best.x, 0.0, 1.0))
    on_boundary = a + b >= 1.0 - 1e-4
    r_path = dcc_correlations(dcc_q_path(z, a, b, qbar))
    return DccFit(fits, a, b, qbar, r_path, -float(best.fun), bool(best.success and not on_boundary
                                                                 and all(f.converged for f in fits)),
                  assets, ll_start)


def dcc_simulate(a: float, b: float, qbar, n_obs: int, garch_params=None, seed=None, burn: int = 500):
    """Simulate returns (N x T) from a scalar DCC with GARCH(1,1) marginals.

    ``garch_params`` is ``(alpha0, alpha1, beta1)`` shared by every asset, or
    ``None`` for unit-variance marginals.
    """
    qbar = np.asarray(qbar, dtype=float)
    n = qbar.shape[0]
    if a < 0 or b < 0 or a + b >= 1:
        raise ValueError("DCC parameters must satisfy a, b >= 0 and a + b < 1")
    rng = np.random.default_rng(seed)
    total = n_obs + burn
    q = qbar.copy()
    z_prev = np.zeros(n)
    z = np.empty((total, n))
    for t in range(total):
        if t:
            q = (1 - a - b) * qbar + a * np.outer(z_prev, z_prev) + b * q
        d = np.sqrt(np.diag(q))
        r = q / np.outer(d, d)
        z[t] = np.linalg.cholesky(r) @ rng.standard_normal(n)
        z_prev = z[t]
    z = z[burn:]
    if garch_params is None:
        return z.T
    a0, a1, b1 = garch_params
    out = np.empty((n, n_obs))
    for k in range(n):
        h = a0 / (1 - a1 - b1)
        for t in range(n_obs):
            out[k, t] = z[t, k] * np.sqrt(h)
            h = a0 + a1 * out[k, t] ** 2 + b1 * h
    return out


def average_correlations(r_path: np.ndarray, window: int = 10) -> np.ndarray:
    """Trailing ``window``-step average of correlation matrices, diagonal reset to one."""
    t_len = r_path.shape[0]
    csum = np.cumsum(r_path, axis=0)
    out = np.empty_like(r_path)
    for t in range(t_len):
        lo = max(0, t - window + 1)
        tot = csum[t] - (csum[lo - 1] if lo else 0.0)
        out[t] = tot / (t - lo + 1)
    idx = np.arange(r_path.shape[1])
    out[:, idx, idx] = 1.0
    return out
