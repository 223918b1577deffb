"""Eigen-analysis of correlation matrices, the Marchenko-Pastur law and PCA factors.

Moments inside this module use the population (1/T) convention, so the
correlation of standardized returns is ``X @ X.T / T`` exactly. ``panel``
defaults to the sample (1/(T-1)) convention; the two agree on correlations
but differ by ``T/(T-1)`` on variances.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np
from scipy import integrate

from .correlation import SquareDependencyMatrix, pearson
from .panel import ReturnsPanel


@dataclass
class EigenSystem:
    """Eigenvalues in descending order; ``eigenvectors[:, k]`` pairs with ``eigenvalues[k]``."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    assets: list

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(",".join(["eigenvalue"] + list(self.assets)) + "\n")
            for lam, vec in zip(self.eigenvalues, self.eigenvectors.T):
                fh.write(",".join(f"{v:.12g}" for v in [lam, *vec]) + "\n")

    def to_json(self) -> str:
        return json.dumps({
            "assets": list(self.assets),
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "eigenvectors": [[float(v) for v in col] for col in self.eigenvectors.T],
        })


@dataclass(frozen=True)
class MpSpectrum:
    q: float
    sigma_r: float
    lambda_minus: float
    lambda_plus: float


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    # largest-magnitude component positive; exact ties go to the lowest index
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def eigensystem(corr: SquareDependencyMatrix, atol: float = 1e-12) -> EigenSystem:
    """Diagonalize a symmetric dependence matrix.

    ``numpy.linalg.eigh`` (LAPACK syevd) is deterministic for a fixed input and
    thread count. Eigenpairs are sorted by descending eigenvalue with a stable
    sort, so exactly degenerate eigenvalues keep the solver's order; each
    eigenvector is oriented so its largest-magnitude entry is positive.
    """
    if corr.kind not in ("correlation", "covariance"):
        raise ValueError(f"eigensystem expects a correlation or covariance matrix, got {corr.kind!r}")
    c = corr.values
    if not np.allclose(c, c.T, atol=atol, rtol=0):
        raise ValueError("matrix is not symmetric")
    vals, vecs = np.linalg.eigh(0.5 * (c + c.T))
    order = np.argsort(-vals, kind="stable")
    return EigenSystem(vals[order], _fix_signs(vecs[:, order]), list(corr.assets))


def mp_bounds(n: int, t: int, sigma_r: float = 1.0) -> MpSpectrum:
    """Support ``[lambda-, lambda+]`` of the Marchenko-Pastur law for ``Q = T/N``."""
    if n < 2:
        raise ValueError("need at least two series")
    if t <= n:
        raise ValueError(f"T={t} must exceed N={n} (Q > 1)")
    q = t / n
    root = 2.0 * np.sqrt(1.0 / q)
    s2 = sigma_r ** 2
    return MpSpectrum(q, sigma_r, s2 * (1.0 + 1.0 / q - root), s2 * (1.0 + 1.0 / q + root))


def mp_density(lam, spec: MpSpectrum):
    """Marchenko-Pastur eigenvalue density; zero outside the support."""
    lam = np.asarray(lam, dtype=float)
    lo, hi = spec.lambda_minus, spec.lambda_plus
    inside = (lam > lo) & (lam < hi)
    safe = np.where(inside, lam, 1.0)
    val = spec.q / (2.0 * np.pi * spec.sigma_r ** 2) * np.sqrt(
        np.clip((hi - safe) * (safe - lo), 0.0, None)) / safe
    out = np.where(inside, val, 0.0)
    return float(out) if out.ndim == 0 else out


def mp_cdf(lam, spec: MpSpectrum):
    """Cumulative Marchenko-Pastur distribution by adaptive quadrature of the density."""
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=float))
    out = np.empty_like(lam_arr)
    for k, x in enumerate(lam_arr):
        if x <= spec.lambda_minus:
            out[k] = 0.0
        elif x >= spec.lambda_plus:
            out[k] = 1.0
        else:
            val, _ = integrate.quad(mp_density, spec.lambda_minus, x, args=(spec,), limit=200)
            out[k] = min(max(val, 0.0), 1.0)
    return float(out[0]) if np.ndim(lam) == 0 else out


def mp_ks_distance(eigenvalues, spec: MpSpectrum) -> float:
    """Kolmogorov-Smirnov distance between the empirical eigenvalue CDF and the MP CDF."""
    x = np.sort(np.asarray(eigenvalues, dtype=float))
    n = x.size
    f = mp_cdf(x, spec)
    upper = np.arange(1, n + 1) / n - f
    lower = f - np.arange(0, n) / n
    return float(max(upper.max(), lower.max()))


def outside_mp(eigs: EigenSystem, spec: MpSpectrum) -> Dict[str, np.ndarray]:
    """Eigenvalue indices above ``lambda+``, below ``lambda-`` and inside the bulk."""
    lam = eigs.eigenvalues
    return {
        "above": np.flatnonzero(lam > spec.lambda_plus),
        "below": np.flatnonzero(lam < spec.lambda_minus),
        "bulk": np.flatnonzero((lam >= spec.lambda_minus) & (lam <= spec.lambda_plus)),
    }


def _population_standardize(x: np.ndarray) -> np.ndarray:
    d = x - x.mean(axis=1, keepdims=True)
    sd = np.sqrt((d * d).mean(axis=1, keepdims=True))
    if np.any(sd == 0):
        raise ValueError("zero-variance series cannot be standardized")
    return d / sd


@dataclass
class PcaResult:
    """``factors`` is K x T (``F = V' Z``, variance ``lambda_k`` under 1/T moments);
    ``loadings`` is N x K (the eigenvectors), so ``loadings @ factors`` rebuilds Z when K = N."""

    factors: np.ndarray
    loadings: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    explained: np.ndarray


def pca_decompose(panel, k: int) -> PcaResult:
    """Project standardized returns onto the top-``k`` eigenvectors of their correlation."""
    x = panel.returns if isinstance(panel, ReturnsPanel) else np.atleast_2d(np.asarray(panel, dtype=float))
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must lie between 1 and N={n}")
    z = _population_standardize(x)
    eigs = eigensystem(pearson(x))
    v = eigs.eigenvectors[:, :k]
    lam = eigs.eigenvalues[:k]
    factors = v.T @ z
    return PcaResult(factors, v, lam, v, lam / n)


def pca_synthesize(eigs: EigenSystem, shocks) -> ReturnsPanel:
    """Returns ``r[i,t] = sum_k sqrt(lambda_k) v[i,k] eps[k,t]`` from unit-variance shocks."""
    e = np.atleast_2d(np.asarray(shocks, dtype=float))
    n = eigs.eigenvectors.shape[0]
    k = e.shape[0]
    if k > n:
        raise ValueError(f"{k} shock rows for an {n}-dimensional eigensystem")
    lam = np.clip(eigs.eigenvalues[:k], 0.0, None)
    r = (eigs.eigenvectors[:, :k] * np.sqrt(lam)) @ e
    return ReturnsPanel.from_array(r, eigs.assets)


def mp_density_table(spec: MpSpectrum, n_points: int = 200) -> Tuple[np.ndarray, np.ndarray]:
    """(lambda, p(lambda)) pairs spanning the support, for plotting."""
    lam = np.linspace(spec.lambda_minus, spec.lambda_plus, n_points)
    return lam, mp_density(lam, spec)
