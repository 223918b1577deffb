"""Dependence matrices: Pearson, covariance, weighted, partial and rank correlation,
rolling windows, the correlation-to-distance map and significance bands."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from .panel import ReturnsPanel

KINDS = ("correlation", "covariance", "distance", "pvalue", "fevd")


@dataclass
class SquareDependencyMatrix:
    """An N x N dependence matrix tagged with its kind.

    ``window`` optionally records ``(start, end, delta_t, theta)`` for matrices
    estimated on a sub-sample.
    """

    kind: str
    values: np.ndarray
    assets: List[str]
    window: Optional[Tuple] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown matrix kind {self.kind!r}")
        self.values = np.asarray(self.values, dtype=float)
        n = len(self.assets)
        if self.values.shape != (n, n):
            raise ValueError(f"matrix shape {self.values.shape} does not match {n} assets")

    @property
    def n(self) -> int:
        return len(self.assets)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.values, index=self.assets, columns=self.assets)

    def to_csv(self, path) -> None:
        text = self.to_frame().to_csv(float_format="%.12g", lineterminator="\n")
        with open(path, "w") as fh:
            fh.write(text)

    def to_json(self) -> str:
        return json.dumps({
            "kind": self.kind,
            "assets": self.assets,
            "values": [[float(v) for v in row] for row in self.values],
            "window": list(self.window) if self.window is not None else None,
        })

    @classmethod
    def from_json(cls, text: str) -> "SquareDependencyMatrix":
        obj = json.loads(text)
        window = tuple(obj["window"]) if obj.get("window") is not None else None
        return cls(obj["kind"], np.array(obj["values"], dtype=float), list(obj["assets"]), window)

    @classmethod
    def from_csv(cls, path, kind: str) -> "SquareDependencyMatrix":
        df = pd.read_csv(path, index_col=0)
        return cls(kind, df.to_numpy(dtype=float), [str(c) for c in df.columns])


@dataclass(frozen=True)
class WeightScheme:
    """Window length ``delta_t`` and characteristic time ``theta`` (``None`` = flat)."""

    delta_t: int
    theta: Optional[float] = None

    def weights(self) -> np.ndarray:
        """Weights for observations ``t = 1..delta_t`` (last one most recent), summing to 1."""
        if self.delta_t < 1:
            raise ValueError("delta_t must be positive")
        if self.theta is None:
            return np.full(self.delta_t, 1.0 / self.delta_t)
        if not self.theta > 0:
            raise ValueError("theta must be positive")
        t = np.arange(1, self.delta_t + 1)
        w = exp_weight_constant(self.delta_t, self.theta) * np.exp((t - self.delta_t) / self.theta)
        if not w[0] > 0:
            raise ValueError(f"theta={self.theta} is too small for delta_t={self.delta_t}: oldest weights underflow")
        return w


def exp_weight_constant(delta_t: int, theta: float) -> float:
    """Normalizing constant ``w0 = (1 - e^{-1/theta}) / (1 - e^{-delta_t/theta})``."""
    if not theta > 0:
        raise ValueError("theta must be positive")
    return float(-np.expm1(-1.0 / theta) / -np.expm1(-delta_t / theta))


@dataclass(frozen=True)
class SignificanceBand:
    alpha: float
    lower: float
    upper: float
    method: str
    delta_t: int


def _as_array(panel) -> Tuple[np.ndarray, List[str]]:
    if isinstance(panel, ReturnsPanel):
        return panel.returns, list(panel.assets)
    x = np.atleast_2d(np.asarray(panel, dtype=float))
    return x, [f"A{i}" for i in range(x.shape[0])]


def _check_variance(x, assets):
    sd = x.std(axis=1)
    for a, s in zip(assets, sd):
        if not s > 0:
            raise ValueError(f"asset {a!r} has zero variance over the window")


def _symmetrize_corr(c: np.ndarray) -> np.ndarray:
    c = 0.5 * (c + c.T)
    np.clip(c, -1.0, 1.0, out=c)
    np.fill_diagonal(c, 1.0)
    return c


def pearson(panel) -> SquareDependencyMatrix:
    x, assets = _as_array(panel)
    _check_variance(x, assets)
    d = x - x.mean(axis=1, keepdims=True)
    norm = np.sqrt(np.einsum("ij,ij->i", d, d))
    d = d / norm[:, None]
    return SquareDependencyMatrix("correlation", _symmetrize_corr(d @ d.T), assets)


def covariance(panel, ddof: int = 1) -> SquareDependencyMatrix:
    """Sample covariance (divisor ``T - ddof``)."""
    x, assets = _as_array(panel)
    d = x - x.mean(axis=1, keepdims=True)
    c = d @ d.T / (x.shape[1] - ddof)
    return SquareDependencyMatrix("covariance", 0.5 * (c + c.T), assets)


def cov_to_corr(cov: SquareDependencyMatrix) -> SquareDependencyMatrix:
    sd = np.sqrt(np.diag(cov.values))
    return SquareDependencyMatrix("correlation", _symmetrize_corr(cov.values / np.outer(sd, sd)),
                                  list(cov.assets), cov.window)


def rolling_corr(panel, delta_t: int, step: int = 1) -> List[SquareDependencyMatrix]:
    """Pearson matrices on windows ``[w*step, w*step + delta_t)``.

    Each matrix's ``window`` is ``(start, end, delta_t, None)`` with ``end`` the
    index of the last observation (right-aligned). For a ``ReturnsPanel`` the
    timestamp of that observation is ``panel.timestamps[end]``.
    """
    x, assets = _as_array(panel)
    if delta_t < 3:
        raise ValueError("delta_t must be at least 3")
    if step < 1:
        raise ValueError("step must be at least 1")
    if delta_t > x.shape[1]:
        raise ValueError(f"delta_t={delta_t} exceeds the {x.shape[1]} available observations")
    out = []
    for start in range(0, x.shape[1] - delta_t + 1, step):
        m = pearson(ReturnsPanel.from_array(x[:, start:start + delta_t], assets))
        m.window = (start, start + delta_t - 1, delta_t, None)
        out.append(m)
    return out


def weighted_corr(panel, scheme: WeightScheme, end: Optional[int] = None) -> SquareDependencyMatrix:
    """Weighted Pearson correlation over the ``scheme.delta_t`` observations ending at ``end``.

    Weighted mean, variances and covariances all use the scheme's weights;
    the latest observation carries the largest weight.
    """
    x, assets = _as_array(panel)
    t_total = x.shape[1]
    end = t_total - 1 if end is None else end
    start = end - scheme.delta_t + 1
    if start < 0 or end >= t_total:
        raise ValueError("weighting window does not fit inside the panel")
    w = scheme.weights()
    xw = x[:, start:end + 1]
    mu = xw @ w
    d = xw - mu[:, None]
    cov = (d * w) @ d.T
    sd = np.sqrt(np.diag(cov))
    for a, s in zip(assets, sd):
        if not s > 0:
            raise ValueError(f"asset {a!r} has zero weighted variance")
    c = _symmetrize_corr(cov / np.outer(sd, sd))
    return SquareDependencyMatrix("correlation", c, assets, (start, end, scheme.delta_t, scheme.theta))


def rolling_weighted_corr(panel, scheme: WeightScheme, step: int = 1) -> List[SquareDependencyMatrix]:
    x, _ = _as_array(panel)
    return [weighted_corr(panel, scheme, end)
            for end in range(scheme.delta_t - 1, x.shape[1], step)]


def partial_from_corr(c_ij, c_im, c_jm):
    """First-order partial correlation of i and j given a mediator m."""
    c_ij, c_im, c_jm = (np.asarray(v, dtype=float) for v in (c_ij, c_im, c_jm))
    denom = np.sqrt((1.0 - c_im ** 2) * (1.0 - c_jm ** 2))
    return (c_ij - c_im * c_jm) / denom


def partial_corr(panel, mediator) -> SquareDependencyMatrix:
    """Partial correlations of all asset pairs given ``mediator``.

    ``mediator`` is either the id of an asset in the panel (which is then
    excluded from the output) or an external series of matching length.
    """
    x, assets = _as_array(panel)
    if isinstance(mediator, str):
        k = assets.index(mediator)
        m = x[k]
        keep = [i for i in range(len(assets)) if i != k]
        x, assets = x[keep], [assets[i] for i in keep]
    else:
        m = np.asarray(mediator, dtype=float)
        if m.shape != (x.shape[1],):
            raise ValueError("mediator length does not match the panel")
    full = pearson(np.vstack([x, m[None, :]])).values
    c = full[:-1, :-1]
    cm = full[:-1, -1]
    if np.any(np.abs(cm) >= 1.0 - 1e-12):
        bad = assets[int(np.argmax(np.abs(cm)))]
        raise ValueError(f"mediator is perfectly correlated with asset {bad!r}")
    p = partial_from_corr(c, cm[:, None], cm[None, :])
    return SquareDependencyMatrix("correlation", _symmetrize_corr(p), assets)


def spearman(panel) -> SquareDependencyMatrix:
    """Pearson correlation of mid-ranked data."""
    x, assets = _as_array(panel)
    ranks = stats.rankdata(x, axis=1, method="average")
    out = pearson(ranks)
    out.assets = assets
    return out


def to_distance(corr: SquareDependencyMatrix) -> SquareDependencyMatrix:
    """``D = sqrt(2 (1 - C))``: 0 for perfect correlation, 2 for perfect anti-correlation."""
    if corr.kind != "correlation":
        raise ValueError(f"expected a correlation matrix, got kind {corr.kind!r}")
    d = np.sqrt(np.clip(2.0 * (1.0 - corr.values), 0.0, 4.0))
    np.fill_diagonal(d, 0.0)
    return SquareDependencyMatrix("distance", d, list(corr.assets), corr.window)


def parametric_critical_r(delta_t: int, alpha: float) -> float:
    """Correlation at which the two-sided t-test of zero correlation rejects at ``alpha``."""
    if delta_t < 3:
        raise ValueError("delta_t must be at least 3")
    df = delta_t - 2
    t = stats.t.ppf(1.0 - alpha / 2.0, df)
    return float(t / np.sqrt(df + t * t))


def permutation_correlations(source, delta_t: int, n_draws: int, seed=None,
                             batch: int = 2000) -> np.ndarray:
    """Correlations of independently permuted return pairs.

    Each draw picks two distinct assets and (when ``delta_t`` is shorter than
    the sample) a uniformly random start point for each, then shuffles both
    windows independently.

    Seed splitting: draws are cut into batches of ``batch`` and batch ``k``
    uses the ``k``-th child of ``SeedSequence(seed)``, so batches can be
    computed in any order or in parallel with identical results.
    """
    x, _ = _as_array(source)
    n, t_total = x.shape
    if delta_t > t_total:
        raise ValueError("delta_t exceeds the source length")
    if n < 2:
        raise ValueError("permutation source needs at least two assets")
    n_batches = -(-n_draws // batch)
    children = np.random.SeedSequence(seed).spawn(n_batches)
    offs = np.arange(delta_t)
    out = np.empty(n_draws)
    for k, child in enumerate(children):
        rng = np.random.default_rng(child)
        lo = k * batch
        b = min(batch, n_draws - lo)
        i = rng.integers(0, n, size=b)
        j = (i + rng.integers(1, n, size=b)) % n
        si = rng.integers(0, t_total - delta_t + 1, size=b)
        sj = rng.integers(0, t_total - delta_t + 1, size=b)
        a = rng.permuted(x[i[:, None], si[:, None] + offs], axis=1)
        c = rng.permuted(x[j[:, None], sj[:, None] + offs], axis=1)
        a -= a.mean(axis=1, keepdims=True)
        c -= c.mean(axis=1, keepdims=True)
        out[lo:lo + b] = np.einsum("ij,ij->i", a, c) / np.sqrt(
            np.einsum("ij,ij->i", a, a) * np.einsum("ij,ij->i", c, c))
    return out


def significance_band(delta_t: int, alpha: float = 0.05, method: str = "parametric",
                      n_draws: int = 100_000, source=None, seed=None) -> SignificanceBand:
    """Range of correlations expected between unrelated series of length ``delta_t``."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if method == "parametric":
        r = parametric_critical_r(delta_t, alpha)
        return SignificanceBand(alpha, -r, r, method, delta_t)
    if method != "permutation":
        raise ValueError(f"unknown method {method!r}")
    if source is None:
        raise ValueError("the permutation method needs a returns source")
    if n_draws < 10_000:
        raise ValueError("the permutation method needs at least 10^4 draws")
    r = permutation_correlations(source, delta_t, n_draws, seed)
    lo, hi = np.quantile(r, [alpha / 2.0, 1.0 - alpha / 2.0])
    return SignificanceBand(alpha, float(lo), float(hi), method, delta_t)
