"""Synthetic panels with known structure, used by the tests and the ``generate`` command."""

from __future__ import annotations

from typing import Optional, Sequence, Tuple

import numpy as np

from .panel import PricePanel, ReturnsPanel
from .spillover import var_simulate
from .volatility import dcc_simulate, garch_simulate


def _ids(n: int, prefix: str = "A"):
    return [f"{prefix}{i}" for i in range(n)]


def gaussian_panel(n: int, t: int, cov=None, seed=None) -> ReturnsPanel:
    """Gaussian i.i.d. returns with covariance ``cov`` (identity by default)."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((t, n))
    if cov is not None:
        z = z @ np.linalg.cholesky(np.asarray(cov, dtype=float)).T
    return ReturnsPanel.from_array(z.T)


def single_index(n: int, t: int, beta=1.0, market_vol: float = 0.01, idio_vol: float = 0.01,
                 seed=None) -> Tuple[ReturnsPanel, np.ndarray]:
    """``r_i = beta_i r_M + e_i`` with Gaussian market and idiosyncratic terms.

    Returns the panel and the market series.
    """
    rng = np.random.default_rng(seed)
    beta = np.broadcast_to(np.asarray(beta, dtype=float), (n,))
    market = market_vol * rng.standard_normal(t)
    eps = idio_vol * rng.standard_normal((n, t))
    return ReturnsPanel.from_array(beta[:, None] * market[None, :] + eps), market


def block_correlation(sizes: Sequence[int], within: float = 0.7, between: float = 0.1) -> np.ndarray:
    """Correlation matrix with constant ``within`` inside blocks and ``between`` across them."""
    n = int(sum(sizes))
    c = np.full((n, n), between)
    start = 0
    for s in sizes:
        c[start:start + s, start:start + s] = within
        start += s
    np.fill_diagonal(c, 1.0)
    return c


def block_labels(sizes: Sequence[int]) -> np.ndarray:
    return np.repeat(np.arange(len(sizes)), sizes)


def two_block(n: int = 40, t: int = 1000, within: float = 0.7, between: float = 0.1,
              seed=None) -> ReturnsPanel:
    """Gaussian panel from a two-block correlation model, labels ``S0``/``S1`` as sectors."""
    sizes = [n // 2, n - n // 2]
    panel = gaussian_panel(n, t, block_correlation(sizes, within, between), seed)
    panel.labels = {a: (f"S{b}",) for a, b in zip(panel.assets, block_labels(sizes))}
    return panel


def garch_panel(n: int, t: int, params=(0.05, 0.10, 0.85), seed=None) -> ReturnsPanel:
    """Independent GARCH(1,1) series, one child seed per asset."""
    a0, a1, b1 = params
    seeds = np.random.SeedSequence(seed).spawn(n)
    return ReturnsPanel.from_array(np.vstack([garch_simulate(a0, [a1], [b1], t, seed=s) for s in seeds]))


def var_panel(coefs, omega, t: int, seed=None) -> ReturnsPanel:
    return ReturnsPanel.from_array(var_simulate(coefs, omega, t, seed=seed))


def dcc_panel(qbar, t: int, a: float = 0.05, b: float = 0.90, garch_params=(0.05, 0.10, 0.85),
              seed=None) -> ReturnsPanel:
    return ReturnsPanel.from_array(dcc_simulate(a, b, qbar, t, garch_params, seed))


def causal_chain(t: int, coef: float = 0.5, n: int = 3, seed=None) -> ReturnsPanel:
    """``A0 -> A1 -> ... -> A{n-1}``: each series loads ``coef`` on the previous one's lag."""
    rng = np.random.default_rng(seed)
    e = rng.standard_normal((n, t + 1))
    x = e.copy()
    for k in range(1, n):
        x[k, 1:] = coef * x[k - 1, :-1] + e[k, 1:]
    return ReturnsPanel.from_array(x[:, 1:])


def prices_from_returns(panel: ReturnsPanel, start: float = 100.0,
                        timestamps: Optional[Sequence[str]] = None) -> PricePanel:
    """Price panel whose log returns are ``panel``; one extra leading timestamp."""
    t = panel.n_obs
    levels = start * np.exp(np.hstack([np.zeros((panel.n_assets, 1)), np.cumsum(panel.returns, axis=1)]))
    stamps = list(timestamps) if timestamps is not None else [str(k) for k in range(t + 1)]
    return PricePanel(list(panel.assets), stamps, levels, dict(panel.labels))


def fixture_panel(seed: int = 20240101, t: int = 600) -> PricePanel:
    """The 10-asset demo panel: two sectors in two countries, GARCH volatility,
    one-factor-per-sector dependence and a small lead-lag link."""
    rng = np.random.default_rng(seed)
    n = 10
    sector = np.array([0] * 5 + [1] * 5)
    country = np.array([0, 0, 1, 1, 1, 0, 0, 0, 1, 1])
    factors = rng.standard_normal((2, t + 1))
    loads = 0.4 + 0.5 * rng.random(n)
    vol = np.vstack([garch_simulate(0.05, [0.08], [0.88], t + 1, seed=s)
                     for s in np.random.SeedSequence(seed).spawn(n)])
    raw = loads[:, None] * factors[sector] + vol
    raw[6, 1:] += 0.3 * raw[1, :-1]
    r = 0.01 * raw[:, 1:] / raw.std()
    assets = [f"S{s}C{c}_{k}" for k, (s, c) in enumerate(zip(sector, country))]
    labels = {a: (f"sector{s}", f"country{c}") for a, s, c in zip(assets, sector, country)}
    days = np.datetime64("2020-01-01") + np.arange(t + 1)
    panel = ReturnsPanel(assets, [str(d) for d in days[1:]], r, labels)
    prices = prices_from_returns(panel, timestamps=[str(d) for d in days])
    prices.prices = np.round(prices.prices, 6)
    return prices
