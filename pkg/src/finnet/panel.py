"""Price panels, log returns and the stylized-fact statistics of daily returns."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd


class PanelError(ValueError):
    """Raised when a panel violates its invariants."""


@dataclass
class PricePanel:
    """N x T matrix of strictly positive prices, one row per asset."""

    assets: List[str]
    timestamps: List[str]
    prices: np.ndarray
    labels: Dict[str, Tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        self.prices = np.asarray(self.prices, dtype=float)
        if self.prices.ndim != 2:
            raise PanelError("prices must be a 2-d array (assets x time)")
        n, t = self.prices.shape
        if len(self.assets) != n:
            raise PanelError(f"{len(self.assets)} asset ids for {n} price rows")
        if len(self.timestamps) != t:
            raise PanelError(f"{len(self.timestamps)} timestamps for {t} price columns")
        if len(set(self.assets)) != n:
            raise PanelError("duplicate asset identifiers")
        _check_timestamps(self.timestamps)
        bad = ~np.isfinite(self.prices) | (self.prices <= 0)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise PanelError(
                f"non-positive or missing price for asset {self.assets[i]!r} "
                f"at {self.timestamps[j]}: {self.prices[i, j]}"
            )

    @property
    def n_assets(self) -> int:
        return self.prices.shape[0]


@dataclass
class ReturnsPanel:
    """N x (T-1) matrix of log returns aligned with the closing timestamps."""

    assets: List[str]
    timestamps: List[str]
    returns: np.ndarray
    labels: Dict[str, Tuple[str, ...]] = field(default_factory=dict)
    # True where a return spans a forward-filled price
    filled: Optional[np.ndarray] = None

    def __post_init__(self):
        self.returns = np.asarray(self.returns, dtype=float)
        if self.returns.ndim != 2:
            raise PanelError("returns must be a 2-d array (assets x time)")
        if self.returns.shape != (len(self.assets), len(self.timestamps)):
            raise PanelError(
                f"returns shape {self.returns.shape} does not match "
                f"{len(self.assets)} assets x {len(self.timestamps)} timestamps"
            )
        if not np.isfinite(self.returns).all():
            i, j = np.argwhere(~np.isfinite(self.returns))[0]
            raise PanelError(f"non-finite return for {self.assets[i]!r} at {self.timestamps[j]}")

    @property
    def n_assets(self) -> int:
        return self.returns.shape[0]

    @property
    def n_obs(self) -> int:
        return self.returns.shape[1]

    def window(self, start: int, stop: int) -> "ReturnsPanel":
        """Columns ``start:stop`` as a new panel."""
        filled = None if self.filled is None else self.filled[:, start:stop]
        return ReturnsPanel(list(self.assets), list(self.timestamps[start:stop]),
                            self.returns[:, start:stop], dict(self.labels), filled)

    def subset(self, assets: Sequence[str]) -> "ReturnsPanel":
        idx = [self.assets.index(a) for a in assets]
        filled = None if self.filled is None else self.filled[idx]
        return ReturnsPanel(list(assets), list(self.timestamps), self.returns[idx],
                            {a: self.labels[a] for a in assets if a in self.labels}, filled)

    @classmethod
    def from_array(cls, returns, assets: Optional[Sequence[str]] = None,
                   timestamps: Optional[Sequence[str]] = None) -> "ReturnsPanel":
        """Wrap a bare N x T array, generating ids ``A0..`` and integer timestamps."""
        returns = np.atleast_2d(np.asarray(returns, dtype=float))
        n, t = returns.shape
        assets = list(assets) if assets is not None else [f"A{i}" for i in range(n)]
        timestamps = list(timestamps) if timestamps is not None else [str(k) for k in range(t)]
        return cls(assets, timestamps, returns)


@dataclass(frozen=True)
class TailFit:
    exponent: float
    tail_fraction: float
    n_tail: int


def _check_timestamps(timestamps):
    seen = set()
    for k, ts in enumerate(timestamps):
        if ts in seen:
            raise PanelError(f"duplicate timestamp {ts}")
        seen.add(ts)
        if k and not _less(timestamps[k - 1], ts):
            raise PanelError(f"timestamps not strictly increasing at {ts}")


def _less(a, b) -> bool:
    try:
        return float(a) < float(b)
    except (ValueError, TypeError):
        pass
    try:
        return pd.Timestamp(a) < pd.Timestamp(b)
    except (ValueError, TypeError):
        return str(a) < str(b)


def log_returns(panel: PricePanel) -> ReturnsPanel:
    """Log returns ``ln p[t+1] - ln p[t]``; timestamps are those of the later price."""
    logp = np.log(panel.prices)
    return ReturnsPanel(list(panel.assets), list(panel.timestamps[1:]), np.diff(logp, axis=1),
                        dict(panel.labels))


def normalized_prices(panel: PricePanel) -> np.ndarray:
    """Each price row divided by its first price."""
    return panel.prices / panel.prices[:, :1]


def sample_variance(series, ddof: int = 1) -> float:
    """Variance with divisor ``T - ddof``; ``ddof=1`` is the unbiased sample estimator."""
    x = np.asarray(series, dtype=float)
    if x.size < 2:
        raise ValueError("sample variance needs at least two observations")
    return float(np.sum((x - x.mean()) ** 2) / (x.size - ddof))


def standardize(series, ddof: int = 1) -> np.ndarray:
    """Center and scale to unit variance.

    ``ddof=1`` (default) gives unit sample variance; ``ddof=0`` gives the
    population convention under which ``x @ y / T`` is the correlation.
    """
    x = np.asarray(series, dtype=float)
    var = sample_variance(x, ddof=ddof)
    if not var > 0:
        raise ValueError("cannot standardize a series with zero variance")
    return (x - x.mean()) / np.sqrt(var)


def acf(series, max_lag: int) -> np.ndarray:
    """Sample autocorrelation at lags ``0..max_lag`` (biased 1/T autocovariance)."""
    x = np.asarray(series, dtype=float)
    if max_lag >= x.size:
        raise ValueError(f"max_lag={max_lag} must be smaller than the series length {x.size}")
    if max_lag < 0:
        raise ValueError("max_lag must be non-negative")
    d = x - x.mean()
    denom = d @ d
    if denom == 0:
        raise ValueError("autocorrelation undefined for a constant series")
    out = np.empty(max_lag + 1)
    out[0] = 1.0
    for k in range(1, max_lag + 1):
        out[k] = (d[:-k] @ d[k:]) / denom
    return out


def ccdf(values) -> Tuple[np.ndarray, np.ndarray]:
    """Empirical survival function ``P>(x) = #(values > x) / n`` at each distinct value."""
    v = np.sort(np.asarray(values, dtype=float).ravel())
    if v.size == 0:
        raise ValueError("ccdf of an empty sample")
    xs = np.unique(v)
    above = v.size - np.searchsorted(v, xs, side="right")
    return xs, above / v.size


def tail_exponent(values, tail_fraction: float = 0.05, min_tail: int = 50) -> TailFit:
    """Hill estimate of the power-law tail index of ``|values|``.

    Uses the ``k = floor(tail_fraction * n)`` largest observations with the
    (k+1)-th largest as threshold.
    """
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction must lie in (0, 1]")
    x = np.sort(np.abs(np.asarray(values, dtype=float).ravel()))[::-1]
    x = x[x > 0]
    k = int(np.floor(tail_fraction * x.size))
    if k < min_tail or k >= x.size:
        raise ValueError(f"only {k} tail observations; need at least {min_tail}")
    logs = np.log(x[:k]) - np.log(x[k])
    return TailFit(exponent=float(k / logs.sum()), tail_fraction=tail_fraction, n_tail=k)


# -- CSV ingestion ---------------------------------------------------------

def read_prices_csv(path, labels_path=None, missing: str = "reject") -> Tuple[PricePanel, Optional[np.ndarray]]:
    """Load a wide price CSV (first column ISO date, one column per asset).

    ``missing="reject"`` raises on any gap; ``missing="ffill"`` forward-fills
    gaps and returns a boolean N x T mask of filled prices (``None`` otherwise).
    A leading gap cannot be filled and is always rejected.
    """
    df = pd.read_csv(path)
    date_col = df.columns[0]
    timestamps = [str(v) for v in df[date_col]]
    values = df.drop(columns=[date_col]).apply(pd.to_numeric, errors="coerce")
    assets = [str(c) for c in values.columns]
    gaps = values.isna().to_numpy().T
    mask = None
    if gaps.any():
        if missing == "reject":
            i, j = np.argwhere(gaps)[0]
            raise PanelError(f"missing price for asset {assets[i]!r} at {timestamps[j]}")
        if missing != "ffill":
            raise ValueError(f"unknown missing-data policy {missing!r}")
        values = values.ffill()
        mask = gaps
    labels = read_labels_csv(labels_path) if labels_path else {}
    panel = PricePanel(assets, timestamps, values.to_numpy().T, labels)
    return panel, mask


def read_labels_csv(path) -> Dict[str, Tuple[str, ...]]:
    """Sidecar CSV with columns ``asset,sector[,country]``."""
    df = pd.read_csv(path, dtype=str).fillna("")
    cols = list(df.columns)
    return {row[cols[0]]: tuple(row[c] for c in cols[1:]) for _, row in df.iterrows()}


def load_returns(path, labels_path=None, missing: str = "reject") -> ReturnsPanel:
    panel, mask = read_prices_csv(path, labels_path, missing)
    rets = log_returns(panel)
    if mask is not None:
        # a return is affected if either endpoint price was filled
        rets.filled = mask[:, 1:] | mask[:, :-1]
    return rets


def write_prices_csv(panel: PricePanel, path) -> None:
    df = pd.DataFrame(panel.prices.T, columns=panel.assets)
    df.insert(0, "date", panel.timestamps)
    Path(path).write_text(df.to_csv(index=False, float_format="%.10g", lineterminator="\n"))
