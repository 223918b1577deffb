import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from finnet.panel import ReturnsPanel
from finnet.spillover import (FevdMatrix, VarFit, connectedness, gfevd, gfevd_from_ma, ma_coefficients,
                              rolling_spillover, spillover_network, var_fit, var_simulate)

A3 = np.array([[0.5, 0.2, 0.0], [0.0, 0.4, 0.3], [0.1, 0.0, 0.3]])
OMEGA3 = np.array([[1.0, 0.3, 0.1], [0.3, 1.5, 0.2], [0.1, 0.2, 0.8]])


def _fit(coefs, omega):
    coefs = np.asarray(coefs, dtype=float)
    if coefs.ndim == 2:
        coefs = coefs[None]
    n = coefs.shape[1]
    return VarFit(coefs.shape[0], coefs, np.zeros(n), np.asarray(omega, dtype=float), 0.5,
                  [f"A{i}" for i in range(n)])


def _fevd(d):
    d = np.asarray(d, dtype=float)
    return FevdMatrix(10, d, d, np.ones(d.shape[0]), [f"A{i}" for i in range(d.shape[0])])


def simulated_gfevd(coefs, omega, horizon, n_paths, seed):
    """Forecast-error shares from simulated paths, with no use of MA matrices.

    Each path starts at zero, so ``y_H`` is the H-step forecast error. The
    share of variable i due to variable j is the R^2 of regressing the
    forecast error of i on j's H shocks (the generalized attribution), then
    rows are normalized.
    """
    rng = np.random.default_rng(seed)
    n = omega.shape[0]
    u = rng.standard_normal((horizon, n_paths, n)) @ np.linalg.cholesky(omega).T
    y = np.zeros((n_paths, n))
    for h in range(horizon):
        y = y @ coefs.T + u[h]
    raw = np.empty((n, n))
    for j in range(n):
        x = u[:, :, j].T  # paths x H
        for i in range(n):
            beta, *_ = np.linalg.lstsq(x, y[:, i], rcond=None)
            raw[i, j] = np.var(x @ beta) / np.var(y[:, i])
    return raw / raw.sum(axis=1, keepdims=True)


class TestVarFit:
    def test_recovery(self):
        a = np.array([[0.5, 0.1], [0.0, 0.5]])
        fit = var_fit(var_simulate(a, np.eye(2), 5000, seed=1), 1)
        np.testing.assert_allclose(fit.coefs[0], a, atol=0.05)
        assert fit.stable and fit.spectral_radius == pytest.approx(0.5, abs=0.05)

    def test_null(self):
        omega = np.array([[1.0, 0.4], [0.4, 2.0]])
        fit = var_fit(var_simulate(np.zeros((2, 2)), omega, 20000, seed=2), 1)
        assert np.abs(fit.coefs).max() < 0.03
        np.testing.assert_allclose(fit.omega, omega, atol=0.06)
        assert np.linalg.eigvalsh(fit.omega).min() > 0
        np.testing.assert_array_equal(fit.omega, fit.omega.T)

    def test_unstable_flagged(self):
        rng = np.random.default_rng(3)
        x = np.zeros((2, 300))
        for t in range(1, 300):
            x[:, t] = 1.02 * x[:, t - 1] + rng.standard_normal(2)
        fit = var_fit(x, 1)
        assert not fit.stable and fit.spectral_radius > 1
        with pytest.raises(ValueError, match="unstable"):
            gfevd(fit)
        df = rolling_spillover(x, 1, 10, 300)
        assert df.flag[0] and np.isnan(df.total[0])

    def test_errors(self):
        x = np.random.default_rng(4).standard_normal((2, 100))
        with pytest.raises(ValueError):
            var_fit(x, 0)
        with pytest.raises(ValueError):
            var_fit(x[:, :12], 1)
        with pytest.raises(ValueError):
            var_fit(np.vstack([x, x[0]]), 1)
        with pytest.raises(ValueError):
            var_fit(np.random.default_rng(0).standard_normal((3, 200)), 1, max_assets=2)

    def test_lag_two_layout(self):
        a1 = np.array([[0.3, 0.1], [0.0, 0.2]])
        a2 = np.array([[0.2, 0.0], [0.1, 0.1]])
        fit = var_fit(var_simulate(np.stack([a1, a2]), np.eye(2), 20000, seed=5), 2)
        np.testing.assert_allclose(fit.coefs[0], a1, atol=0.03)
        np.testing.assert_allclose(fit.coefs[1], a2, atol=0.03)


class TestMa:
    def test_var1_powers(self):
        theta = ma_coefficients(_fit(A3, OMEGA3), 6)
        for h in range(6):
            np.testing.assert_allclose(theta[h], np.linalg.matrix_power(A3, h), atol=1e-14)

    def test_zero(self):
        theta = ma_coefficients(_fit(np.zeros((2, 2)), np.eye(2)), 4)
        np.testing.assert_array_equal(theta[0], np.eye(2))
        assert not theta[1:].any()

    def test_var2_impulse(self):
        rng = np.random.default_rng(6)
        coefs = rng.uniform(-0.3, 0.3, (2, 3, 3))
        theta = ma_coefficients(_fit(coefs, np.eye(3)), 8)
        # propagate a unit impulse in each variable through the VAR equations
        for j in range(3):
            y = [np.zeros(3), np.zeros(3), np.eye(3)[j]]
            for _ in range(7):
                y.append(coefs[0] @ y[-1] + coefs[1] @ y[-2])
            np.testing.assert_allclose(np.array(y[2:]), theta[:, :, j], atol=1e-10)

    def test_horizon(self):
        with pytest.raises(ValueError):
            ma_coefficients(_fit(A3, OMEGA3), 0)


class TestGfevd:
    def test_rows_and_sign(self):
        f = gfevd(_fit(A3, OMEGA3), 10)
        np.testing.assert_allclose(f.normalized.sum(axis=1), 1.0, atol=1e-10)
        assert np.all(f.normalized >= 0) and np.all(f.raw >= 0)

    def test_diagonal_system(self):
        f = gfevd(_fit(np.diag([0.5, 0.3, 0.1]), np.diag([1.0, 2.0, 0.5])), 10)
        np.testing.assert_allclose(f.normalized, np.eye(3), atol=1e-10)

    def test_h1_closed_form(self):
        f = gfevd(_fit(A3, OMEGA3), 1)
        o = OMEGA3
        closed = o ** 2 / (np.diag(o)[None, :] * np.diag(o)[:, None])
        np.testing.assert_allclose(f.raw, closed, atol=1e-12)

    def test_h1_identity(self):
        f = gfevd(_fit(A3, np.diag([1.0, 2.0, 3.0])), 1)
        np.testing.assert_allclose(f.normalized, np.eye(3), atol=1e-12)

    def test_simulation_oracle(self):
        f = gfevd(_fit(A3, OMEGA3), 10)
        sim = simulated_gfevd(A3, OMEGA3, 10, 100_000, seed=7)
        assert np.abs(sim - f.normalized).max() < 0.02

    def test_one_way_spillover(self):
        a = np.array([[0.5, 0.0], [0.6, 0.3]])  # variable 0 feeds variable 1 only
        f = gfevd(_fit(a, np.eye(2)), 10)
        assert f.normalized[1, 0] > 0.2 and f.normalized[0, 1] < 1e-12
        sim = simulated_gfevd(a, np.eye(2), 10, 100_000, seed=8)
        assert np.abs(sim - f.normalized).max() < 0.02

    @settings(max_examples=25)
    @given(st.integers(0, 2), st.floats(0.1, 10.0), st.integers(0, 1000))
    def test_scale_invariance(self, j, c, seed):
        rng = np.random.default_rng(seed)
        a = rng.uniform(-0.3, 0.3, (3, 3))
        m = rng.standard_normal((3, 3))
        omega = m @ m.T + np.eye(3)
        s = np.eye(3)
        s[j, j] = c
        base = gfevd(_fit(a, omega), 10, require_stable=False).normalized
        scaled = gfevd(_fit(s @ a @ np.linalg.inv(s), s @ omega @ s), 10, require_stable=False).normalized
        others = [i for i in range(3) if i != j]
        np.testing.assert_allclose(scaled[others], base[others], atol=1e-8)

    def test_zero_variance(self):
        with pytest.raises(ValueError):
            gfevd_from_ma(np.eye(2)[None], np.diag([1.0, 0.0]))

    def test_csv(self, tmp_path):
        f = gfevd(_fit(A3, OMEGA3), 5)
        f.to_csv(tmp_path / "f.csv")
        assert (tmp_path / "f.csv").read_text().splitlines()[0].endswith("A0,A1,A2")


class TestNetworkAndConnectedness:
    def test_identity(self):
        f = _fevd(np.eye(3))
        assert spillover_network(f).n_edges == 0
        c = connectedness(f)
        assert c.total == 0 and not c.to.any() and not c.from_.any()

    def test_edges_and_modes(self):
        f = gfevd(_fit(np.array([[0.5, 0.0], [0.6, 0.3]]), np.eye(2)), 10)
        g = spillover_network(f)
        d = f.normalized
        assert g.directed and g.provenance == "fevd"
        assert {(i, j) for i, j, _ in g.edges} == {(0, 1)}
        assert g.edges[0][2] == pytest.approx(d[1, 0])
        np.testing.assert_allclose(np.array(g.attrs["diagonal"]) + g.adjacency().sum(axis=0), 1.0)
        incoming = spillover_network(f, "incoming-sum")
        assert incoming.attrs["diagonal"] == pytest.approx([d[0, 1], d[1, 0]])
        assert spillover_network(f, "paper-sum").attrs["diagonal"] == incoming.attrs["diagonal"]
        with pytest.raises(ValueError):
            spillover_network(f, "other")

    def test_connectedness_values(self):
        d = np.array([[0.6, 0.3, 0.1], [0.2, 0.7, 0.1], [0.0, 0.5, 0.5]])
        c = connectedness(_fevd(d))
        np.testing.assert_allclose(c.from_, [0.4, 0.3, 0.5])
        np.testing.assert_allclose(c.to, [0.2, 0.8, 0.2])
        assert c.total == pytest.approx(0.4)
        np.testing.assert_allclose(c.net, c.to - c.from_)
        assert json.loads(c.to_json())["total"] == pytest.approx(0.4)

    def test_symmetric_system(self):
        a = np.array([[0.4, 0.2], [0.2, 0.4]])
        c = connectedness(gfevd(_fit(a, np.array([[1.0, 0.3], [0.3, 1.0]])), 10))
        np.testing.assert_allclose(c.to, c.from_, atol=1e-12)
        assert 0 <= c.total <= 1


class TestRolling:
    def test_full_window(self):
        x = var_simulate(A3, OMEGA3, 400, seed=9)
        df = rolling_spillover(x, 1, 10, 400)
        assert len(df) == 1
        assert df.total[0] == pytest.approx(connectedness(gfevd(var_fit(x, 1), 10)).total)
        assert list(df.columns) == ["date", "total", "flag"]

    def test_stationary_flat(self):
        x = var_simulate(A3, OMEGA3, 4000, seed=10)
        df = rolling_spillover(x, 1, 10, 1000, 250)
        assert df.total.std() < 0.05 and not df.flag.any()

    def test_regime_shift(self):
        calm = var_simulate(np.diag([0.3, 0.3, 0.3]), np.eye(3), 1500, seed=11)
        hot = var_simulate(np.full((3, 3), 0.25), np.eye(3) + 0.5 * (1 - np.eye(3)), 1500, seed=12)
        x = np.hstack([calm, hot])
        panel = ReturnsPanel.from_array(x)
        df = rolling_spillover(panel, 1, 10, 500, 100)
        before = df.total[df.index < 10].mean()
        after = df.total[df.index > 20].mean()
        assert after > before + 0.2

    def test_errors(self):
        x = var_simulate(A3, OMEGA3, 100, seed=13)
        with pytest.raises(ValueError):
            rolling_spillover(x, 1, 10, 101)
        with pytest.raises(ValueError):
            rolling_spillover(x, 1, 10, 50, 0)
