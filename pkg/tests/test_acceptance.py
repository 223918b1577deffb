"""Acceptance criteria, one test per criterion (criterion 7 is split in two).

Each test records a PASS/FAIL line with the measured quantity; the lines are
printed in the terminal summary. Runtime budgets are asserted where stated.
"""

import heapq
import itertools
import math
import time
from pathlib import Path

import networkx as nx
import numpy as np
import pytest

from finnet.cli import COMMANDS, main
from finnet.correlation import (SquareDependencyMatrix, WeightScheme, exp_weight_constant, pearson,
                                permutation_correlations, significance_band, to_distance, weighted_corr)
from finnet.econnet import granger_pair, robust_pair
from finnet.filtergraph import cut_to_k, dbht, hierarchical, mst, pmfg, verify_planar
from finnet.generators import block_correlation, gaussian_panel
from finnet.panel import ReturnsPanel, acf, tail_exponent
from finnet.spectrum import eigensystem, mp_bounds, mp_ks_distance, outside_mp
from finnet.spillover import VarFit, gfevd
from finnet.volatility import FilteredSeries, degarch, garch_fit, garch_simulate


def _record(log, number, name, passed, detail):
    log.append((number, name, bool(passed), detail))
    print(f"{'PASS' if passed else 'FAIL'}  [{number:2d}] {name}: {detail}")


def _spanning_trees(n):
    """All n^(n-2) labelled spanning trees of K_n as an array of upper-triangle pair indices."""
    index = {p: k for k, p in enumerate(itertools.combinations(range(n), 2))}
    trees = []
    for seq in itertools.product(range(n), repeat=n - 2):
        degree = [1] * n
        for x in seq:
            degree[x] += 1
        leaves = [v for v in range(n) if degree[v] == 1]
        heapq.heapify(leaves)
        edges = []
        for x in seq:
            leaf = heapq.heappop(leaves)
            edges.append(index[(min(leaf, x), max(leaf, x))])
            degree[x] -= 1
            if degree[x] == 1:
                heapq.heappush(leaves, x)
        a, b = heapq.heappop(leaves), heapq.heappop(leaves)
        edges.append(index[(min(a, b), max(a, b))])
        trees.append(edges)
    return np.array(trees)


def test_01_mst_optimality(acceptance_log):
    start = time.perf_counter()
    rng = np.random.default_rng(1)
    trees = {n: _spanning_trees(n) for n in range(4, 9)}
    worst = 0.0
    for k in range(100):
        n = 4 + k % 5
        w = rng.uniform(0.0, 2.0, n * (n - 1) // 2)
        d = np.zeros((n, n))
        iu = np.triu_indices(n, 1)
        d[iu] = w
        d = d + d.T
        g = mst(SquareDependencyMatrix("distance", d, [str(v) for v in range(n)]))
        total = sum(x for *_, x in g.edges)
        best = w[trees[n]].sum(axis=1).min()
        worst = max(worst, abs(total - best))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-12 and elapsed < 30
    _record(acceptance_log, 1, "MST optimality", ok,
            f"100 instances N=4..8, max |MST - exhaustive min| = {worst:.1e}, {elapsed:.1f}s")
    assert ok


def test_02_pmfg_structure(acceptance_log):
    start = time.perf_counter()
    sizes = np.linspace(5, 40, 50).round().astype(int)
    failures = []
    for seed, n in enumerate(sizes):
        d = to_distance(pearson(gaussian_panel(n, 2 * n + 20, block_correlation([n], 0.2, 0.2), seed=seed)))
        vals = d.values[np.triu_indices(n, 1)]
        assert np.unique(vals).size == vals.size
        g = pmfg(d)
        checks = (g.n_edges == 3 * (n - 2), verify_planar(g), mst(d).edge_set() <= g.edge_set(),
                  max(len(c) for c in nx.find_cliques(g.to_networkx())) < 5)
        if not all(checks):
            failures.append((seed, n, checks))
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 60
    _record(acceptance_log, 2, "PMFG structure", ok,
            f"50 instances N=5..40, {len(failures)} failing (edges, planarity, MST subset, no K5), {elapsed:.1f}s")
    assert ok


def test_03_marchenko_pastur(acceptance_log):
    start = time.perf_counter()
    n, t = 100, 1000
    eig = eigensystem(pearson(gaussian_panel(n, t, seed=3)))
    spec = mp_bounds(n, t)
    inside = len(outside_mp(eig, spec)["bulk"]) / n
    ks = mp_ks_distance(eig.eigenvalues, spec)
    ref = mp_bounds(404, 3775)
    q = 3775 / 404
    hand = (1 + 1 / q - 2 / math.sqrt(q), 1 + 1 / q + 2 / math.sqrt(q))
    elapsed = time.perf_counter() - start
    ok = (inside >= 0.99 and ks < 0.05 and abs(ref.lambda_minus - hand[0]) < 1e-12
          and abs(ref.lambda_plus - hand[1]) < 1e-12 and round(ref.lambda_minus, 3) == 0.453
          and round(ref.lambda_plus, 3) == 1.761 and elapsed < 10)
    _record(acceptance_log, 3, "Marchenko-Pastur law", ok,
            f"{inside:.0%} inside, KS {ks:.4f}, lambda(404, 3775) = ({ref.lambda_minus:.3f}, "
            f"{ref.lambda_plus:.3f}), {elapsed:.1f}s")
    assert ok


def test_04_garch_recovery(acceptance_log):
    start = time.perf_counter()
    t = 20000
    truth = np.array([0.05, 0.10, 0.85])
    errors, white = [], []
    for seed in range(20):
        x = garch_simulate(*truth[:1], [truth[1]], [truth[2]], t, seed=1000 + seed)
        fit = garch_fit(x)
        errors.append(np.abs(np.array([fit.alpha0, fit.alphas[0], fit.betas[0]]) - truth))
        r = acf(degarch(x, fit).values ** 2, 10)[1:]
        white.append(np.abs(r) < 2 / math.sqrt(t))
    mae = np.mean(errors, axis=0)
    rate = float(np.mean(white))
    elapsed = time.perf_counter() - start
    ok = np.all(mae < 0.03) and rate >= 0.8 and elapsed < 120
    _record(acceptance_log, 4, "GARCH recovery", ok,
            f"MAE (alpha0, alpha1, beta1) = ({mae[0]:.4f}, {mae[1]:.4f}, {mae[2]:.4f}), "
            f"squared filtered ACF inside band for {rate:.0%} of run-lags, {elapsed:.1f}s")
    assert ok


def test_05_null_calibration(acceptance_log):
    # i.i.d. Gaussian series are already homoskedastic, so they enter as filtered input directly
    start = time.perf_counter()
    rng = np.random.default_rng(0)
    granger_hits, robust_hits = [], []
    for _ in range(2000):
        x = FilteredSeries(rng.standard_normal(500))
        y = FilteredSeries(rng.standard_normal(500))
        fwd, bwd = granger_pair(x, y)
        granger_hits += [fwd.p_value < 0.05, bwd.p_value < 0.05]
        e_xy, e_yx = robust_pair(x, y)
        robust_hits.append(min(e_xy.p_value, e_yx.p_value) < 0.05)
    g_rate, r_rate = float(np.mean(granger_hits)), float(np.mean(robust_hits))
    elapsed = time.perf_counter() - start
    ok = 0.035 <= g_rate <= 0.065 and 0.035 <= r_rate <= 0.065 and elapsed < 120
    _record(acceptance_log, 5, "Null calibration", ok,
            f"Granger directed-edge rate {g_rate:.2%}, robust pair-edge rate (either rule) {r_rate:.2%}, "
            f"{elapsed:.1f}s")
    assert ok


def _simulated_shares(a, omega, horizon, n_paths, seed):
    rng = np.random.default_rng(seed)
    n = a.shape[0]
    u = rng.standard_normal((horizon, n_paths, n)) @ np.linalg.cholesky(omega).T
    y = np.zeros((n_paths, n))
    for h in range(horizon):
        y = y @ a.T + u[h]
    raw = np.empty((n, n))
    for j in range(n):
        x = u[:, :, j].T
        for i in range(n):
            beta, *_ = np.linalg.lstsq(x, y[:, i], rcond=None)
            raw[i, j] = np.var(x @ beta) / np.var(y[:, i])
    return raw / raw.sum(axis=1, keepdims=True)


def test_06_gfevd(acceptance_log):
    start = time.perf_counter()
    a = np.array([[0.5, 0.2, 0.0], [0.0, 0.4, 0.3], [0.1, 0.0, 0.3]])
    omega = np.array([[1.0, 0.3, 0.1], [0.3, 1.5, 0.2], [0.1, 0.2, 0.8]])
    assets = ["A0", "A1", "A2"]
    f = gfevd(VarFit(1, a[None], np.zeros(3), omega, float(np.abs(np.linalg.eigvals(a)).max()), assets), 10)
    row_err = float(np.abs(f.normalized.sum(axis=1) - 1).max())
    sim_err = float(np.abs(_simulated_shares(a, omega, 10, 100_000, 6) - f.normalized).max())
    diag = gfevd(VarFit(1, np.diag([0.5, 0.3, 0.7])[None], np.zeros(3), np.diag([1.0, 2.0, 0.5]), 0.7, assets), 10)
    id_err = float(np.abs(diag.normalized - np.eye(3)).max())
    elapsed = time.perf_counter() - start
    ok = row_err < 1e-10 and sim_err < 0.02 and id_err < 1e-10 and elapsed < 60
    _record(acceptance_log, 6, "GFEVD correctness", ok,
            f"row-sum error {row_err:.1e}, max |analytic - 10^5-path simulation| {sim_err:.4f}, "
            f"diagonal-VAR identity error {id_err:.1e}, {elapsed:.1f}s")
    assert ok


def test_07a_weight_constant(acceptance_log):
    w0 = exp_weight_constant(60, 20)
    hand = (1 - math.exp(-1 / 20)) / (1 - math.exp(-60 / 20))
    ok = abs(w0 - hand) < 1e-12
    _record(acceptance_log, 7, "weighted correlation (a): w0(60, 20)", ok,
            f"w0 = {w0:.10f}, |w0 - hand evaluation| = {abs(w0 - hand):.1e}")
    assert ok


@pytest.mark.xfail(strict=True, reason="exact exponential weights at theta=1e6 differ from flat weights by "
                                       "O(delta_t/theta); the correlation gap is a few 1e-6, not below 1e-6")
def test_07b_flat_limit(acceptance_log):
    panel = gaussian_panel(10, 60, block_correlation([10], 0.3), seed=7)
    gap = float(np.abs(weighted_corr(panel, WeightScheme(60, 1e6)).values - pearson(panel).values).max())
    ok = gap < 1e-6
    _record(acceptance_log, 7, "weighted correlation (b): theta=1e6 flat limit", ok,
            f"max |weighted - Pearson| = {gap:.2e} (target 1e-6; gap scales as 1/theta)")
    assert ok


def _upper_quantile_with_error(source, delta_t, n_draws, alpha, seed, parts=10):
    r = permutation_correlations(source, delta_t, n_draws, seed)
    q = float(np.quantile(np.abs(r), 1 - alpha))
    pieces = [np.quantile(np.abs(p), 1 - alpha) for p in np.array_split(r, parts)]
    return q, float(np.std(pieces, ddof=1) / math.sqrt(parts))


def test_08_permutation_band(acceptance_log):
    start = time.perf_counter()
    gauss = gaussian_panel(10, 4000, seed=8)
    band = significance_band(3775, 0.05, "permutation", 100_000, gauss, seed=8)
    ref = significance_band(3775, 0.05)
    rel = max(abs(band.upper - ref.upper) / ref.upper, abs(band.lower - ref.lower) / abs(ref.lower))
    # extreme quantile on short windows, where tails matter
    heavy = ReturnsPanel.from_array(np.random.default_rng(9).standard_t(2.5, (10, 4000)))
    qg, eg = _upper_quantile_with_error(gauss, 20, 100_000, 0.002, 10)
    qh, eh = _upper_quantile_with_error(heavy, 20, 100_000, 0.002, 10)
    z = (qh - qg) / math.hypot(eg, eh)
    elapsed = time.perf_counter() - start
    ok = rel < 0.05 and z > 4
    _record(acceptance_log, 8, "Permutation vs parametric band", ok,
            f"dt=3775 band ({band.lower:.4f}, {band.upper:.4f}) vs parametric +/-{ref.upper:.4f}, "
            f"max rel diff {rel:.2%}; heavy-tailed 99.8% |r| quantile {qh:.3f} vs Gaussian {qg:.3f} "
            f"({z:.1f} standard errors wider), {elapsed:.1f}s")
    assert ok


def test_09_clustering_ground_truth(acceptance_log):
    c = block_correlation([20, 20], 0.7, 0.1)
    d = to_distance(SquareDependencyMatrix("correlation", c, [f"A{i}" for i in range(40)]))
    truth = {frozenset(d.assets[:20]), frozenset(d.assets[20:])}
    cut = cut_to_k(hierarchical(d), 2)
    first, second = dbht(d), dbht(d)
    cut_ok = {frozenset(g) for g in cut.groups().values()} == truth
    dbht_ok = {frozenset(g) for g in first.groups().values()} == truth
    same = first.assignment == second.assignment
    ok = cut_ok and dbht_ok and same
    _record(acceptance_log, 9, "Clustering ground truth", ok,
            f"dendrogram cut exact: {cut_ok}, DBHT exact: {dbht_ok} ({first.n_clusters} clusters), "
            f"DBHT deterministic: {same}")
    assert ok


def test_10_tail_index(acceptance_log):
    x = np.random.default_rng(10).pareto(3.0, 100_000) + 1.0
    est = tail_exponent(x, 0.05).exponent
    ok = abs(est - 3.0) <= 0.1
    _record(acceptance_log, 10, "Tail index", ok, f"Hill estimate {est:.4f} on Pareto(3), n=10^5")
    assert ok


def test_11_cli_determinism(acceptance_log, tmp_path):
    runs = [[c] for c in COMMANDS if c != "generate"]
    runs += [["corr", "--band", "permutation"], ["spillover", "--delta-t", "300", "--step", "50"]]
    runs += [["generate", "--model", m] for m in ("fixture", "single-index", "two-block", "garch", "var",
                                                   "dcc", "chain")]
    differing = []
    for k, argv in enumerate(runs):
        outs = []
        for rep in ("a", "b"):
            out = tmp_path / f"{k}{rep}"
            code = main(argv + ["--seed", "11", "--out", str(out)])
            assert code == 0, argv
            outs.append({p.name: p.read_bytes() for p in sorted(Path(out).iterdir())})
        if outs[0] != outs[1]:
            differing.append(" ".join(argv))
    ok = not differing
    _record(acceptance_log, 11, "CLI determinism", ok,
            f"{len(runs)} subcommand runs, byte-identical: {len(runs) - len(differing)}/{len(runs)}")
    assert ok
