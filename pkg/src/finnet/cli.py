"""Command-line front end: prices in, filtered networks, matrices and plot data out.

Every subcommand writes its artifacts plus ``manifest.json`` into ``--out``.
Exit codes: 0 success, 1 invalid input or configuration, 2 an estimator did
not converge (artifacts are still written, with flags).

Configuration files hold ``key = value`` lines (``#`` starts a comment);
keys are option names with dashes or underscores, e.g. ``delta-t = 250``.
Explicit command-line flags override the file.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import platform
import sys
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional

import networkx as nx
import numpy as np
import pandas as pd
import scipy

from . import __version__
from .correlation import (WeightScheme, partial_corr, pearson, rolling_corr, significance_band,
                          spearman, to_distance, weighted_corr)
from .econnet import aggregate_network, filter_panel, granger_network, robust_pair_network
from .filtergraph import (cluster_composition, cut_dendrogram, cut_to_k, dbht_details, hierarchical,
                          mst, pmfg, verify_planar)
from .generators import (causal_chain, dcc_panel, fixture_panel, garch_panel, prices_from_returns,
                         single_index, two_block, var_panel)
from .panel import PanelError, acf, ccdf, load_returns, sample_variance, tail_exponent, write_prices_csv
from .spectrum import eigensystem, mp_bounds, mp_density_table, mp_ks_distance, outside_mp
from .spillover import connectedness, gfevd, rolling_spillover, spillover_network, var_fit
from .volatility import GarchSpec, average_correlations, dcc_fit, degarch, garch_fit

EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGED = 0, 1, 2


class ConfigError(ValueError):
    pass


def fixture_paths():
    base = resources.files("finnet") / "data"
    return str(base / "fixture_prices.csv"), str(base / "fixture_labels.csv")


def read_config(path) -> Dict[str, str]:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {path} does not exist")
    out = {}
    for n, line in enumerate(p.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


# -- output helpers ------------------------------------------------------------

class Outputs:
    def __init__(self, root: Path):
        self.root = root
        self.files: List[str] = []
        self.flags: Dict[str, object] = {}
        root.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.root / name

    def text(self, name: str, content: str):
        self.path(name).write_text(content)

    def json(self, name: str, obj):
        self.text(name, json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def frame(self, name: str, df: pd.DataFrame):
        self.text(name, df.to_csv(index=False, float_format="%.12g", lineterminator="\n"))


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _histogram(values, bins: int = 50) -> pd.DataFrame:
    counts, edges = np.histogram(values, bins=bins)
    return pd.DataFrame({"left": edges[:-1], "right": edges[1:], "count": counts})


def _offdiag(m: np.ndarray) -> np.ndarray:
    return m[np.triu_indices(m.shape[0], k=1)]


def _load(args):
    path, labels = args.input, args.labels
    if path is None:
        path, default_labels = fixture_paths()
        labels = labels or default_labels
    for p in (path, labels):
        if p is not None and not Path(p).is_file():
            raise ConfigError(f"input file {p} does not exist")
    return load_returns(path, labels, args.missing), path, labels


def _require_seed(args):
    if args.seed is None:
        raise ConfigError("this command is stochastic; pass --seed")


def _write_graph(out: Outputs, stem: str, graph, extra=None):
    graph.to_edge_csv(out.path(f"{stem}_edges.csv"), extra)
    out.text(f"{stem}.json", graph.to_json() + "\n")
    out.text(f"{stem}.dot", graph.to_dot())


def _correlation(args, panel):
    if args.method == "pearson":
        return pearson(panel)
    if args.method == "spearman":
        return spearman(panel)
    if args.method == "weighted":
        delta_t = args.delta_t or panel.n_obs
        return weighted_corr(panel, WeightScheme(delta_t, args.theta))
    if args.method == "partial":
        if not args.mediator:
            raise ConfigError("--mediator is required for partial correlations")
        return partial_corr(panel, args.mediator)
    raise ConfigError(f"unknown correlation method {args.method!r}")


# -- subcommands -----------------------------------------------------------------

def cmd_returns(args, panel, out: Outputs):
    df = pd.DataFrame(panel.returns.T, columns=panel.assets)
    df.insert(0, "date", panel.timestamps)
    out.frame("returns.csv", df)
    pooled = np.concatenate([(r - r.mean()) / np.sqrt(sample_variance(r)) for r in panel.returns])
    xs, ps = ccdf(np.abs(pooled))
    out.frame("ccdf.csv", pd.DataFrame({"abs_std_return": xs, "ccdf": ps}))
    lags = np.arange(args.max_lag + 1)
    cols = {"lag": lags}
    cols["returns"] = np.mean([acf(r, args.max_lag) for r in panel.returns], axis=0)
    cols["abs_returns"] = np.mean([acf(np.abs(r), args.max_lag) for r in panel.returns], axis=0)
    out.frame("acf.csv", pd.DataFrame(cols))
    stats = {}
    for a, r in zip(panel.assets, panel.returns):
        entry = {"variance": sample_variance(r)}
        try:
            fit = tail_exponent(np.abs(r), args.tail_fraction)
            entry["tail_exponent"] = fit.exponent
        except ValueError:
            entry["tail_exponent"] = None
        stats[a] = entry
    pooled_tail = tail_exponent(np.abs(pooled), args.tail_fraction)
    out.json("returns_stats.json", {"assets": stats, "pooled_tail_exponent": pooled_tail.exponent})


def cmd_corr(args, panel, out: Outputs):
    c = _correlation(args, panel)
    c.to_csv(out.path("correlation.csv"))
    to_distance(c).to_csv(out.path("distance.csv"))
    out.frame("correlation_hist.csv", _histogram(_offdiag(c.values)))
    delta_t = args.delta_t or panel.n_obs
    if args.band == "permutation":
        _require_seed(args)
        band = significance_band(delta_t, args.alpha, "permutation", args.draws, panel, args.seed)
    else:
        band = significance_band(delta_t, args.alpha)
    out.json("band.json", {"alpha": band.alpha, "lower": band.lower, "upper": band.upper,
                           "method": band.method, "delta_t": band.delta_t})
    if args.delta_t and args.method == "pearson" and args.delta_t < panel.n_obs:
        rows = [(panel.timestamps[m.window[1]], float(_offdiag(m.values).mean()))
                for m in rolling_corr(panel, args.delta_t, args.step)]
        out.frame("rolling_mean_corr.csv", pd.DataFrame(rows, columns=["date", "mean_corr"]))


def cmd_spectrum(args, panel, out: Outputs):
    eig = eigensystem(pearson(panel))
    eig.to_csv(out.path("eigensystem.csv"))
    spec = mp_bounds(panel.n_assets, panel.n_obs, args.sigma_r)
    parts = outside_mp(eig, spec)
    out.json("mp.json", {
        "q": spec.q, "sigma_r": spec.sigma_r, "lambda_minus": spec.lambda_minus,
        "lambda_plus": spec.lambda_plus, "n_above": int(len(parts["above"])),
        "n_below": int(len(parts["below"])), "n_bulk": int(len(parts["bulk"])),
        "ks_distance": mp_ks_distance(eig.eigenvalues, spec),
    })
    lam, dens = mp_density_table(spec)
    out.frame("mp_density.csv", pd.DataFrame({"lambda": lam, "density": dens}))
    out.frame("eigenvalue_hist.csv", _histogram(eig.eigenvalues, args.bins))


def cmd_mst(args, panel, out: Outputs):
    d = to_distance(_correlation(args, panel))
    _write_graph(out, "mst", mst(d))


def cmd_pmfg(args, panel, out: Outputs):
    d = to_distance(_correlation(args, panel))
    g = pmfg(d)
    _write_graph(out, "pmfg", g)
    out.flags["planar_verified"] = verify_planar(g)


def _composition(out: Outputs, clustering, panel):
    if panel.labels:
        comp = cluster_composition(clustering, panel.labels)
        out.json("composition.json", {str(k): v for k, v in comp.items()})


def cmd_dbht(args, panel, out: Outputs):
    res = dbht_details(to_distance(_correlation(args, panel)))
    res.clustering.to_csv(out.path("clusters.csv"))
    _write_graph(out, "pmfg", res.graph)
    out.json("bubbles.json", {
        "bubbles": [[panel.assets[v] for v in b] for b in res.bubbles],
        "directed_edges": [[a, b, [panel.assets[v] for v in t]] for a, b, t in res.directed_edges],
        "converging": res.converging,
    })
    _composition(out, res.clustering, panel)


def cmd_cluster(args, panel, out: Outputs):
    dend = hierarchical(to_distance(_correlation(args, panel)), args.linkage)
    dend.to_csv(out.path("dendrogram.csv"))
    out.frame("leaf_order.csv", pd.DataFrame({"asset": [dend.leaves[k] for k in dend.leaf_order()]}))
    if args.height is not None:
        clustering = cut_dendrogram(dend, args.height)
    else:
        clustering = cut_to_k(dend, args.k)
    clustering.to_csv(out.path("clusters.csv"))
    _composition(out, clustering, panel)


def cmd_garch(args, panel, out: Outputs):
    spec = GarchSpec(args.p, args.q)
    fits = {}
    h_cols, f_cols = {"date": panel.timestamps}, {"date": panel.timestamps}
    for a, r in zip(panel.assets, panel.returns):
        fit = garch_fit(r, spec, max_iter=args.max_iter)
        fits[a] = json.loads(fit.to_json())
        h_cols[a] = fit.h
        f_cols[a] = degarch(r, fit).values
    out.json("garch.json", fits)
    out.frame("variance.csv", pd.DataFrame(h_cols))
    out.frame("filtered.csv", pd.DataFrame(f_cols))
    out.flags["converged"] = all(f["converged"] for f in fits.values())


def cmd_dcc(args, panel, out: Outputs):
    fit = dcc_fit(panel, GarchSpec(args.p, args.q))
    out.json("dcc.json", json.loads(fit.to_json()))
    avg = average_correlations(fit.R, args.avg_window)
    iu, ju = np.triu_indices(panel.n_assets, k=1)
    rows = {"date": panel.timestamps}
    for i, j in zip(iu, ju):
        rows[f"{panel.assets[i]}|{panel.assets[j]}"] = avg[:, i, j]
    out.frame("dcc_correlation_avg.csv", pd.DataFrame(rows))
    out.frame("dcc_mean_corr.csv", pd.DataFrame({"date": panel.timestamps,
                                                 "mean_corr": avg[:, iu, ju].mean(axis=1)}))
    out.flags["converged"] = fit.converged


def cmd_granger(args, panel, out: Outputs):
    g = granger_network(panel, args.alpha, threads=args.threads)
    _write_graph(out, "granger", g, {"beta": g.attrs["beta"], "p_value": g.attrs["p_value"]})
    n = panel.n_assets
    out.flags["edge_density"] = g.n_edges / max(n * (n - 1), 1)


def cmd_pairnet(args, panel, out: Outputs):
    net = robust_pair_network(panel, args.gamma, args.nu, args.rule, threads=args.threads)
    _write_graph(out, "pairnet", net.graph)
    net.pvalues.to_csv(out.path("pvalues.csv"))
    if panel.labels:
        agg = aggregate_network(net.graph, panel.labels)
        _write_graph(out, "aggregate", agg)


def cmd_spillover(args, panel, out: Outputs):
    fit = var_fit(panel, args.lags)
    out.flags["stable"] = fit.stable
    fevd = gfevd(fit, args.horizon, require_stable=False)
    fevd.to_csv(out.path("fevd.csv"))
    fevd.to_csv(out.path("fevd_raw.csv"), normalized=False)
    out.text("connectedness.json", connectedness(fevd).to_json() + "\n")
    _write_graph(out, "spillover", spillover_network(fevd, args.diagonal_mode))
    if args.delta_t:
        out.frame("rolling_spillover.csv",
                  rolling_spillover(panel, args.lags, args.horizon, args.delta_t, args.step))


def cmd_generate(args, out: Outputs):
    _require_seed(args)
    n, t, seed = args.n, args.t, args.seed
    model = args.model
    if model == "fixture":
        prices = fixture_panel(seed, t)
    else:
        if model == "single-index":
            panel, _ = single_index(n, t, seed=seed)
        elif model == "two-block":
            panel = two_block(n, t, args.within, args.between, seed)
        elif model == "garch":
            panel = garch_panel(n, t, seed=seed)
            panel.returns = 0.01 * panel.returns
        elif model == "var":
            rng = np.random.default_rng(seed)
            a = np.diag(np.full(n, 0.3)) + 0.05 * rng.standard_normal((n, n))
            panel = var_panel(a, 1e-4 * np.eye(n), t, seed)
        elif model == "dcc":
            qbar = np.full((n, n), 0.3) + 0.7 * np.eye(n)
            panel = dcc_panel(qbar, t, seed=seed)
            panel.returns = 0.01 * panel.returns
        elif model == "chain":
            panel = causal_chain(t, n=n, seed=seed)
            panel.returns = 0.01 * panel.returns
        else:
            raise ConfigError(f"unknown model {model!r}")
        prices = prices_from_returns(panel)
    write_prices_csv(prices, out.path("prices.csv"))
    if prices.labels:
        with open(out.path("labels.csv"), "w") as fh:
            width = max(len(v) for v in prices.labels.values())
            fh.write(",".join(["asset", "sector", "country"][:width + 1]) + "\n")
            for a in prices.assets:
                fh.write(",".join([a, *prices.labels[a]]) + "\n")


COMMANDS = {
    "returns": cmd_returns, "corr": cmd_corr, "spectrum": cmd_spectrum, "mst": cmd_mst,
    "pmfg": cmd_pmfg, "dbht": cmd_dbht, "cluster": cmd_cluster, "garch": cmd_garch,
    "dcc": cmd_dcc, "granger-net": cmd_granger, "pair-net": cmd_pairnet,
    "spillover": cmd_spillover, "generate": cmd_generate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--seed", type=int, default=None, help="seed for stochastic stages")
    common.add_argument("--threads", type=int, default=1, help="worker threads for pairwise estimation")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--input", default=None, help="wide price CSV (default: bundled 10-asset fixture)")
    common.add_argument("--labels", default=None, help="asset,sector,country sidecar CSV")
    common.add_argument("--missing", choices=["reject", "ffill"], default="reject")

    corr_opts = argparse.ArgumentParser(add_help=False)
    corr_opts.add_argument("--method", choices=["pearson", "spearman", "weighted", "partial"], default="pearson")
    corr_opts.add_argument("--delta-t", type=int, default=None, help="window length")
    corr_opts.add_argument("--theta", type=float, default=None, help="exponential weighting time")
    corr_opts.add_argument("--mediator", default=None, help="asset id for partial correlation")

    garch_opts = argparse.ArgumentParser(add_help=False)
    garch_opts.add_argument("--p", type=int, default=1, help="variance lags")
    garch_opts.add_argument("--q", type=int, default=1, help="shock lags")

    ap = argparse.ArgumentParser(prog="finnet", description="Financial dependency networks from price panels.")
    ap.add_argument("--version", action="version", version=f"finnet {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("returns", parents=[common], help="log returns, CCDF, ACF and tail exponents")
    s.add_argument("--max-lag", type=int, default=20)
    s.add_argument("--tail-fraction", type=float, default=0.05)

    s = sub.add_parser("corr", parents=[common, corr_opts], help="correlation matrix, histogram and band")
    s.add_argument("--step", type=int, default=1)
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--band", choices=["parametric", "permutation"], default="parametric")
    s.add_argument("--draws", type=int, default=100_000)

    s = sub.add_parser("spectrum", parents=[common], help="eigen-decomposition against the MP law")
    s.add_argument("--sigma-r", type=float, default=1.0)
    s.add_argument("--bins", type=int, default=50)

    sub.add_parser("mst", parents=[common, corr_opts], help="minimum spanning tree")
    sub.add_parser("pmfg", parents=[common, corr_opts], help="planar maximally filtered graph")
    sub.add_parser("dbht", parents=[common, corr_opts], help="DBHT clustering")

    s = sub.add_parser("cluster", parents=[common, corr_opts], help="hierarchical clustering")
    s.add_argument("--linkage", choices=["single", "average"], default="average")
    s.add_argument("--height", type=float, default=None, help="cut height (overrides --k)")
    s.add_argument("--k", type=int, default=2, help="number of clusters")

    s = sub.add_parser("garch", parents=[common, garch_opts], help="GARCH fits and filtered returns")
    s.add_argument("--max-iter", type=int, default=500)

    s = sub.add_parser("dcc", parents=[common, garch_opts], help="scalar DCC correlations")
    s.add_argument("--avg-window", type=int, default=10)

    s = sub.add_parser("granger-net", parents=[common], help="Granger-causality network")
    s.add_argument("--alpha", type=float, default=0.05)

    s = sub.add_parser("pair-net", parents=[common], help="robust pairwise regression network")
    s.add_argument("--gamma", type=float, default=0.05)
    s.add_argument("--nu", type=float, default=5.0)
    s.add_argument("--rule", choices=["either", "both"], default="either")

    s = sub.add_parser("spillover", parents=[common], help="VAR variance-decomposition spillovers")
    s.add_argument("--lags", type=int, default=1)
    s.add_argument("--horizon", type=int, default=10)
    s.add_argument("--diagonal-mode", choices=["own-share", "incoming-sum", "paper-sum"], default="own-share")
    s.add_argument("--delta-t", type=int, default=None, help="rolling window length")
    s.add_argument("--step", type=int, default=1)

    s = sub.add_parser("generate", parents=[common], help="write a synthetic price panel")
    s.add_argument("--model", choices=["fixture", "single-index", "two-block", "garch", "var", "dcc", "chain"],
                   default="two-block")
    s.add_argument("--n", type=int, default=10)
    s.add_argument("--t", type=int, default=1000)
    s.add_argument("--within", type=float, default=0.7)
    s.add_argument("--between", type=float, default=0.1)
    return ap


def parse(argv) -> argparse.Namespace:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.config:
        cfg = read_config(args.config)
        sub = ap._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(cfg) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        # file values become defaults, so explicit flags still win
        sub.set_defaults(**cfg)
        args = ap.parse_args(argv)
    return args


def _manifest(args, out: Outputs, input_path, labels_path, status: int) -> dict:
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("out",)}
    blob = json.dumps(config, sort_keys=True, default=str)
    inputs = {}
    for role, p in (("prices", input_path), ("labels", labels_path), ("config", args.config)):
        if p:
            inputs[role] = {"path": str(p), "sha256": _sha256(p)}
    return {
        "command": args.command,
        "config": config,
        "config_sha256": hashlib.sha256(blob.encode()).hexdigest(),
        "seed": args.seed,
        "inputs": inputs,
        "artifacts": {name: _sha256(out.root / name) for name in out.files},
        "flags": out.flags,
        "exit_status": status,
        "versions": {
            "finnet": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "pandas": pd.__version__, "networkx": nx.__version__,
        },
    }


def main(argv: Optional[List[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as exc:  # argparse usage errors
        return EXIT_INVALID if exc.code else EXIT_OK
    out = Outputs(Path(args.out))
    input_path = labels_path = None
    try:
        if args.command == "generate":
            cmd_generate(args, out)
        else:
            panel, input_path, labels_path = _load(args)
            COMMANDS[args.command](args, panel, out)
    except (ConfigError, PanelError, ValueError, TypeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    status = EXIT_OK
    if out.flags.get("converged") is False or out.flags.get("stable") is False:
        status = EXIT_NONCONVERGED
    (out.root / "manifest.json").write_text(
        json.dumps(_manifest(args, out, input_path, labels_path, status), indent=2, sort_keys=True,
                   default=str) + "\n")
    return status


if __name__ == "__main__":
    sys.exit(main())
