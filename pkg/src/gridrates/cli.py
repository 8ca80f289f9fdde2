"""Experiment pipeline CLI.

Subcommands: datagen, price, cluster, vulnerability, sensitivity,
diversity, verify. All results are plain CSV/JSON for external plotting;
result tables are byte-reproducible from (config, inputs) and carry the
config hash, while wall-clock data goes to meta_* sidecar files only.

Exit codes: 0 ok, 1 validation error, 2 runtime error, 3 failed verify.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .config import CSV_FLOAT_FMT, RunConfig
from .errors import (
    ConfigError,
    EmptyPopulation,
    GridRatesError,
    InconsistentHorizon,
    KTooLarge,
    MalformedRow,
    ZeroProfile,
)
from .kmeans import Clustering, kmeans_profiles, sigma
from .model import SystemLoad, price_curve
from .profiles import Population, generate_corpus, ingest_csv, write_csv
from .robust import RateClustering, criterion_check, gkc, mci_table, skc
from .vulnerability import (
    disguise_reports,
    measure_smoothness,
    reports_to_json,
    smoothness_bound,
    theta_sweep,
    write_reports_csv,
)

VALIDATION_ERRORS = (
    ConfigError,
    ValueError,
    MalformedRow,
    InconsistentHorizon,
    KTooLarge,
    EmptyPopulation,
    ZeroProfile,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems are validation errors (exit 1)
        raise ConfigError(message)


def _fmt_cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return CSV_FLOAT_FMT % value
    return str(value)


def _write_table(path, header, rows, cfg_hash) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config_hash={cfg_hash}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt_cell(v) for v in row) + "\n")


def _np_default(value):
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    raise TypeError(f"not JSON serializable: {type(value)}")


def _write_json(path, doc) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(doc, sort_keys=True, default=_np_default))
        fh.write("\n")


def _write_meta(out_dir: Path, command: str, cfg: RunConfig, **extra) -> None:
    doc = {"command": command, "config_hash": cfg.hash(), **extra}
    _write_json(out_dir / f"meta_{command}.json", doc)


def _config_from_args(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    overrides = {}
    for flag, key in (
        ("seed", "seed"),
        ("rho", "rho"),
        ("k", "k"),
        ("metric", "metric"),
        ("theta_max", "theta_max"),
        ("theta_step", "theta_step"),
        ("kind", "corpus_kind"),
        ("n", "n_users"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    return cfg.with_overrides(**overrides)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_population(args, cfg: RunConfig):
    if getattr(args, "corpus", None):
        result = ingest_csv(args.corpus)
        return result.population, result.n_excluded
    return generate_corpus(cfg.corpus_spec()), 0


def _prices_for(cfg: RunConfig, pop: Population):
    return price_curve(cfg.cost_model(), SystemLoad(pop.consumption.sum(axis=0)))


def _load_clustering(path, cfg: RunConfig, pop: Population):
    text = Path(path).read_text(encoding="utf-8")
    kind = json.loads(text).get("kind")
    if kind == "profile":
        return Clustering.from_json(text)
    if kind == "rate":
        table = mci_table(pop, _prices_for(cfg, pop))
        by_user = dict(zip(table.user_ids.tolist(), table.mcis.tolist()))
        return RateClustering.from_json(text, mcis_by_user=by_user)
    raise ConfigError(f"{path}: unknown clustering kind {kind!r}")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_datagen(args) -> int:
    cfg = _config_from_args(args)
    out = _out_dir(args)
    pop = generate_corpus(cfg.corpus_spec())
    write_csv(pop, out / "corpus.csv")
    _write_meta(out, "datagen", cfg, n_users=pop.n_users, horizon=pop.horizon)
    return 0


def cmd_price(args) -> int:
    cfg = _config_from_args(args)
    out = _out_dir(args)
    pop, n_excluded = _load_population(args, cfg)
    prices = _prices_for(cfg, pop)
    loads = pop.consumption.sum(axis=0)
    rows = [(t, loads[t], prices.prices[t]) for t in range(pop.horizon)]
    _write_table(out / "price.csv", ["t", "load", "price"], rows, cfg.hash())
    _write_meta(out, "price", cfg, n_users=pop.n_users, n_excluded=n_excluded)
    return 0


def _write_user_rates(path, clustering, cfg_hash) -> None:
    if isinstance(clustering, RateClustering):
        order = np.argsort(clustering.user_ids, kind="stable")
        rates = clustering.user_prices()
        rows = [
            (str(clustering.user_ids[i]), int(clustering.labels[i]), rates[i])
            for i in order
        ]
    else:
        rows = [
            (uid, label, clustering.prices[label])
            for uid, label in sorted(clustering.assignments.items())
        ]
    _write_table(path, ["user_id", "cluster", "rate"], rows, cfg_hash)


def cmd_cluster(args) -> int:
    cfg = _config_from_args(args)
    out = _out_dir(args)
    pop, n_excluded = _load_population(args, cfg)
    prices = _prices_for(cfg, pop)
    meta = {"method": args.method, "n_users": pop.n_users, "n_excluded": n_excluded}

    if args.method == "profile":
        start = time.perf_counter()
        clustering = kmeans_profiles(
            pop, k=cfg.baseline_k(), prices=prices,
            seed=cfg.seed, metric=cfg.metric,
        )
        meta["wall_time_s"] = time.perf_counter() - start
    elif args.method == "gkc":
        start = time.perf_counter()
        clustering = gkc(mci_table(pop, prices), cfg.rho)
        meta["wall_time_s"] = time.perf_counter() - start
    elif args.method == "skc":
        base = kmeans_profiles(
            pop, k=cfg.baseline_k(), prices=prices,
            seed=cfg.seed, metric=cfg.metric,
        )
        start = time.perf_counter()  # refinement time only, base timed apart
        clustering = skc(pop, prices, cfg.rho, base)
        meta["wall_time_s"] = time.perf_counter() - start
    else:
        raise ConfigError(f"unknown method {args.method!r}")

    meta["n_clusters"] = clustering.k
    if isinstance(clustering, RateClustering):
        ok, worst = criterion_check(clustering)
        meta["criterion_ok"] = bool(ok)
        meta["criterion_worst_gap"] = worst
    (out / f"clustering_{args.method}.json").write_text(
        clustering.to_json() + "\n", encoding="utf-8")
    _write_user_rates(out / f"rates_{args.method}.csv", clustering, cfg.hash())
    _write_meta(out, f"cluster_{args.method}", cfg, **meta)
    return 0


def cmd_vulnerability(args) -> int:
    cfg = _config_from_args(args)
    out = _out_dir(args)
    pop, n_excluded = _load_population(args, cfg)
    clustering = _load_clustering(args.clustering, cfg, pop)

    thetas = cfg.theta_grid()
    rows = theta_sweep(clustering, thetas, pop=pop, strict=args.strict)
    k = clustering.k
    header = ["theta", "pct_strategic"] + [f"n_{j}" for j in range(k)]
    table_rows = [
        (theta, pct, *counts.tolist()) for theta, pct, counts in rows
    ]
    _write_table(out / "vulnerability_sweep.csv", header, table_rows, cfg.hash())

    theta_ref = float(thetas[-1])
    reports = disguise_reports(clustering, theta_ref, pop=pop, strict=args.strict)
    write_reports_csv(reports, out / "disguise_reports.csv")
    (out / "disguise_reports.json").write_text(
        reports_to_json(reports) + "\n", encoding="utf-8")

    bound = smoothness_bound(cfg.rho, theta_ref)
    smooth = measure_smoothness(
        clustering, theta_ref, pop=pop, bound=bound, strict=args.strict)
    _write_json(out / "smoothness.json", {
        "config_hash": cfg.hash(),
        "theta": smooth.theta,
        "delta_observed": smooth.delta_observed,
        "band_bound": bound,
        "n_reachable_pairs": len(smooth.pairs),
        "n_violations": len(smooth.violations),
        "worst_pairs": sorted(smooth.pairs, key=lambda p: -p[2])[:20],
    })
    _write_meta(out, "vulnerability", cfg, n_users=pop.n_users,
                n_excluded=n_excluded, theta_ref=theta_ref)
    return 0


def _parse_grid(text: str | None, default) -> list:
    if text is None:
        return list(default)
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"bad grid {text!r}; expected comma-separated floats") from None


def cmd_sensitivity(args) -> int:
    cfg = _config_from_args(args)
    out = _out_dir(args)
    pop, n_excluded = _load_population(args, cfg)
    loads = SystemLoad(pop.consumption.sum(axis=0))
    rho_grid = _parse_grid(args.rho_grid, np.round(np.geomspace(0.05, 5.0, 20), 9))
    a_grid = _parse_grid(args.a_grid, [cfg.a / 2, cfg.a, cfg.a * 2])
    rows = []
    for a in a_grid:
        model = cfg.with_overrides(a=a).cost_model()
        table = mci_table(pop, price_curve(model, loads))
        for rho in rho_grid:
            rows.append((rho, a, gkc(table, float(rho)).k))
    _write_table(out / "sensitivity.csv", ["rho", "a", "kappa"], rows, cfg.hash())
    _write_meta(out, "sensitivity", cfg, n_users=pop.n_users,
                n_excluded=n_excluded, rho_points=len(rho_grid), a_points=len(a_grid))
    return 0


def cmd_diversity(args) -> int:
    cfg = _config_from_args(args)
    out = _out_dir(args)
    pop, n_excluded = _load_population(args, cfg)
    clustering = _load_clustering(args.clustering, cfg, pop)
    prices = _prices_for(cfg, pop)

    sig = sigma(clustering, pop)
    sizes = [len(clustering.member_ids(j)) for j in range(clustering.k)]
    cluster_prices = (
        clustering.prices if clustering.prices is not None else [float("nan")] * clustering.k
    )
    rows = [
        (j, sizes[j], cluster_prices[j], sig[j]) for j in range(clustering.k)
    ]
    _write_table(out / "sigma.csv", ["cluster", "size", "price", "sigma"], rows, cfg.hash())

    drill = [int(v) for v in args.drill.split(",")] if args.drill else []
    row_of = {uid: i for i, uid in enumerate(pop.user_ids)}
    for j in drill:
        if not 0 <= j < clustering.k:
            raise ConfigError(f"--drill index {j} out of range (k={clustering.k})")
        member_ids = clustering.member_ids(j)
        rows_idx = [row_of[uid] for uid in member_ids]
        sub = Population(member_ids, pop.consumption[rows_idx])
        k_sub = min(args.drill_k, sub.n_users)
        inner = kmeans_profiles(sub, k=k_sub, prices=prices, seed=cfg.seed)
        (out / f"subclusters_{j}.json").write_text(
            inner.to_json() + "\n", encoding="utf-8")
    _write_meta(out, "diversity", cfg, n_users=pop.n_users,
                n_excluded=n_excluded, drilled=drill)
    return 0


def cmd_verify(args) -> int:
    from .acceptance import run_all

    cfg = _config_from_args(args)  # validates config; seed recorded in meta
    out = _out_dir(args)
    results = run_all(out_dir=out, emit=print)
    rows = [(r.number, r.name, "pass" if r.passed else "fail") for r in results]
    _write_table(out / "acceptance_report.csv",
                 ["criterion", "name", "verdict"], rows, cfg.hash())
    _write_meta(out, "verify", cfg, results=[
        {"criterion": r.number, "passed": r.passed, "detail": r.detail,
         "elapsed_s": r.elapsed}
        for r in results
    ])
    failed = [r.number for r in results if not r.passed]
    if failed:
        print(f"verify: FAILED criteria {failed}", file=sys.stderr)
        return 3
    print(f"verify: all {len(results)} criteria passed")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gridrates", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, help="override config seed")

    p = sub.add_parser("datagen", help="write a synthetic corpus CSV")
    common(p)
    p.add_argument("--kind", choices=["residential", "commercial"])
    p.add_argument("--n", type=int, help="number of users")
    p.set_defaults(func=cmd_datagen)

    p = sub.add_parser("price", help="emit the slot load and price table")
    common(p)
    p.add_argument("--corpus", help="corpus CSV (generated from config if omitted)")
    p.set_defaults(func=cmd_price)

    p = sub.add_parser("cluster", help="run a clustering pipeline")
    common(p)
    p.add_argument("--corpus")
    p.add_argument("--method", required=True, choices=["profile", "skc", "gkc"])
    p.add_argument("--k", type=int, help="baseline profile cluster count")
    p.add_argument("--rho", type=float, help="rate-band tolerance")
    p.add_argument("--metric", choices=["sqeuclidean", "l1"])
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("vulnerability", help="theta sweep of strategic users")
    common(p)
    p.add_argument("--corpus")
    p.add_argument("--clustering", required=True, help="clustering JSON artifact")
    p.add_argument("--theta-max", dest="theta_max", type=float)
    p.add_argument("--theta-step", dest="theta_step", type=float)
    p.add_argument("--strict", action="store_true",
                   help="admission must beat every center, not only the user's own")
    p.set_defaults(func=cmd_vulnerability)

    p = sub.add_parser("sensitivity", help="cluster count over rho and curvature grids")
    common(p)
    p.add_argument("--corpus")
    p.add_argument("--rho-grid", dest="rho_grid", help="comma-separated rho values")
    p.add_argument("--a-grid", dest="a_grid", help="comma-separated curvature values")
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("diversity", help="per-cluster diversity and drill-down")
    common(p)
    p.add_argument("--corpus")
    p.add_argument("--clustering", required=True)
    p.add_argument("--drill", help="comma-separated cluster indices to sub-cluster")
    p.add_argument("--drill-k", dest="drill_k", type=int, default=6)
    p.set_defaults(func=cmd_diversity)

    p = sub.add_parser("verify", help="run the acceptance suite")
    common(p)
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except VALIDATION_ERRORS as exc:
        print(f"gridrates: validation error: {exc}", file=sys.stderr)
        return 1
    except SystemExit:
        raise
    except Exception as exc:  # runtime failures map to exit 2 by contract
        print(f"gridrates: runtime error: {exc.__class__.__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
