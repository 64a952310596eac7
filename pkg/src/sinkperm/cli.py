"""Command line interface.

Subcommands: ``power`` (rejection rates), ``pvals`` (p-values + histogram
bins), ``clt`` (centered-statistic study), ``generate`` (dataset export).
Values come from built-in defaults, overridden by a key/value config file,
overridden by explicit flags.  Exit codes: 0 success, 2 configuration error,
1 runtime error.
"""

import argparse
import json
import sys

from .distributions import (
    _sample_params,
    scenario_by_id,
    scenario_with_dim,
)
from .errors import ConfigError
from .harness import (
    ExperimentConfig,
    build_specs,
    config_meta,
    resolve_out_path,
    run_clt_study,
    run_pvalue_histogram,
    run_tests,
    write_csv,
    write_json,
    write_meta,
)
from .twosample import PartitionMode, StatisticKind

_KINDS = [k.name for k in StatisticKind]
_MODES = {"basic": PartitionMode.BASIC, "double_centers": PartitionMode.DOUBLE_CENTERS}


def load_config(path: str) -> dict:
    """Parse a small ``key = value`` config file.

    Values are JSON fragments (numbers, strings, booleans, lists); bare words
    are taken as strings.  ``#`` starts a comment.
    """
    values: dict = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, text = line.partition("=")
            key, text = key.strip(), text.strip()
            try:
                values[key] = json.loads(text)
            except json.JSONDecodeError:
                values[key] = text.strip("\"'")
    return values


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value config file; flags win")
    parser.add_argument("--seed", type=int, default=None, help="master seed")
    parser.add_argument("--out", default=None, help="output file (relative paths go under $SINKPERM_OUT_DIR)")
    parser.add_argument("--format", choices=["csv", "json"], default=None)


def _add_test_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scenario", action="append", default=None, help="scenario id (repeatable)")
    parser.add_argument("--stat", action="append", default=None, choices=_KINDS, help="statistic kind (repeatable)")
    parser.add_argument("--n", type=int, default=None)
    parser.add_argument("--m", type=int, default=None)
    parser.add_argument("--k", type=int, default=None, help="number of clusters")
    parser.add_argument("--lambda", dest="lambdas", action="append", type=float, default=None, help="entropy weight (repeatable)")
    parser.add_argument("--B", type=int, default=None, help="permutations per test")
    parser.add_argument("--reps", type=int, default=None, help="Monte Carlo repetitions")
    parser.add_argument("--level", type=float, default=None)
    parser.add_argument("--mode", choices=sorted(_MODES), default=None)
    parser.add_argument("--knn-k", type=int, default=None)
    parser.add_argument("--restarts", type=int, default=None, help="k-means restarts")
    parser.add_argument("--dim", type=int, default=None, help="dimension override (Burr scenarios only)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sinkperm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    power = sub.add_parser("power", help="empirical rejection rates")
    _add_test_flags(power)
    _add_common(power)

    pvals = sub.add_parser("pvals", help="per-repetition p-values and histogram bins")
    _add_test_flags(pvals)
    _add_common(pvals)

    clt = sub.add_parser("clt", help="centered-statistic normality study")
    clt.add_argument("--scenario", action="append", default=None, help="null scenario id")
    clt.add_argument("--n", type=int, default=None)
    clt.add_argument("--m", type=int, default=None)
    clt.add_argument("--k", type=int, default=None)
    clt.add_argument("--lambda", dest="lambdas", action="append", type=float, default=None)
    clt.add_argument("--reps", type=int, default=None)
    clt.add_argument("--reference-size", type=int, default=None)
    clt.add_argument("--i-fixed", type=int, default=None)
    clt.add_argument("--epsilon", type=float, default=None, help="finite-difference step")
    clt.add_argument("--restarts", type=int, default=None)
    _add_common(clt)

    gen = sub.add_parser("generate", help="export a scenario dataset as CSV")
    gen.add_argument("--scenario", default=None, help="scenario id")
    gen.add_argument("--which", choices=["null", "alt"], default=None)
    gen.add_argument("--n", type=int, default=None)
    gen.add_argument("--dim", type=int, default=None)
    gen.add_argument("--header", action="store_true", default=None)
    _add_common(gen)

    return parser


class _Settings:
    """Default < config file < explicit flag."""

    def __init__(self, args: argparse.Namespace):
        self.args = vars(args)
        self.file = load_config(args.config) if args.config else {}

    def get(self, key: str, default=None):
        value = self.args.get(key)
        if value is not None:
            return value
        if key in self.file:
            return self.file[key]
        return default

    def get_list(self, key: str, default):
        value = self.get(key, default)
        if value is None:
            return default
        if isinstance(value, (list, tuple)):
            return list(value)
        return [value]


def _experiment_config(s: _Settings, *, clt: bool = False) -> ExperimentConfig:
    scenarios = s.get_list("scenario", None)
    if not scenarios:
        raise ConfigError("at least one --scenario is required")
    lambdas = tuple(float(v) for v in s.get_list("lambdas", [10.0 if clt else 1.0]))
    mode_name = s.get("mode", "double_centers")
    if mode_name not in _MODES:
        raise ConfigError(f"unknown mode {mode_name!r}")
    mode = _MODES[mode_name]
    k_clusters = int(s.get("k", 10))
    knn_k = int(s.get("knn_k", 4))
    if clt:
        statistics = ()
    else:
        kinds = s.get_list("stat", ["S"])
        statistics = build_specs(kinds, lambdas, mode, k_clusters, knn_k)
    return ExperimentConfig(
        scenarios=tuple(scenarios),
        statistics=statistics,
        n=int(s.get("n", 500)),
        m=int(s.get("m", 500)),
        k_clusters=k_clusters,
        lambdas=lambdas,
        b_permutations=int(s.get("B", 200)),
        mc_reps=int(s.get("reps", 200)),
        level=float(s.get("level", 0.05)),
        master_seed=int(s.get("seed", 1234)),
        mode=mode,
        knn_k=knn_k,
        kmeans_restarts=int(s.get("restarts", 10)),
        dim=s.get("dim"),
        reference_size=int(s.get("reference_size", 100_000)),
        i_fixed=s.get("i_fixed"),
        fd_epsilon=float(s.get("epsilon", 1e-7)),
    )


def _timing_meta(records) -> dict:
    timing: dict = {}
    for rec in records:
        key = f"{rec.scenario_id}/{rec.statistic}" + (
            f"(lambda={rec.lam:g})" if rec.lam is not None else ""
        )
        timing.setdefault(key, []).append(rec.elapsed_seconds)
    return {key: sum(v) / len(v) for key, v in sorted(timing.items())}


def _cmd_power(s: _Settings) -> int:
    cfg = _experiment_config(s)
    out = resolve_out_path(s.get("out", "power.csv"))
    fmt = s.get("format", "csv")
    records = run_tests(cfg)
    groups: dict = {}
    for rec in records:
        groups.setdefault((rec.scenario_id, rec.statistic, rec.lam, rec.mode), []).append(rec)
    rows = []
    for (sid, statistic, lam, mode), recs in sorted(
        groups.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2] or 0.0)
    ):
        rejected = sum(1 for r in recs if r.p_value <= cfg.level)
        rows.append(
            {
                "scenario": sid,
                "statistic": statistic,
                "mode": mode,
                "n": cfg.n,
                "m": cfg.m,
                "k": cfg.k_clusters,
                "lambda": lam,
                "B": cfg.b_permutations,
                "seed": cfg.master_seed,
                "level": cfg.level,
                "mc_reps": len(recs),
                "rejection_rate": rejected / len(recs),
            }
        )
    meta = config_meta(cfg, "power")
    meta["avg_pvalue_time_seconds"] = _timing_meta(records)
    if fmt == "csv":
        write_csv(out, rows)
    else:
        write_json(out, rows)
    write_meta(out, meta)
    for row in rows:
        lam_txt = f" lambda={row['lambda']:g}" if row["lambda"] is not None else ""
        print(
            f"{row['scenario']:18s} {row['statistic']:9s}{lam_txt:12s} "
            f"rejection_rate={row['rejection_rate']:.4f} ({row['mc_reps']} reps)"
        )
    print(f"wrote {out}")
    return 0


def _cmd_pvals(s: _Settings) -> int:
    cfg = _experiment_config(s)
    out = resolve_out_path(s.get("out", "pvals.csv"))
    fmt = s.get("format", "csv")
    records, bins = run_pvalue_histogram(cfg)
    prov = {
        "n": cfg.n,
        "m": cfg.m,
        "k": cfg.k_clusters,
        "B": cfg.b_permutations,
        "seed": cfg.master_seed,
    }
    rec_rows = [
        {
            "scenario": r.scenario_id,
            "statistic": r.statistic,
            "mode": r.mode,
            "lambda": r.lam,
            **prov,
            "rep": r.rep,
            "observed": r.observed,
            "p_value": r.p_value,
        }
        for r in records
    ]
    bin_rows = [
        {
            "scenario": b.scenario_id,
            "statistic": b.statistic,
            "lambda": b.lam,
            **prov,
            "bin_index": b.bin_index,
            "bin_low": b.bin_low,
            "bin_high": b.bin_high,
            "count": b.count,
        }
        for b in bins
    ]
    meta = config_meta(cfg, "pvals")
    meta["avg_pvalue_time_seconds"] = _timing_meta(records)
    if fmt == "csv":
        write_csv(out, rec_rows)
        write_csv(str(out) + ".bins.csv", bin_rows)
        print(f"wrote {out} and {out}.bins.csv")
    else:
        write_json(out, {"records": rec_rows, "bins": bin_rows})
        print(f"wrote {out}")
    write_meta(out, meta)
    return 0


def _cmd_clt(s: _Settings) -> int:
    cfg = _experiment_config(s, clt=True)
    out = resolve_out_path(s.get("out", "clt.csv"))
    fmt = s.get("format", "csv")
    results = run_clt_study(cfg)
    rows = []
    for res in results:
        for rec in res.records:
            rows.append(
                {
                    "scenario": rec.scenario_id,
                    "n": cfg.n,
                    "m": cfg.m,
                    "k": cfg.k_clusters,
                    "lambda": cfg.lambdas[0],
                    "seed": cfg.master_seed,
                    "i_fixed": res.i_fixed,
                    "reference_size": cfg.reference_size,
                    "rep": rec.rep,
                    "nu": rec.nu,
                    "predicted_mean": 0.0,
                    "predicted_var": rec.predicted_var,
                }
            )
    meta = config_meta(cfg, "clt")
    meta["summaries"] = [
        {
            "scenario": res.scenario_id,
            "i_fixed": res.i_fixed,
            "n_e": res.nu_sample.n_e,
            "empirical_var": res.empirical_var,
            "mean_predicted_var": res.mean_predicted_var,
            "shapiro_stat": res.shapiro_stat,
            "shapiro_p": res.shapiro_p,
        }
        for res in results
    ]
    if fmt == "csv":
        write_csv(out, rows)
    else:
        write_json(out, rows)
    write_meta(out, meta)
    for res in results:
        print(
            f"{res.scenario_id}: i_fixed={res.i_fixed} "
            f"empirical_var={res.empirical_var:.6g} "
            f"mean_predicted_var={res.mean_predicted_var:.6g} "
            f"shapiro_p={res.shapiro_p if res.shapiro_p is not None else 'n/a'}"
        )
    print(f"wrote {out}")
    return 0


def _cmd_generate(s: _Settings) -> int:
    sid = s.get("scenario")
    if not sid:
        raise ConfigError("--scenario is required")
    if isinstance(sid, list):
        if len(sid) != 1:
            raise ConfigError("generate takes exactly one scenario")
        sid = sid[0]
    try:
        scen = scenario_by_id(sid)
    except KeyError:
        raise ConfigError(f"unknown scenario id: {sid!r}") from None
    dim = s.get("dim")
    if dim is not None:
        scen = scenario_with_dim(scen, int(dim))
    which = s.get("which", "null")
    params = scen.null_params if which == "null" else scen.alt_params
    n = int(s.get("n", 500))
    seed = int(s.get("seed", 1234))
    data = _sample_params(scen.family, params, n, seed)
    out = resolve_out_path(s.get("out", f"{sid}-{which}.csv"))
    from .distributions import export_csv

    export_csv(data, out, header=bool(s.get("header", False)))
    print(f"wrote {out} ({n} rows, {data.shape[1]} columns)")
    return 0


_COMMANDS = {
    "power": _cmd_power,
    "pvals": _cmd_pvals,
    "clt": _cmd_clt,
    "generate": _cmd_generate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = _Settings(args)
        return _COMMANDS[args.command](settings)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
