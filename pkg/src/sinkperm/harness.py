"""Experiment runner: power studies, p-value histograms, and the CLT study.

Every run is a deterministic function of the configuration and master seed.
Data files hold only reproducible payload (volatile timings go to the meta
sidecar), rows are sorted before writing, and floats are rendered with 17
significant digits so they round-trip exactly.
"""

import csv
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import (
    CltEstimate,
    NuSample,
    clt_estimate,
    estimate_iteration_bound,
    normality_check,
    nu_statistic,
)
from .distributions import (
    Scenario,
    _sample_params,
    sample_scenario_pair,
    scenario_by_id,
    scenario_with_dim,
)
from .errors import ConfigError
from .otcore import cost_matrix
from .partition import KMeansConfig, assign_voronoi, kmeans
from .seeding import derive_seed
from .twosample import PartitionMode, StatisticKind, StatisticSpec, permutation_test

# stream tags for seed derivation
_DATA, _KMEANS, _PERM, _CALIB, _REF = 0, 1, 2, 3, 4

_PAPER_REFERENCE_SIZE = 250_000


@dataclass(frozen=True)
class ExperimentConfig:
    scenarios: tuple[str, ...]
    statistics: tuple[StatisticSpec, ...] = ()
    n: int = 500
    m: int = 500
    k_clusters: int = 10
    lambdas: tuple[float, ...] = (1.0,)
    b_permutations: int = 200
    mc_reps: int = 200
    level: float = 0.05
    master_seed: int = 1234
    mode: PartitionMode = PartitionMode.DOUBLE_CENTERS
    knn_k: int = 4
    kmeans_restarts: int = 10
    dim: int | None = None
    reference_size: int = 100_000
    i_fixed: int | None = None
    fd_epsilon: float = 1e-7

    def __post_init__(self):
        if self.mc_reps < 1:
            raise ConfigError("mc_reps must be >= 1")
        if self.b_permutations < 1:
            raise ConfigError("B must be >= 1")
        if not 0.0 < self.level < 1.0:
            raise ConfigError("level must lie strictly between 0 and 1")
        if self.n < 1 or self.m < 1:
            raise ConfigError("sample sizes must be >= 1")
        if not self.scenarios:
            raise ConfigError("at least one scenario id is required")


def build_specs(
    kinds,
    lambdas,
    mode: PartitionMode = PartitionMode.DOUBLE_CENTERS,
    k_clusters: int = 10,
    knn_k: int = 4,
) -> tuple[StatisticSpec, ...]:
    """One spec per statistic kind, fanned out over the lambda grid.

    W and SCHILLING do not depend on lambda and appear once each.
    """
    specs = []
    for kind in kinds:
        kind = StatisticKind(kind)
        if kind in (StatisticKind.W, StatisticKind.SCHILLING):
            specs.append(
                StatisticSpec(kind=kind, mode=mode, k_clusters=k_clusters, knn_k=knn_k)
            )
        else:
            for lam in lambdas:
                specs.append(
                    StatisticSpec(
                        kind=kind, lam=lam, mode=mode, k_clusters=k_clusters, knn_k=knn_k
                    )
                )
    return tuple(specs)


def _lambda_of(spec: StatisticSpec) -> float | None:
    if spec.kind in (StatisticKind.W, StatisticKind.SCHILLING):
        return None
    return spec.lam


@dataclass(frozen=True)
class PvalueRecord:
    scenario_id: str
    statistic: str
    lam: float | None
    mode: str
    rep: int
    observed: float
    p_value: float
    elapsed_seconds: float


@dataclass(frozen=True)
class PowerRow:
    scenario_id: str
    statistic: str
    lam: float | None
    mode: str
    rejection_rate: float
    mc_reps: int
    avg_pvalue_time_seconds: float


@dataclass(frozen=True)
class BinRecord:
    scenario_id: str
    statistic: str
    lam: float | None
    bin_index: int
    bin_low: float
    bin_high: float
    count: int


@dataclass(frozen=True)
class CltRecord:
    scenario_id: str
    rep: int
    nu: float
    predicted_var: float


@dataclass(frozen=True, eq=False)
class CltStudyResult:
    scenario_id: str
    i_fixed: int
    nu_sample: NuSample
    estimates: list[CltEstimate]
    records: list[CltRecord]
    empirical_var: float
    mean_predicted_var: float
    shapiro_stat: float | None
    shapiro_p: float | None


def _resolve_scenarios(cfg: ExperimentConfig) -> list[tuple[int, Scenario]]:
    """Validate every scenario id up front; returns (catalog index, scenario)."""
    resolved = []
    for sid in cfg.scenarios:
        try:
            scen = scenario_by_id(sid)
        except KeyError:
            raise ConfigError(f"unknown scenario id: {sid!r}") from None
        if cfg.dim is not None:
            scen = scenario_with_dim(scen, cfg.dim)
        resolved.append((_catalog_index(sid), scen))
    return resolved


def _catalog_index(scenario_id: str) -> int:
    from .distributions import scenario_catalog

    for i, scen in enumerate(scenario_catalog()):
        if scen.scenario_id == scenario_id:
            return i
    raise ConfigError(f"unknown scenario id: {scenario_id!r}")


def run_tests(cfg: ExperimentConfig) -> list[PvalueRecord]:
    """One permutation test per (scenario, statistic, repetition).

    Within a repetition all statistics see the same sample pair, the same
    pooled partition, and the same permutation stream, so the comparison
    between statistics is paired.
    """
    if not cfg.statistics:
        raise ConfigError("at least one statistic spec is required")
    scens = _resolve_scenarios(cfg)
    seed = cfg.master_seed
    records: list[PvalueRecord] = []
    needs_partition = any(
        spec.kind is not StatisticKind.SCHILLING for spec in cfg.statistics
    )
    for cat_idx, scen in scens:
        for rep in range(cfg.mc_reps):
            x, y = sample_scenario_pair(
                scen, cfg.n, cfg.m, derive_seed(seed, cat_idx, rep, _DATA)
            )
            partition = None
            if needs_partition:
                partition = kmeans(
                    np.vstack([x, y]),
                    cfg.k_clusters,
                    KMeansConfig(
                        restarts=cfg.kmeans_restarts,
                        seed=derive_seed(seed, cat_idx, rep, _KMEANS),
                    ),
                )
            perm_seed = derive_seed(seed, cat_idx, rep, _PERM)
            for spec in cfg.statistics:
                t0 = time.perf_counter()
                res = permutation_test(
                    x, y, spec, cfg.b_permutations, perm_seed, partition=partition
                )
                elapsed = time.perf_counter() - t0
                records.append(
                    PvalueRecord(
                        scenario_id=scen.scenario_id,
                        statistic=spec.kind.name,
                        lam=_lambda_of(spec),
                        mode=spec.mode.name,
                        rep=rep,
                        observed=res.observed,
                        p_value=res.p_value,
                        elapsed_seconds=elapsed,
                    )
                )
    records.sort(key=lambda r: (r.scenario_id, r.statistic, r.lam or 0.0, r.rep))
    return records


def run_power_study(cfg: ExperimentConfig) -> list[PowerRow]:
    """Rejection rate at cfg.level for every (scenario, statistic) pair."""
    records = run_tests(cfg)
    groups: dict[tuple, list[PvalueRecord]] = {}
    for rec in records:
        groups.setdefault((rec.scenario_id, rec.statistic, rec.lam, rec.mode), []).append(rec)
    rows = []
    for (sid, statistic, lam, mode), recs in sorted(
        groups.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2] or 0.0)
    ):
        rejected = sum(1 for r in recs if r.p_value <= cfg.level)
        rows.append(
            PowerRow(
                scenario_id=sid,
                statistic=statistic,
                lam=lam,
                mode=mode,
                rejection_rate=rejected / len(recs),
                mc_reps=len(recs),
                avg_pvalue_time_seconds=sum(r.elapsed_seconds for r in recs) / len(recs),
            )
        )
    return rows


def run_pvalue_histogram(
    cfg: ExperimentConfig, bins: int = 20
) -> tuple[list[PvalueRecord], list[BinRecord]]:
    """All per-repetition p-values plus fixed-width bin counts over [0, 1]."""
    records = run_tests(cfg)
    edges = np.linspace(0.0, 1.0, bins + 1)
    groups: dict[tuple, list[float]] = {}
    for rec in records:
        groups.setdefault((rec.scenario_id, rec.statistic, rec.lam), []).append(rec.p_value)
    bin_records = []
    for (sid, statistic, lam), pvals in sorted(
        groups.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2] or 0.0)
    ):
        counts, _ = np.histogram(np.asarray(pvals), bins=edges)
        for idx in range(bins):
            bin_records.append(
                BinRecord(
                    scenario_id=sid,
                    statistic=statistic,
                    lam=lam,
                    bin_index=idx,
                    bin_low=float(edges[idx]),
                    bin_high=float(edges[idx + 1]),
                    count=int(counts[idx]),
                )
            )
    return records, bin_records


def run_clt_study(cfg: ExperimentConfig) -> list[CltStudyResult]:
    """Repetitions of the centered, scaled statistic with plug-in variances.

    Only null scenario pairs are accepted.  The fixed iteration count is
    either configured or estimated once per scenario from a calibration pair.
    """
    scens = _resolve_scenarios(cfg)
    for _, scen in scens:
        if not scen.is_null:
            raise ConfigError(
                f"CLT study needs a null scenario; {scen.scenario_id!r} is an alternative"
            )
    if cfg.reference_size < 1:
        raise ConfigError("reference_size must be >= 1")
    lam = cfg.lambdas[0]
    seed = cfg.master_seed
    results = []
    for cat_idx, scen in scens:
        i_fixed = cfg.i_fixed
        if i_fixed is None:
            x0, y0 = sample_scenario_pair(
                scen, cfg.n, cfg.m, derive_seed(seed, cat_idx, _CALIB, 0)
            )
            i_fixed = estimate_iteration_bound(
                x0,
                y0,
                cfg.k_clusters,
                lam,
                derive_seed(seed, cat_idx, _CALIB, 1),
                kmeans_cfg=KMeansConfig(
                    restarts=cfg.kmeans_restarts,
                    seed=derive_seed(seed, cat_idx, _CALIB, 2),
                ),
            )
        values = np.empty(cfg.mc_reps)
        estimates = []
        records = []
        alpha_ratio = cfg.n / (cfg.n + cfg.m)
        for rep in range(cfg.mc_reps):
            x, y = sample_scenario_pair(
                scen, cfg.n, cfg.m, derive_seed(seed, cat_idx, rep, _DATA)
            )
            partition = kmeans(
                np.vstack([x, y]),
                cfg.k_clusters,
                KMeansConfig(
                    restarts=cfg.kmeans_restarts,
                    seed=derive_seed(seed, cat_idx, rep, _KMEANS),
                ),
            )
            reference = _sample_params(
                scen.family,
                scen.null_params,
                cfg.reference_size,
                derive_seed(seed, cat_idx, rep, _REF),
            )
            nu = nu_statistic(
                x, y, cfg.k_clusters, lam, i_fixed, reference, partition=partition
            )
            centers = partition.centers
            a_star = (
                np.bincount(assign_voronoi(reference, centers), minlength=centers.shape[0])
                / cfg.reference_size
            )
            est = clt_estimate(
                a_star, cost_matrix(centers), lam, i_fixed, alpha_ratio, cfg.fd_epsilon
            )
            values[rep] = nu
            estimates.append(est)
            records.append(
                CltRecord(
                    scenario_id=scen.scenario_id,
                    rep=rep,
                    nu=nu,
                    predicted_var=est.predicted_var,
                )
            )
        sorted_values = np.sort(values)
        empirical_var = float(np.var(sorted_values, ddof=1)) if cfg.mc_reps > 1 else 0.0
        mean_predicted = float(np.mean([e.predicted_var for e in estimates]))
        shapiro_stat = shapiro_p = None
        if 20 <= cfg.mc_reps <= 5000:
            shapiro_stat, shapiro_p = normality_check(sorted_values)
        results.append(
            CltStudyResult(
                scenario_id=scen.scenario_id,
                i_fixed=i_fixed,
                nu_sample=NuSample(
                    values=values, n=cfg.n, m=cfg.m, n_e=cfg.n * cfg.m / (cfg.n + cfg.m)
                ),
                estimates=estimates,
                records=records,
                empirical_var=empirical_var,
                mean_predicted_var=mean_predicted,
                shapiro_stat=shapiro_stat,
                shapiro_p=shapiro_p,
            )
        )
    return results


# ---------------------------------------------------------------------------
# output


def _fmt_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def default_out_dir() -> Path:
    return Path(os.environ.get("SINKPERM_OUT_DIR", "."))


def resolve_out_path(out: str | os.PathLike) -> Path:
    path = Path(out)
    if not path.is_absolute():
        path = default_out_dir() / path
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_csv(path, rows: list[dict]) -> None:
    path = resolve_out_path(path)
    fieldnames = list(rows[0].keys()) if rows else []
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt_cell(v) for k, v in row.items()})


def write_json(path, payload) -> None:
    path = resolve_out_path(path)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=False)
        fh.write("\n")


def write_meta(path, meta: dict) -> None:
    write_json(str(path) + ".meta.json", meta)


def provenance(cfg: ExperimentConfig) -> dict:
    return {
        "n": cfg.n,
        "m": cfg.m,
        "k": cfg.k_clusters,
        "B": cfg.b_permutations,
        "seed": cfg.master_seed,
    }


def config_meta(cfg: ExperimentConfig, command: str, notes: list[str] | None = None) -> dict:
    meta = {
        "command": command,
        "version": __version__,
        "config": {
            "scenarios": list(cfg.scenarios),
            "statistics": [
                {
                    "kind": s.kind.name,
                    "lambda": _lambda_of(s),
                    "mode": s.mode.name,
                    "k_clusters": s.k_clusters,
                    "knn_k": s.knn_k,
                }
                for s in cfg.statistics
            ],
            "n": cfg.n,
            "m": cfg.m,
            "k_clusters": cfg.k_clusters,
            "lambdas": list(cfg.lambdas),
            "B": cfg.b_permutations,
            "mc_reps": cfg.mc_reps,
            "level": cfg.level,
            "master_seed": cfg.master_seed,
            "mode": cfg.mode.name,
            "knn_k": cfg.knn_k,
            "kmeans_restarts": cfg.kmeans_restarts,
            "dim": cfg.dim,
            "reference_size": cfg.reference_size,
            "i_fixed": cfg.i_fixed,
            "fd_epsilon": cfg.fd_epsilon,
        },
        "notes": list(notes or []),
    }
    if command == "clt" and cfg.reference_size != _PAPER_REFERENCE_SIZE:
        meta["notes"].append(
            f"reference_size {cfg.reference_size} is a desk-scale stand-in for "
            f"{_PAPER_REFERENCE_SIZE}"
        )
    return meta
