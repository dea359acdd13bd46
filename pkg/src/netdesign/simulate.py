"""Desk-scale comparative studies of design strategies.

Every replication derives its random streams from ``(master_seed, family,
replication_id)``, so results do not depend on which worker ran what or in
which order.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .design import (
    OptimizerConfig,
    _balanced_z,
    optimize_assignment,
    spectral_clusters,
    stratified_assignment,
)
from .models import PriorSpec, draw_prior_batch
from .network import FAMILIES, FAMILY_ALIASES, generate
from .risk import Assignment, RiskObjective, imse_closed_form_normal, risk_components

log = logging.getLogger(__name__)

STRATEGIES = ("optimal", "randomized-balanced", "stratified-spectral")

MISSPEC_GRID = (
    (1, 0.5), (2, 0.7), (5, 1), (7, 1.2), (10, 1.5),
    (15, 2), (20, 2.5), (30, 3), (40, 4), (50, 5),
)

RECORD_COLUMNS = (
    "replication_id",
    "network_family",
    "design_strategy",
    "design_prior_id",
    "imse_true",
    "relative_imse",
)

ANOVA_FACTORS = ("design_strategy", "design_prior_id", "network_family")

ANOVA_CONVENTION = (
    "marginal one-way sums of squares per factor on imse_true, factor order "
    "design_strategy, design_prior_id, network_family; MSS = SS / (levels - 1); "
    "residual = total SS minus factor SS over the remaining degrees of freedom. "
    "On the balanced factorial layout this equals the sequential decomposition."
)


class ConfigError(ValueError):
    pass


def misspecification_grid(base=None):
    """The ten ``(mu0, sigma0)`` design priors; other hyper-parameters from ``base``."""
    base = base or PriorSpec()
    return tuple(dataclasses.replace(base, mu0=float(m), sigma0=float(s)) for m, s in MISSPEC_GRID)


@dataclass(frozen=True)
class StudyConfig:
    network_families: tuple = FAMILIES
    family_params: dict = field(default_factory=dict)
    n_nodes: int = 100
    n_replications: int = 20
    true_prior: PriorSpec = field(default_factory=PriorSpec)
    design_priors: tuple = (PriorSpec(),)
    n_mc_draws: int = 2000
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    k_clusters: int = 4
    n_baseline_draws: int = 50
    master_seed: int = 0

    def __post_init__(self):
        fams = tuple(FAMILY_ALIASES.get(f, f) for f in self.network_families)
        for f in fams:
            if f not in FAMILIES:
                raise ConfigError(f"network_families: unknown family {f!r}")
        if not fams:
            raise ConfigError("network_families: at least one family is required")
        object.__setattr__(self, "network_families", fams)
        object.__setattr__(self, "design_priors", tuple(self.design_priors))
        if not self.design_priors:
            raise ConfigError("design_priors: at least one prior is required")
        for name in ("n_nodes", "n_replications", "n_mc_draws", "n_baseline_draws"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name}: must be a positive integer")
        if self.n_nodes < 4:
            raise ConfigError("n_nodes: must be at least 4")
        if not 2 <= self.k_clusters <= self.n_nodes / 2:
            raise ConfigError("k_clusters: must satisfy 2 <= k <= n_nodes/2")

    def to_dict(self):
        return {
            "network_families": list(self.network_families),
            "family_params": self.family_params,
            "n_nodes": self.n_nodes,
            "n_replications": self.n_replications,
            "true_prior": self.true_prior.to_dict(),
            "design_priors": [p.to_dict() for p in self.design_priors],
            "n_mc_draws": self.n_mc_draws,
            "optimizer": self.optimizer.to_dict(),
            "k_clusters": self.k_clusters,
            "n_baseline_draws": self.n_baseline_draws,
            "master_seed": self.master_seed,
        }

    @classmethod
    def from_dict(cls, raw, path="config"):
        """Build from parsed JSON; unknown keys are rejected with their key path."""
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: expected an object")
        known = {f.name for f in dataclasses.fields(cls)}
        for key in raw:
            if key not in known:
                raise ConfigError(f"{path}.{key}: unknown key")
        kw = dict(raw)
        try:
            if "true_prior" in kw:
                kw["true_prior"] = _prior_from(kw["true_prior"], f"{path}.true_prior")
            if "design_priors" in kw:
                if kw["design_priors"] == "misspecification":
                    base = kw.get("true_prior", PriorSpec())
                    kw["design_priors"] = misspecification_grid(base)
                else:
                    kw["design_priors"] = tuple(
                        _prior_from(p, f"{path}.design_priors[{i}]")
                        for i, p in enumerate(kw["design_priors"])
                    )
            if "optimizer" in kw:
                kw["optimizer"] = _dataclass_from(
                    OptimizerConfig, kw["optimizer"], f"{path}.optimizer"
                )
            if "network_families" in kw:
                fams = kw["network_families"]
                kw["network_families"] = (fams,) if isinstance(fams, str) else tuple(fams)
            if "family_params" in kw:
                fp = kw["family_params"]
                if not isinstance(fp, dict):
                    raise ConfigError(f"{path}.family_params: expected an object")
                kw["family_params"] = {FAMILY_ALIASES.get(k, k): v for k, v in fp.items()}
            return cls(**kw)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path}: {exc}") from exc


def _dataclass_from(kind, raw, path):
    if isinstance(raw, kind):
        return raw
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected an object")
    known = {f.name for f in dataclasses.fields(kind)}
    for key in raw:
        if key not in known:
            raise ConfigError(f"{path}.{key}: unknown key")
    try:
        return kind(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _prior_from(raw, path):
    return _dataclass_from(PriorSpec, raw, path)


@dataclass(frozen=True)
class StudyRecord:
    replication_id: int
    network_family: str
    design_strategy: str
    design_prior_id: int
    imse_true: float
    relative_imse: float

    def to_dict(self):
        return dataclasses.asdict(self)


# ---------------------------------------------------------------- replications


def _replicate(cfg, family, rep_id, prior_ids, with_stratified):
    """All evaluations for one network; returns a dict of true-prior iMSEs."""
    fam_idx = FAMILIES.index(family)
    root = np.random.SeedSequence([cfg.master_seed, fam_idx, rep_id])
    s_net, s_opt, s_mc, s_rand, s_strat = root.spawn(5)

    params = cfg.family_params.get(family)
    net = generate(family, cfg.n_nodes, params, np.random.default_rng(s_net))
    truth = RiskObjective.imse_closed_form(cfg.true_prior, net)

    rng = np.random.default_rng(s_rand)
    zs = np.stack([_balanced_z(net.n, rng) for _ in range(cfg.n_baseline_draws)])
    out = {"random": float(np.mean(truth.batch(zs)))}

    if with_stratified:
        rng = np.random.default_rng(s_strat)
        labels = spectral_clusters(net, cfg.k_clusters, rng)
        zs = np.stack([stratified_assignment(labels, rng).z for _ in range(cfg.n_baseline_draws)])
        out["stratified"] = float(np.mean(truth.batch(zs)))

    opt_seed = int(s_opt.generate_state(1)[0])
    opt_cfg = dataclasses.replace(cfg.optimizer, seed=opt_seed)
    optimal = {}
    for pid in prior_ids:
        # every design prior sees the same parameter draws and search stream
        obj = RiskObjective.imse_mc(cfg.design_priors[pid], net, cfg.n_mc_draws, s_mc)
        res = optimize_assignment(obj, net.n, opt_cfg)
        optimal[pid] = truth(res.assignment)
    out["optimal"] = optimal
    return out


def _task(args):
    cfg, family, rep_id, prior_ids, with_stratified = args
    return _replicate(cfg, family, rep_id, prior_ids, with_stratified)


def _run_all(cfg, prior_ids, with_stratified, workers):
    tasks = [
        (cfg, fam, rep, tuple(prior_ids), with_stratified)
        for fam in cfg.network_families
        for rep in range(cfg.n_replications)
    ]
    if workers and workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_task, tasks, chunksize=1))
    else:
        results = [_task(t) for t in tasks]
    return [(t[1], t[2], r) for t, r in zip(tasks, results)]


def _rec(rep, fam, strategy, pid, value, baseline):
    return StudyRecord(rep, fam, strategy, pid, float(value), float(value) / float(baseline))


def _sorted(records):
    order = {s: i for i, s in enumerate(STRATEGIES)}
    return sorted(
        records,
        key=lambda r: (
            FAMILIES.index(r.network_family),
            r.replication_id,
            r.design_prior_id,
            order[r.design_strategy],
        ),
    )


def run_comparative_study(cfg, workers=1):
    """Optimal (under the first design prior), randomized-balanced and
    stratified-spectral designs, all scored by the exact iMSE under the true
    prior. Baseline rows carry ``design_prior_id = -1``."""
    records = []
    for fam, rep, out in _run_all(cfg, [0], True, workers):
        base = out["random"]
        records.append(_rec(rep, fam, "optimal", 0, out["optimal"][0], base))
        records.append(_rec(rep, fam, "randomized-balanced", -1, base, base))
        records.append(_rec(rep, fam, "stratified-spectral", -1, out["stratified"], base))
    return _sorted(records)


def run_misspecification_study(cfg, workers=1):
    """One optimal row per design prior plus one randomized-balanced row, per
    replication and family."""
    ids = list(range(len(cfg.design_priors)))
    records = []
    for fam, rep, out in _run_all(cfg, ids, False, workers):
        base = out["random"]
        for pid in ids:
            records.append(_rec(rep, fam, "optimal", pid, out["optimal"][pid], base))
        records.append(_rec(rep, fam, "randomized-balanced", -1, base, base))
    return _sorted(records)


def run_factorial_study(cfg, workers=1):
    """Fully crossed strategy x design prior x family x replication layout.

    The two baselines do not use the design prior, so their value on a network
    is repeated under every prior level to keep the layout balanced.
    """
    ids = list(range(len(cfg.design_priors)))
    records = []
    for fam, rep, out in _run_all(cfg, ids, True, workers):
        base = out["random"]
        for pid in ids:
            records.append(_rec(rep, fam, "optimal", pid, out["optimal"][pid], base))
            records.append(_rec(rep, fam, "randomized-balanced", pid, base, base))
            records.append(_rec(rep, fam, "stratified-spectral", pid, out["stratified"], base))
    return _sorted(records)


# ---------------------------------------------------------------- summaries


@dataclass(frozen=True)
class AnovaRow:
    factor: str
    df: int
    ss: float
    mss: float


@dataclass(frozen=True)
class AnovaTable:
    rows: tuple
    total_ss: float
    convention: str = ANOVA_CONVENTION

    def __getitem__(self, factor):
        for row in self.rows:
            if row.factor == factor:
                return row
        raise KeyError(factor)

    def to_dict(self):
        return {
            "convention": self.convention,
            "total_ss": self.total_ss,
            "rows": [dataclasses.asdict(r) for r in self.rows],
        }


def anova_mss(records, factors=ANOVA_FACTORS):
    y = np.array([r.imse_true for r in records], dtype=float)
    if len(y) < 2:
        raise ValueError("need at least two records")
    grand = y.mean()
    total_ss = float(np.sum((y - grand) ** 2))
    rows = []
    used_ss, used_df = 0.0, 0
    for factor in factors:
        labels = [getattr(r, factor) for r in records]
        levels = sorted(set(labels), key=str)
        if len(levels) < 2:
            raise ValueError(f"factor {factor!r} has fewer than 2 levels")
        ss = 0.0
        lab = np.array([str(v) for v in labels])
        for level in levels:
            sel = y[lab == str(level)]
            ss += len(sel) * (sel.mean() - grand) ** 2
        df = len(levels) - 1
        rows.append(AnovaRow(factor, df, float(ss), float(ss / df)))
        used_ss += ss
        used_df += df
    res_df = len(y) - 1 - used_df
    res_ss = total_ss - used_ss
    res_mss = res_ss / res_df if res_df > 0 else math.nan
    rows.append(AnovaRow("residual", res_df, float(res_ss), float(res_mss)))
    return AnovaTable(tuple(rows), total_ss)


@dataclass(frozen=True)
class RankingStabilityReport:
    n_pairs: int
    concordance: float
    n_design_pairs: int


def ranking_stability(net, prior, designs, n_draws, n_pairs, rng):
    """How often two independent Monte Carlo iMSE estimates both order a pair of
    designs the way the exact iMSE does.

    Each estimate is one realized objective: the same parameter draws score
    every design. Pairs with equal exact iMSE are left out of the denominator;
    with no comparable pair the concordance is 1.
    """
    designs = [a if isinstance(a, Assignment) else Assignment(a) for a in designs]
    if len(designs) < 2:
        raise ValueError("need at least two candidate designs")
    exact = np.array([imse_closed_form_normal(prior, net, a) for a in designs])
    comps = np.array([risk_components(net, a) for a in designs])  # (designs, 3)
    pairs = [
        (i, j) if exact[i] < exact[j] else (j, i)
        for i in range(len(designs))
        for j in range(i + 1, len(designs))
        if exact[i] != exact[j]
    ]
    if not pairs:
        return RankingStabilityReport(int(n_pairs), 1.0, 0)
    lo = np.array([p[0] for p in pairs])
    hi = np.array([p[1] for p in pairs])
    agree = 0
    for _ in range(int(n_pairs)):
        ok = np.ones(len(pairs), dtype=bool)
        for _ in range(2):
            mu, s2, g2 = draw_prior_batch(prior, rng, int(n_draws))
            coef = np.array([np.mean(mu**2), np.mean(s2), np.mean(g2)])
            est = comps @ coef
            ok &= est[lo] <= est[hi]
        agree += int(ok.sum())
    return RankingStabilityReport(int(n_pairs), agree / (n_pairs * len(pairs)), len(pairs))


def relative_histogram(records, bin_width=0.05):
    """Binned counts of ``relative_imse`` per (family, strategy)."""
    out = {}
    for r in records:
        if r.design_strategy == "randomized-balanced":
            continue
        key = f"{r.network_family}/{r.design_strategy}"
        b = math.floor(r.relative_imse / bin_width + 1e-9)
        out.setdefault(key, {}).setdefault(b, 0)
        out[key][b] += 1
    return {
        key: [[round(b * bin_width, 10), round((b + 1) * bin_width, 10), c] for b, c in sorted(bins.items())]
        for key, bins in sorted(out.items())
    }


def summarize(records):
    """Median relative iMSE per family and strategy, plus optimal vs stratified."""
    summary = {}
    for fam in sorted({r.network_family for r in records}, key=FAMILIES.index):
        rows = [r for r in records if r.network_family == fam]
        fam_sum = {}
        for s in STRATEGIES:
            vals = [r.relative_imse for r in rows if r.design_strategy == s]
            if vals:
                fam_sum[s] = float(np.median(vals))
        opt = {
            (r.replication_id, r.design_prior_id): r.imse_true
            for r in rows
            if r.design_strategy == "optimal"
        }
        strat = {
            r.replication_id: r.imse_true
            for r in rows
            if r.design_strategy == "stratified-spectral"
        }
        ratios = [v / strat[rep] for (rep, _), v in opt.items() if rep in strat]
        if ratios:
            fam_sum["optimal_vs_stratified"] = float(np.median(ratios))
        summary[fam] = fam_sum
    return summary


# ---------------------------------------------------------------- reports


def _fmt(x):
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def write_report(obj, path, fmt="csv", config=None):
    """Write study records or an ANOVA table as CSV or JSON.

    CSV output gets a ``<name>.config.json`` sidecar when ``config`` is given;
    JSON output embeds it.
    """
    path = Path(path)
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown report format {fmt!r}")
    try:
        if fmt == "csv":
            buf = io.StringIO()
            writer = csv.writer(buf, lineterminator="\n")
            if isinstance(obj, AnovaTable):
                writer.writerow(("factor", "df", "mss"))
                for row in obj.rows:
                    writer.writerow((row.factor, row.df, _fmt(row.mss)))
            else:
                writer.writerow(RECORD_COLUMNS)
                for rec in obj:
                    writer.writerow([_fmt(getattr(rec, c)) for c in RECORD_COLUMNS])
            path.write_text(buf.getvalue())
            if config is not None:
                sidecar = path.with_name(path.stem + ".config.json")
                sidecar.write_text(json.dumps(_config_echo(config), indent=2) + "\n")
        else:
            payload = {}
            if config is not None:
                payload.update(_config_echo(config))
            if isinstance(obj, AnovaTable):
                payload["anova"] = obj.to_dict()
            else:
                payload["records"] = [r.to_dict() for r in obj]
            path.write_text(json.dumps(payload, indent=2) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc


def _config_echo(config):
    cfg = config.to_dict() if hasattr(config, "to_dict") else dict(config)
    return {"master_seed": cfg.get("master_seed"), "config": cfg}


def read_records_json(path):
    data = json.loads(Path(path).read_text())
    return [StudyRecord(**r) for r in data["records"]]


def ranking_study(cfg, n_draws=2000, n_pairs=100, n_designs=10):
    """Ranking stability on one network per family.

    Candidates: optimal designs under up to three design priors (first, middle,
    last), three stratified-spectral draws, and randomized-balanced draws for
    the rest. Estimates use the true prior.
    """
    if n_designs < 7:
        raise ValueError("n_designs must be at least 7")
    out = {}
    for fam in cfg.network_families:
        root = np.random.SeedSequence([cfg.master_seed, FAMILIES.index(fam), 0, 1])
        s_net, s_opt, s_mc, s_des, s_est = root.spawn(5)
        net = generate(fam, cfg.n_nodes, cfg.family_params.get(fam), np.random.default_rng(s_net))
        opt_cfg = dataclasses.replace(cfg.optimizer, seed=int(s_opt.generate_state(1)[0]))
        k = len(cfg.design_priors)
        pids = sorted({0, k // 2, k - 1})
        designs = []
        for pid in pids:
            obj = RiskObjective.imse_mc(cfg.design_priors[pid], net, cfg.n_mc_draws, s_mc)
            designs.append(optimize_assignment(obj, net.n, opt_cfg).assignment)
        rng = np.random.default_rng(s_des)
        labels = spectral_clusters(net, cfg.k_clusters, rng)
        designs += [stratified_assignment(labels, rng) for _ in range(3)]
        while len(designs) < n_designs:
            designs.append(Assignment(_balanced_z(net.n, rng)))
        rep = ranking_stability(net, cfg.true_prior, designs, n_draws, n_pairs, np.random.default_rng(s_est))
        out[fam] = dataclasses.asdict(rep)
    return out
