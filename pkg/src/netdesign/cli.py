"""Command-line entry point: ``netdesign {gen-network,design,evaluate,simulate}``.

Exit status is 0 on success, 2 for invalid input and 1 for anything else.
A ``--config`` JSON file supplies option defaults (keys are the long option
names with underscores); explicit flags win over the file.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .design import (
    OptimizerConfig,
    grid_from_dicts,
    optimize_assignment,
    point_prior_design,
    randomized_balanced,
    stratified_spectral,
)
from .models import NormalParams, PoissonGammaParams, PriorSpec, nef_abstract_normal, nef_abstract_poisson_gamma
from .network import generate, read_network, write_network
from .risk import (
    Assignment,
    RiskObjective,
    contrast_weights,
    imse_closed_form_normal,
    imse_mc,
    mse_decomposition_normal,
    mse_general,
    mse_normal,
    mse_poisson_gamma,
    variance_of_contrast,
)
from .simulate import (
    ConfigError,
    StudyConfig,
    anova_mss,
    misspecification_grid,
    ranking_study,
    relative_histogram,
    run_comparative_study,
    run_factorial_study,
    run_misspecification_study,
    summarize,
    write_report,
)

log = logging.getLogger("netdesign")


class UsageError(ValueError):
    pass


def _default_workers():
    env = os.environ.get("NETDESIGN_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"NETDESIGN_WORKERS must be an integer, got {env!r}")
    return os.cpu_count() or 1


def _add_common(p, seed_default=0):
    p.add_argument("--seed", type=int, default=seed_default, help="random seed (default: %(default)s)")
    p.add_argument("--config", help="JSON file with option defaults")
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: $NETDESIGN_WORKERS or CPU count)")
    p.add_argument("-o", "--output", help="output path")


def _add_prior(p):
    d = PriorSpec()
    g = p.add_argument_group("prior hyper-parameters")
    g.add_argument("--mu0", type=float, default=d.mu0, help="prior mean of mu (default: %(default)s)")
    g.add_argument("--sigma0", type=float, default=d.sigma0, help="prior sd of mu (default: %(default)s)")
    g.add_argument("--r-gamma", type=float, default=d.r_gamma, help="InvGamma shape for gamma2 (default: %(default)s)")
    g.add_argument("--lambda-gamma", type=float, default=d.lambda_gamma, help="InvGamma scale for gamma2 (default: %(default)s)")
    g.add_argument("--r-sigma", type=float, default=d.r_sigma, help="InvGamma shape for sigma2 (default: %(default)s)")
    g.add_argument("--lambda-sigma", type=float, default=d.lambda_sigma, help="InvGamma scale for sigma2 (default: %(default)s)")
    g.add_argument("--n-draws", type=int, default=2000, help="Monte Carlo prior draws (default: %(default)s)")


def _add_optimizer(p):
    d = OptimizerConfig()
    g = p.add_argument_group("annealing")
    g.add_argument("--max-iters", type=int, default=None, help="iterations per restart (default: 200*n)")
    g.add_argument("--restarts", type=int, default=d.n_restarts, help="restarts (default: %(default)s)")
    g.add_argument("--init-temperature", type=float, default=None,
                   help="starting temperature (default: objective at the random start)")
    g.add_argument("--cooling-rate", type=float, default=d.cooling_rate, help="geometric cooling factor (default: %(default)s)")
    g.add_argument("--move-mix", type=float, default=d.move_mix, help="probability of a swap move (default: %(default)s)")


def build_parser():
    parser = argparse.ArgumentParser(prog="netdesign", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    p = sub.add_parser("gen-network", help="generate a random network edge list")
    p.add_argument("--family", required=True, help="er | sw | pl | sbm (or full family name)")
    p.add_argument("--n", type=int, required=True, help="node count")
    p.add_argument("--p", type=float, help="Erdos-Renyi edge probability")
    p.add_argument("--mean-degree", type=float, help="Erdos-Renyi mean degree (default 5 when --p is absent)")
    p.add_argument("--k", type=int, help="small-world ring degree (default 4)")
    p.add_argument("--beta", type=float, help="small-world rewire probability (default 0.1)")
    p.add_argument("--m", type=int, help="power-law edges per new node (default 2)")
    p.add_argument("--blocks", type=int, help="SBM equal block count (default 4)")
    p.add_argument("--p-in", type=float, help="SBM within-block probability (default 0.15)")
    p.add_argument("--p-out", type=float, help="SBM between-block probability (default 0.01)")
    _add_common(p)
    p.set_defaults(func=cmd_gen_network)
    subs["gen-network"] = p

    p = sub.add_parser("design", help="compute a treatment assignment")
    p.add_argument("--network", required=True, help="edge-list or JSON network file")
    p.add_argument("--strategy", default="optimal",
                   choices=["optimal", "balanced", "stratified", "point-prior"],
                   help="design strategy (default: %(default)s)")
    p.add_argument("--objective", default="mc", choices=["mc", "closed"],
                   help="optimal strategy objective: Monte Carlo or exact iMSE (default: %(default)s)")
    p.add_argument("--k-clusters", type=int, default=4, help="strata for --strategy stratified (default: %(default)s)")
    p.add_argument("--grid", help="JSON point-prior grid: {\"params\": [{mu, sigma2, gamma2}, ...], \"weights\": [...]}")
    _add_prior(p)
    _add_optimizer(p)
    _add_common(p)
    p.set_defaults(func=cmd_design)
    subs["design"] = p

    p = sub.add_parser("evaluate", help="risk of a given assignment")
    p.add_argument("--network", help="edge-list or JSON network file")
    p.add_argument("--assignment", help="JSON 0/1 list, or a file holding one (or a design output)")
    p.add_argument("--metric", default="mse", choices=["mse", "imse", "imse-mc", "variance"],
                   help="quantity to report (default: %(default)s)")
    p.add_argument("--model", default="normal", choices=["normal", "poisson-gamma"],
                   help="outcome model for --metric mse (default: %(default)s)")
    p.add_argument("--mu", type=float, default=1.0, help="normal latent mean (default: %(default)s)")
    p.add_argument("--sigma2", type=float, default=1.0, help="normal latent variance (default: %(default)s)")
    p.add_argument("--gamma2", type=float, default=1.0, help="normal outcome variance (default: %(default)s)")
    p.add_argument("--r", type=float, default=1.0, help="Poisson-Gamma shape (default: %(default)s)")
    p.add_argument("--lam", type=float, default=1.0, help="Poisson-Gamma scale (default: %(default)s)")
    p.add_argument("--decompose", action="store_true", help="include the bias/variance decomposition (normal)")
    p.add_argument("--explicit-cov", help="JSON covariance matrix for --metric variance")
    p.add_argument("--contrast", help="JSON contrast weights for --metric variance")
    _add_prior(p)
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)
    subs["evaluate"] = p

    p = sub.add_parser("simulate", help="run a simulation study")
    p.add_argument("--study", default="comparative",
                   choices=["comparative", "misspec", "factorial", "ranking"],
                   help="study to run (default: %(default)s)")
    p.add_argument("--format", default="both", choices=["csv", "json", "both"],
                   help="report format (default: %(default)s)")
    p.add_argument("--ranking-draws", type=int, default=2000, help="draws per estimate for --study ranking")
    p.add_argument("--ranking-pairs", type=int, default=100, help="estimate pairs for --study ranking")
    p.add_argument("--seed", type=int, default=None, help="overrides master_seed from the config")
    p.add_argument("--config", help="study configuration JSON")
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: $NETDESIGN_WORKERS or CPU count)")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)
    subs["simulate"] = p
    return parser, subs


# ---------------------------------------------------------------- helpers


def _emit(obj, path):
    text = json.dumps(obj, indent=2) + "\n"
    if path:
        Path(path).write_text(text)
    sys.stdout.write(text)


def _load_json_arg(value, what):
    """JSON literal, or path to a JSON file."""
    if value is None:
        raise UsageError(f"{what} is required")
    text = value
    if not value.lstrip().startswith(("[", "{")):
        try:
            text = Path(value).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read {what} from {value}: {exc}")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{what} is not valid JSON: {exc}")


def _load_network(path):
    try:
        return read_network(path)
    except OSError as exc:
        raise UsageError(f"cannot read network {path}: {exc}")


def _prior(args):
    return PriorSpec(
        mu0=args.mu0, sigma0=args.sigma0,
        r_gamma=args.r_gamma, lambda_gamma=args.lambda_gamma,
        r_sigma=args.r_sigma, lambda_sigma=args.lambda_sigma,
    )


def _optimizer(args, seed):
    return OptimizerConfig(
        max_iters=args.max_iters, n_restarts=args.restarts,
        init_temperature=args.init_temperature, cooling_rate=args.cooling_rate,
        move_mix=args.move_mix, seed=seed,
    )


# ---------------------------------------------------------------- commands


def cmd_gen_network(args):
    params = {}
    for key in ("p", "mean_degree", "k", "beta", "m", "p_in", "p_out"):
        if getattr(args, key) is not None:
            params[key] = getattr(args, key)
    if args.blocks is not None:
        params["n_blocks"] = args.blocks
    if not args.output:
        raise UsageError("-o/--output is required")
    net = generate(args.family, args.n, params, args.seed)
    write_network(net, args.output)
    print(f"n={net.n} edges={net.n_edges} mean_degree={net.mean_degree:.6g}")


def cmd_design(args):
    net = _load_network(args.network)
    prior = _prior(args)
    opt_seed, mc_seq, misc_seq = np.random.SeedSequence(args.seed).spawn(3)
    cfg = _optimizer(args, int(opt_seed.generate_state(1)[0]))
    out = {"strategy": args.strategy, "seed": args.seed}
    if args.strategy == "optimal":
        if args.objective == "mc":
            obj = RiskObjective.imse_mc(prior, net, args.n_draws, mc_seq)
        else:
            obj = RiskObjective.imse_closed_form(prior, net)
        res = optimize_assignment(obj, net.n, cfg)
        z, objective = res.assignment, res.objective
    elif args.strategy == "balanced":
        z = randomized_balanced(net.n, np.random.default_rng(misc_seq))
        objective = imse_closed_form_normal(prior, net, z)
    elif args.strategy == "stratified":
        z = stratified_spectral(net, args.k_clusters, np.random.default_rng(misc_seq))
        objective = imse_closed_form_normal(prior, net, z)
    else:
        raw = _load_json_arg(args.grid, "--grid")
        if not isinstance(raw, dict) or "params" not in raw:
            raise UsageError("--grid must be an object with a 'params' list")
        grid = grid_from_dicts(raw["params"], raw.get("weights"))
        res = point_prior_design(grid, net, cfg)
        z, objective = res.assignment, res.objective
        out["gamma"] = res.gamma.tolist()
    out["z"] = z.tolist()
    out["objective"] = float(objective)
    out["imse"] = imse_closed_form_normal(prior, net, z)
    _emit(dict(sorted(out.items())), args.output)


def _assignment_from(args):
    raw = _load_json_arg(args.assignment, "--assignment")
    if isinstance(raw, dict):
        raw = raw.get("z")
    if not isinstance(raw, list):
        raise UsageError("--assignment must be a JSON list of 0/1")
    return Assignment(np.asarray(raw))


def cmd_evaluate(args):
    out = {"metric": args.metric}
    if args.metric == "variance":
        cov = np.asarray(_load_json_arg(args.explicit_cov, "--explicit-cov"), dtype=float)
        if args.contrast is not None:
            w = np.asarray(_load_json_arg(args.contrast, "--contrast"), dtype=float)
        else:
            w = contrast_weights(_assignment_from(args))
        out["value"] = variance_of_contrast(w, cov)
        _emit(out, args.output)
        return
    if not args.network:
        raise UsageError("--network is required for this metric")
    net = _load_network(args.network)
    a = _assignment_from(args)
    if a.n != net.n:
        raise UsageError(f"assignment has {a.n} entries, network has {net.n} nodes")
    if args.metric == "mse":
        out["model"] = args.model
        if args.model == "normal":
            params = NormalParams(args.mu, args.sigma2, args.gamma2)
            out["value"] = mse_normal(params, net, a)
            out["value_general"] = mse_general(nef_abstract_normal(params, net), net, a)
        else:
            params = PoissonGammaParams(args.r, args.lam)
            out["value"] = mse_poisson_gamma(params, net, a)
            out["value_general"] = mse_general(nef_abstract_poisson_gamma(params, net), net, a)
        if args.decompose:
            if args.model != "normal":
                raise UsageError("--decompose is available for the normal model only")
            out["decomposition"] = mse_decomposition_normal(params, net, a).to_dict()
    elif args.metric == "imse":
        out["value"] = imse_closed_form_normal(_prior(args), net, a)
    else:
        est = imse_mc(_prior(args), net, a, args.n_draws, np.random.default_rng(args.seed))
        out.update(value=est.value, std_error=est.std_error, n_draws=est.n_draws, seed=args.seed)
    _emit(out, args.output)


def cmd_simulate(args):
    raw = {}
    if args.config:
        raw = _load_json_arg(args.config, "--config")
    if args.study in ("misspec", "factorial") and "design_priors" not in raw:
        raw = dict(raw, design_priors="misspecification")
    if args.seed is not None:
        raw = dict(raw, master_seed=args.seed)
    cfg = StudyConfig.from_dict(raw)
    workers = args.workers if args.workers is not None else _default_workers()
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    formats = ("csv", "json") if args.format == "both" else (args.format,)

    if args.study == "ranking":
        reports = ranking_study(cfg, args.ranking_draws, args.ranking_pairs)
        payload = {"master_seed": cfg.master_seed, "config": cfg.to_dict(), "ranking": reports}
        (outdir / "ranking.json").write_text(json.dumps(payload, indent=2) + "\n")
        print(" ".join(f"{fam}={rep['concordance']:.3f}" for fam, rep in reports.items()))
        return

    run = {
        "comparative": run_comparative_study,
        "misspec": run_misspecification_study,
        "factorial": run_factorial_study,
    }[args.study]
    records = run(cfg, workers=workers)
    for fmt in formats:
        write_report(records, outdir / f"records.{fmt}", fmt, config=cfg)
    if args.study == "factorial":
        table = anova_mss(records)
        for fmt in formats:
            write_report(table, outdir / f"anova.{fmt}", fmt)
    summary = {
        "master_seed": cfg.master_seed,
        "study": args.study,
        "median_relative_imse": summarize(records),
        "histogram_bin_width": 0.05,
        "relative_imse_histogram": relative_histogram(records),
    }
    (outdir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    overall = {}
    for s in ("optimal", "stratified-spectral", "randomized-balanced"):
        vals = [r.relative_imse for r in records if r.design_strategy == s]
        if vals:
            overall[s] = float(np.median(vals))
    print("median relative iMSE: " + " ".join(f"{k}={v:.4f}" for k, v in overall.items()))


# ---------------------------------------------------------------- main


def _config_defaults(argv):
    """Pull ``--config`` out of argv without parsing everything else."""
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    try:
        cmd = next((t for t in argv if t in subs), None)
        cfg_path = _config_defaults(argv)
        if cmd and cmd != "simulate" and cfg_path:
            cfg = _load_json_arg(cfg_path, "--config")
            if not isinstance(cfg, dict):
                raise UsageError("--config must hold a JSON object")
            sp = subs[cmd]
            dests = {a.dest for a in sp._actions} - {"help", "config", "func"}
            unknown = sorted(k for k in cfg if k not in dests)
            if unknown:
                raise UsageError(f"--config: unknown key(s) {', '.join(unknown)}")
            sp.set_defaults(**cfg)
    except UsageError as exc:
        print(f"netdesign: error: {exc}", file=sys.stderr)
        return 2
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        args.func(args)
    except (ValueError, ConfigError) as exc:
        print(f"netdesign {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.debug("failure", exc_info=True)
        print(f"netdesign {args.command}: failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
