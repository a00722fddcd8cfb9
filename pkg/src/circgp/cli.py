"""Command-line interface.

Subcommands: ``simulate``, ``fit``, ``predict``, ``score``, ``study`` and
``summarize``. Exit status is 0 on success, 2 for invalid input or
configuration and 3 for numerical failures. Errors are written to standard
error as one JSON object per line.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import io
from .circular import circ_dist
from .covariance import CORR_NAMES, GneitingParams
from .covariates import DesignInfo, fit_variant, krige_variant
from .dataset import Dataset
from .errors import ConfigurationError, InitializationError
from .mcmc import McmcConfig, format_summary, summarize
from .projected import PnParams, fit_pn, krige_pn, simulate_pn
from .scoring import PredictiveSamples, ScoreReport, crps_targets
from .simstudy import RESULT_COLUMNS, SplitSpec, StudyDesign, default_workers, generate_study, run_study, split_points
from .wrapped import WnParams, fit_wn, krige_wn, simulate_wn

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3

STUDY_DESIGNS = {
    "wn_full": dict(model="WN"),
    "pn_full": dict(model="PN"),
    "wn_low": dict(model="WN", groups=("low",)),
    "wn_high": dict(model="WN", groups=("high",)),
    "pn_low": dict(model="PN", groups=("low",)),
    "pn_high": dict(model="PN", groups=("high",)),
}


def _seed(args, fallback=None):
    return args.seed if args.seed is not None else fallback


# ----------------------------------------------------------------------
def cmd_simulate(args):
    raw = io.load_toml(args.config)
    unknown = set(raw) - {"model", "truth", "grid", "split"}
    if unknown:
        raise ConfigurationError(f"unknown keys in truth config: {', '.join(sorted(unknown))}")
    model = raw.get("model")
    truth = dict(raw.get("truth", {}))
    grid = dict(raw.get("grid", {}))
    corr = GneitingParams(*(truth.pop(k) for k in CORR_NAMES)) if all(k in truth for k in CORR_NAMES) else None
    if corr is None:
        raise ConfigurationError(f"truth needs all of {', '.join(CORR_NAMES)}")
    rng = np.random.default_rng(args.seed)
    n_sites, n_times = int(grid.get("n_sites", 20)), int(grid.get("n_times", 12))
    extent = float(grid.get("extent_km", 10.0))
    sites = rng.uniform(0.0, extent, size=(n_sites, 2))
    points = np.array([[x, y, t] for t in range(1, n_times + 1) for x, y in sites], dtype=float)
    sim_seed = int(rng.integers(2**63))
    try:
        if model == "WN":
            angles, _ = simulate_wn(points, WnParams(truth.pop("mu"), truth.pop("sigma2"), truth.pop("nugget"), corr), sim_seed)
        elif model == "PN":
            pars = PnParams((truth.pop("mu1"), truth.pop("mu2")), truth.pop("sigma2"), truth.pop("rho"), truth.pop("nugget"), corr)
            angles, _ = simulate_pn(points, pars, sim_seed)
        else:
            raise ConfigurationError("simulate supports model WN or PN")
    except KeyError as exc:
        raise ConfigurationError(f"truth is missing {exc.args[0]}") from None
    if truth:
        raise ConfigurationError(f"unknown truth keys: {', '.join(sorted(truth))}")
    data = Dataset(points, angles, np.tile(np.arange(n_sites), n_times))
    chash = io.config_hash({"config": raw, "seed": args.seed})
    if args.validation_out:
        split = SplitSpec(**raw.get("split", {}))
        est, val = split_points(points, split, rng)
        io.write_dataset(args.out, data.subset(est), chash)
        io.write_dataset(args.validation_out, data.subset(val), chash)
    else:
        io.write_dataset(args.out, data, chash)


def cmd_fit(args):
    cfg = io.load_run_config(args.config)
    if args.iterations is not None:
        cfg.mcmc = McmcConfig(args.iterations, args.burn_in if args.burn_in is not None else args.iterations // 2, cfg.mcmc.thin, cfg.mcmc.adapt, cfg.mcmc.target_accept, cfg.mcmc.k_max)
    data = io.load_dataset(args.data)
    seed = _seed(args, cfg.seed)
    if cfg.model == "WN":
        chain = fit_wn(data, cfg.priors, cfg.mcmc, seed)
    elif cfg.model == "PN":
        chain = fit_pn(data, cfg.priors, cfg.mcmc, seed)
    else:
        chain, _ = fit_variant(data, cfg.model, cfg.priors, cfg.mcmc, seed, cfg.factors, cfg.covariates)
    chash = io.config_hash({"config": cfg.raw, "seed": seed, "mcmc": cfg.mcmc.__dict__, "data": Path(args.data).read_text()})
    io.save_chain(args.out, chain, chash, save_latent=args.save_latent)


def _predict(chain, data, targets, seed, max_draws):
    if chain.model == "WN":
        return krige_wn(chain, data, targets.points, seed, max_draws)
    if chain.model == "PN":
        return krige_pn(chain, data, targets.points, seed, max_draws)
    info = chain.info
    design = DesignInfo.from_dataset(data, info.get("factors", ()), info.get("covariates", ()), tuple(tuple(l) for l in info.get("levels", ())))
    return krige_variant(chain, data, design, targets, seed, max_draws)


def cmd_predict(args):
    chain = io.load_chain(args.chain)
    if chain.latent is None:
        raise ConfigurationError("chain was saved without latent states; refit with --save-latent")
    data = io.load_dataset(args.data)
    targets = io.load_dataset(args.targets, require_angles=False)
    pred = _predict(chain, data, targets, args.seed, args.max_draws)
    chash = io.config_hash({"chain": io.comment_hash(io.read_csv(args.chain)[0]), "seed": args.seed, "targets": Path(args.targets).read_text()})
    out = Path(args.out)
    m = pred.draws.shape[1]
    io.write_csv(out.with_name(out.name + "_draws.csv"), [f"target_{j}" for j in range(m)], [[io.fmt(v) for v in row] for row in pred.draws], chash)
    rows = []
    cvar = pred.circular_variance
    for j in range(m):
        x, y, t = pred.targets[j]
        rows.append([targets.site_id[j], io.fmt(x), io.fmt(y), int(t), io.fmt(pred.mean_direction[j]), io.fmt(pred.arc_lower[j]), io.fmt(pred.arc_upper[j]), io.fmt(cvar[j])])
    io.write_csv(
        out.with_name(out.name + "_summary.csv"),
        ["site_id", "x_km", "y_km", "t", "mean_direction", "arc_lower", "arc_upper", "circular_variance"],
        rows, chash,
    )


def _read_summary(path):
    _, header, rows = io.read_csv(path)
    if "mean_direction" not in header and "theta_rad" in header:
        # a dataset file scores as a point forecast
        header = ["mean_direction" if h == "theta_rad" else h for h in header]
    need = ("x_km", "y_km", "t", "mean_direction")
    missing = [c for c in need if c not in header]
    if missing:
        raise ConfigurationError(f"{path}: missing columns: {', '.join(missing)}")
    col = {h: i for i, h in enumerate(header)}
    try:
        pts = np.array([[float(r[col[c]]) for c in ("x_km", "y_km", "t")] for _, r in rows]).reshape(-1, 3)
        mean = np.array([float(r[col["mean_direction"]]) for _, r in rows])
    except ValueError as exc:
        raise ConfigurationError(f"{path}: {exc}") from None
    return pts, mean


def cmd_score(args):
    pts, mean = _read_summary(args.predictions)
    hold = io.load_dataset(args.holdout)
    if len(hold) != len(mean) or not np.allclose(hold.points, pts):
        raise ConfigurationError("holdout rows do not match the prediction targets")
    draws = None
    if args.draws:
        _, header, rows = io.read_csv(args.draws)
        draws = np.array([[float(v) for v in r] for _, r in rows]).reshape(len(rows), len(header))
        if draws.shape[1] != len(mean):
            raise ConfigurationError("draws do not match the prediction targets")
    if args.window_column:
        col = args.window_column
        if col in hold.factors:
            windows = hold.factors[col]
        elif col in hold.covariates:
            windows = np.array([format(v, "g") for v in hold.covariates[col]])
        else:
            raise ConfigurationError(f"holdout has no column {col!r}")
    else:
        windows = np.full(len(hold), "all")
    crps, dist = {}, {}
    for w in dict.fromkeys(windows.tolist()):
        idx = np.flatnonzero(windows == w)
        dist[w] = circ_dist(mean[idx], hold.angles[idx])
        if draws is not None:
            sub = PredictiveSamples(pts[idx], draws[:, idx], mean[idx], mean[idx], mean[idx])
            crps[w] = crps_targets(sub, hold.angles[idx])
        else:
            crps[w] = np.full(idx.size, math.nan)
    report = ScoreReport(crps, dist)
    chash = io.config_hash({"predictions": Path(args.predictions).read_text(), "holdout": Path(args.holdout).read_text()})
    rows = [[w, io.fmt(c), io.fmt(a), n] for w, c, a, n in report.rows()]
    io.write_csv(args.out, ["window", "crps", "ape", "n_targets"], rows, chash)


def cmd_study(args):
    if args.design not in STUDY_DESIGNS:
        raise ConfigurationError(f"unknown design {args.design!r}; choose from {', '.join(STUDY_DESIGNS)}")
    design = StudyDesign(**STUDY_DESIGNS[args.design], seed=_seed(args, 2024))
    iterations = args.iterations or 4000
    burn = args.burn_in if args.burn_in is not None else iterations // 2
    mcmc = McmcConfig(iterations, burn, args.thin)
    workers = args.workers if args.workers is not None else default_workers()
    rows = run_study(generate_study(design), mcmc, workers)
    chash = io.config_hash({"design": args.design, "seed": design.seed, "mcmc": mcmc.__dict__})

    def cell(v):
        return io.fmt(v) if isinstance(v, float) else v

    io.write_csv(args.out, RESULT_COLUMNS, [[cell(r[k]) for k in RESULT_COLUMNS] for r in rows], chash)


def cmd_summarize(args):
    chain = io.load_chain(args.chain)
    print(format_summary(summarize(chain, level=args.level), digits=3))


# ----------------------------------------------------------------------
def build_parser():
    p = argparse.ArgumentParser(prog="circgp", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate a dataset from a truth configuration")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--validation-out", help="also split off validation rows into this file")
    s.add_argument("--seed", type=int, required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("fit", help="run the sampler and write a chain file")
    s.add_argument("--config", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--iterations", type=int, help="override the configured iteration count")
    s.add_argument("--burn-in", type=int)
    s.add_argument("--save-latent", action="store_true", help="store winding numbers or radii (needed by predict)")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("predict", help="predictive draws and summaries at target points")
    s.add_argument("--chain", required=True)
    s.add_argument("--data", required=True, help="dataset the chain was fitted to")
    s.add_argument("--targets", required=True)
    s.add_argument("--out", required=True, help="output prefix; writes <out>_draws.csv and <out>_summary.csv")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--max-draws", type=int)
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("score", help="APE and CRPS of predictions against held-out angles")
    s.add_argument("--predictions", required=True, help="prediction summary CSV")
    s.add_argument("--draws", help="prediction draws CSV (needed for CRPS)")
    s.add_argument("--holdout", required=True)
    s.add_argument("--window-column")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_score)

    s = sub.add_parser("study", help="run the simulation study")
    s.add_argument("--design", default="wn_full")
    s.add_argument("--workers", type=int, help="default from CIRCGP_WORKERS, else 1")
    s.add_argument("--iterations", type=int)
    s.add_argument("--burn-in", type=int)
    s.add_argument("--thin", type=int, default=2)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_study)

    s = sub.add_parser("summarize", help="print point estimates and credible intervals")
    s.add_argument("--chain", required=True)
    s.add_argument("--level", type=float, default=0.95)
    s.set_defaults(func=cmd_summarize)
    return p


def _classify(exc) -> int:
    if isinstance(exc, (np.linalg.LinAlgError, InitializationError, ArithmeticError)):
        return EXIT_NUMERIC
    if isinstance(exc, (ValueError, KeyError, OSError, TypeError)):
        return EXIT_INVALID
    return 1


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        args.func(args)
    except Exception as exc:  # noqa: BLE001 - every failure becomes one record
        code = _classify(exc)
        if code == 1:
            raise
        record = {"status": "error", "exit_code": code, "command": args.command, "type": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record), file=sys.stderr)
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
