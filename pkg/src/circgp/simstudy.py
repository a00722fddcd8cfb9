"""Simulation study over the correlation-parameter grid.

Each dataset has 20 sites uniform on ``[0, 10]^2`` observed at times
``1..12``. Models are fitted to 170 points drawn from times 1 to 10 and
scored on the remaining 70 points.
"""

from __future__ import annotations

import itertools
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .covariance import CORR_NAMES, GneitingParams
from .dataset import Dataset
from .errors import ConfigurationError
from .mcmc import McmcConfig
from .priors import Beta, Gamma, InverseGamma, Normal, PriorConfig, TruncatedNormal, WrappedNormal
from .projected import PnParams, fit_pn, krige_pn, simulate_pn
from .scoring import score_windows
from .wrapped import WnParams, fit_wn, krige_wn, simulate_wn

AC_GRID = ((1.0, 0.2), (0.2, 1.0))
BETA_GRID = (0.0, 0.5, 0.9)
ALPHA_GRID = (0.5, 0.8)
GAMMA_GRID = (0.5, 0.8)

VARIANCE_GROUPS = {
    "WN": {
        "low": {"mu": math.pi, "sigma2": 0.1, "nugget": 0.01},
        "high": {"mu": math.pi, "sigma2": 1.0, "nugget": 0.1},
    },
    "PN": {
        "low": {"mu1": 2.5, "mu2": 2.5, "sigma2": 1.0, "rho": 0.0, "nugget": 0.01},
        "high": {"mu1": 0.85, "mu2": 0.85, "sigma2": 1.0, "rho": 0.0, "nugget": 0.1},
    },
}

RESULT_COLUMNS = (
    "model", "a", "c", "alpha", "beta", "gamma", "variance_group", "seed",
    "mean_crps", "mean_ape", "wall_seconds", "error",
)

# truth value -> prior
_CORR_PRIORS = {
    "a": {0.2: Gamma(2, 5), 1.0: Gamma(5, 4)},
    "c": {0.2: Gamma(2, 5), 1.0: Gamma(5, 4)},
    "alpha": {0.5: Beta(5, 5), 0.8: Beta(6, 1.5)},
    "beta": {0.0: Beta(1, 4), 0.5: Beta(5, 5), 0.9: Beta(6, 1.5)},
    "gamma": {0.5: Beta(5, 5), 0.8: Beta(6, 1.5)},
}
_VAR_PRIORS = {0.1: InverseGamma(4.5, 0.55), 1.0: InverseGamma(2.01, 4.01)}
_NUGGET_PRIORS = {0.01: InverseGamma(2.001, 0.03), 0.1: InverseGamma(4.5, 0.55)}
_PN_MEAN_PRIORS = {2.5: Normal(2.5, 5), 0.85: Normal(0.85, 5)}


def _pick(table, value, name):
    for k, prior in table.items():
        if math.isclose(value, k, rel_tol=1e-9, abs_tol=1e-12):
            return prior
    raise ConfigurationError(f"no truth-centred prior for {name} = {value}")


def truth_centered_priors(truth: dict) -> PriorConfig:
    """Priors centred on the simulation truth.

    ``truth`` holds ``model`` plus the parameter values of one grid cell.
    """
    model = truth["model"]
    pri = {name: _pick(_CORR_PRIORS[name], truth[name], name) for name in CORR_NAMES}
    if model == "WN":
        if not math.isclose(truth["mu"], math.pi):
            raise ConfigurationError(f"no truth-centred prior for mu = {truth['mu']}")
        pri["mu"] = WrappedNormal(math.pi, 5.0)
        pri["sigma2"] = _pick(_VAR_PRIORS, truth["sigma2"], "sigma2")
    elif model == "PN":
        pri["mu1"] = _pick(_PN_MEAN_PRIORS, truth["mu1"], "mu1")
        pri["mu2"] = _pick(_PN_MEAN_PRIORS, truth["mu2"], "mu2")
        if not math.isclose(truth["sigma2"], 1.0):
            raise ConfigurationError(f"no truth-centred prior for sigma2 = {truth['sigma2']}")
        pri["sigma2"] = InverseGamma(2.01, 4.01)
        if truth["rho"] != 0.0:
            raise ConfigurationError(f"no truth-centred prior for rho = {truth['rho']}")
        pri["rho"] = TruncatedNormal(0.0, 1.0)
    else:
        raise ConfigurationError(f"unknown model {model!r}")
    pri["nugget"] = _pick(_NUGGET_PRIORS, truth["nugget"], "nugget")
    return PriorConfig(pri)


@dataclass(frozen=True)
class SplitSpec:
    n_estimation: int = 170
    n_validation: int = 70
    max_estimation_time: int = 10


@dataclass(frozen=True)
class StudyDesign:
    """Grid of truths for one model family.

    ``seed`` is the base seed; dataset ``i`` in grid order uses ``seed + i``.
    """

    model: str = "WN"
    ac: tuple = AC_GRID
    beta: tuple = BETA_GRID
    alpha: tuple = ALPHA_GRID
    gamma: tuple = GAMMA_GRID
    groups: tuple = ("low", "high")
    n_sites: int = 20
    n_times: int = 12
    seed: int = 2024
    split: SplitSpec = field(default_factory=SplitSpec)

    def __post_init__(self):
        if self.model not in VARIANCE_GROUPS:
            raise ConfigurationError(f"unknown model {self.model!r}")
        for g in self.groups:
            if g not in VARIANCE_GROUPS[self.model]:
                raise ConfigurationError(f"unknown variance group {g!r}")
        if self.n_sites * self.n_times != self.split.n_estimation + self.split.n_validation:
            raise ConfigurationError("split sizes must add up to the number of points")

    def truths(self) -> list:
        out = []
        for group in self.groups:
            for (a, c), beta, alpha, gamma in itertools.product(self.ac, self.beta, self.alpha, self.gamma):
                t = {"model": self.model, "a": a, "c": c, "alpha": alpha, "beta": beta, "gamma": gamma, "variance_group": group}
                t.update(VARIANCE_GROUPS[self.model][group])
                out.append(t)
        return out

    def __len__(self):
        return len(self.truths())


@dataclass
class StudyCase:
    dataset: Dataset
    truth: dict
    estimation: np.ndarray
    validation: np.ndarray
    seed: int


def _corr_of(truth):
    return GneitingParams(*(truth[k] for k in CORR_NAMES))


def simulate_truth(points, truth, seed):
    corr = _corr_of(truth)
    if truth["model"] == "WN":
        angles, _ = simulate_wn(points, WnParams(truth["mu"], truth["sigma2"], truth["nugget"], corr), seed)
    else:
        params = PnParams((truth["mu1"], truth["mu2"]), truth["sigma2"], truth["rho"], truth["nugget"], corr)
        angles, _ = simulate_pn(points, params, seed)
    return angles


def split_points(points, split: SplitSpec, rng):
    early = np.flatnonzero(points[:, 2] <= split.max_estimation_time)
    if early.size < split.n_estimation:
        raise ConfigurationError("not enough early points for the estimation set")
    est = np.sort(rng.choice(early, split.n_estimation, replace=False))
    val = np.setdiff1d(np.arange(points.shape[0]), est)
    return est, val


def generate_study(design: StudyDesign) -> list:
    """One simulated dataset, truth and split per grid cell."""
    cases = []
    for i, truth in enumerate(design.truths()):
        seed = design.seed + i
        rng = np.random.default_rng(seed)
        sites = rng.uniform(0.0, 10.0, size=(design.n_sites, 2))
        times = np.arange(1, design.n_times + 1)
        points = np.array([[x, y, t] for t in times for x, y in sites], dtype=float)
        angles = simulate_truth(points, truth, rng.integers(2**63))
        est, val = split_points(points, design.split, rng)
        cases.append(StudyCase(Dataset(points, angles, np.tile(np.arange(design.n_sites), design.n_times)), truth, est, val, seed))
    return cases


def run_case(case: StudyCase, mcmc: McmcConfig) -> dict:
    """Fit, predict the validation points and score one dataset."""
    t = case.truth
    row = {k: t[k] for k in ("model", "a", "c", "alpha", "beta", "gamma", "variance_group")}
    row.update(seed=case.seed, mean_crps=math.nan, mean_ape=math.nan, error="")
    start = time.perf_counter()
    try:
        est = case.dataset.subset(case.estimation)
        val = case.dataset.subset(case.validation)
        priors = truth_centered_priors(t)
        if t["model"] == "WN":
            chain = fit_wn(est, priors, mcmc, seed=case.seed)
            pred = krige_wn(chain, est, val.points, seed=case.seed + 1)
        else:
            chain = fit_pn(est, priors, mcmc, seed=case.seed)
            pred = krige_pn(chain, est, val.points, seed=case.seed + 1)
        report = score_windows({"validation": pred}, {"validation": val.angles})
        row.update(mean_crps=report.mean_crps, mean_ape=report.mean_ape)
    except (ArithmeticError, ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}".replace("\n", " ")
    row["wall_seconds"] = time.perf_counter() - start
    return row


def _run_star(args):
    return run_case(*args)


def default_workers() -> int:
    """Worker count from ``CIRCGP_WORKERS``, else 1."""
    value = os.environ.get("CIRCGP_WORKERS", "1")
    try:
        n = int(value)
    except ValueError:
        raise ConfigurationError(f"CIRCGP_WORKERS must be an integer, got {value!r}") from None
    if n < 1:
        raise ConfigurationError("CIRCGP_WORKERS must be at least 1")
    return n


def run_study(cases, mcmc: McmcConfig | None = None, workers=None) -> list:
    """Result rows in case order; a failed fit yields NaN scores and an error message."""
    mcmc = mcmc or McmcConfig(iterations=4000, burn_in=2000, thin=2)
    workers = default_workers() if workers is None else int(workers)
    jobs = [(c, mcmc) for c in cases]
    if workers <= 1 or len(jobs) <= 1:
        return [run_case(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_star, jobs))


def group_summary(rows) -> dict:
    """Per variance group: mean, min and max of the per-dataset mean CRPS."""
    out = {}
    for g in sorted({r["variance_group"] for r in rows}):
        vals = np.array([r["mean_crps"] for r in rows if r["variance_group"] == g], dtype=float)
        vals = vals[np.isfinite(vals)]
        out[g] = {"mean": float(vals.mean()), "min": float(vals.min()), "max": float(vals.max()), "n": int(vals.size)}
    return out
