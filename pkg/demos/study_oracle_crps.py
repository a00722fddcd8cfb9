"""CRPS of the exact predictive law on the WN study datasets.

Regenerates the 48 study datasets and, for each, predicts the validation
points from the true parameters and the true latent process at the
estimation points. No fitting is involved, so the scores show how much of
the CRPS variation across correlation settings is a property of the
datasets themselves. Pass a results CSV from ``circgp study`` to compare
with fitted scores.

    python demos/study_oracle_crps.py [study.csv]
"""

import statistics
import sys

import numpy as np

from circgp import io
from circgp.circular import TWO_PI
from circgp.covariance import CORR_NAMES, GneitingParams
from circgp.dataset import Dataset
from circgp.mcmc import Chain
from circgp.scoring import score_windows
from circgp.simstudy import StudyDesign, split_points
from circgp.wrapped import WnParams, krige_wn, simulate_wn

N_DRAWS = 2000


def oracle_scores(design: StudyDesign):
    """Per-dataset oracle CRPS in grid order; replays the study's seeding."""
    scores = []
    for i, t in enumerate(design.truths()):
        rng = np.random.default_rng(design.seed + i)
        sites = rng.uniform(0.0, 10.0, size=(design.n_sites, 2))
        pts = np.array([[x, y, tt] for tt in range(1, design.n_times + 1) for x, y in sites], dtype=float)
        corr = GneitingParams(*(t[k] for k in CORR_NAMES))
        x, y = simulate_wn(pts, WnParams(t["mu"], t["sigma2"], t["nugget"], corr), rng.integers(2**63))
        est, val = split_points(pts, design.split, rng)
        K = np.rint((y[est] - x[est]) / TWO_PI).astype(np.int64)
        values = {k: t[k] for k in ("mu", "sigma2", "nugget", *CORR_NAMES)}
        chain = Chain("WN", {k: np.full(N_DRAWS, float(v)) for k, v in values.items()}, np.tile(K, (N_DRAWS, 1)), ("mu",))
        pred = krige_wn(chain, Dataset(pts[est], x[est]), pts[val], seed=1)
        scores.append((t, score_windows({"v": pred}, {"v": x[val]}).mean_crps))
    return scores


def main(study_csv=None):
    design = StudyDesign("WN")
    scores = oracle_scores(design)
    fitted = None
    if study_csv:
        _, header, rows = io.read_csv(study_csv)
        col = {h: i for i, h in enumerate(header)}
        fitted = {int(r[col["seed"]]): float(r[col["mean_crps"]]) for _, r in rows}
    means = {}
    for group in ("low", "high"):
        v = [s for t, s in scores if t["variance_group"] == group]
        means[group] = statistics.mean(v)
        line = f"{group:>5}: oracle mean {means[group]:.4f}, range {max(v) - min(v):.4f}, sd {statistics.stdev(v):.4f}"
        if fitted:
            f = [fitted[design.seed + i] for i, (t, _) in enumerate(scores) if t["variance_group"] == group]
            line += f" | fitted mean {statistics.mean(f):.4f}, range {max(f) - min(f):.4f}, correlation {np.corrcoef(v, f)[0, 1]:.3f}"
        print(line)
        for key in ("a", "alpha", "beta", "gamma"):
            by = {}
            for t, s in scores:
                if t["variance_group"] == group:
                    by.setdefault(t[key], []).append(s)
            print(f"        by {key:<5} " + ", ".join(f"{k:g}: {statistics.mean(x):.4f}" for k, x in sorted(by.items())))
    print(f"gap between group means {means['high'] - means['low']:.4f}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else None)
