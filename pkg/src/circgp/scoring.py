"""Circular forecast verification: average prediction error and CRPS."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circular import circ_dist, circular_mean, credible_arc

# O(L^2) double sum; predictive samples are thinned to this many draws
MAX_CRPS_DRAWS = 2000


@dataclass
class PredictiveSamples:
    """Posterior predictive angle draws at target points.

    ``draws`` has shape ``(L, m)``: one row per retained posterior draw,
    one column per target.
    """

    targets: np.ndarray
    draws: np.ndarray
    mean_direction: np.ndarray
    arc_lower: np.ndarray
    arc_upper: np.ndarray

    @classmethod
    def from_draws(cls, targets, draws, level=0.95) -> "PredictiveSamples":
        draws = np.atleast_2d(np.asarray(draws, dtype=float))
        arcs = np.array([credible_arc(draws[:, j], level) for j in range(draws.shape[1])])
        arcs = arcs.reshape(-1, 2)
        return cls(
            targets=np.asarray(targets, dtype=float),
            draws=draws,
            mean_direction=np.atleast_1d(circular_mean(draws, axis=0)),
            arc_lower=arcs[:, 0],
            arc_upper=arcs[:, 1],
        )

    @property
    def circular_variance(self) -> np.ndarray:
        rbar = np.hypot(np.cos(self.draws).mean(0), np.sin(self.draws).mean(0))
        return 1.0 - rbar


def ape(predictions, holdout) -> float:
    """Average circular distance between predicted mean directions and held-out angles."""
    pred = np.asarray(predictions, dtype=float).ravel()
    obs = np.asarray(holdout, dtype=float).ravel()
    if pred.shape != obs.shape:
        raise ValueError(f"{pred.size} predictions for {obs.size} held-out values")
    if pred.size == 0:
        raise ValueError("APE of an empty validation set")
    return float(circ_dist(pred, obs).mean())


def _thin(draws, max_draws):
    if draws.shape[0] <= max_draws:
        return draws
    idx = np.linspace(0, draws.shape[0] - 1, max_draws).round().astype(int)
    return draws[idx]


def crps_mc(draws, holdout, max_draws=None) -> float:
    """Monte Carlo circular CRPS of a predictive sample against one held-out angle.

    ``mean d(draw, holdout) - mean_{l,j} d(draw_l, draw_j) / 2`` with the
    double sum over all ordered pairs, diagonal included.
    """
    theta = np.asarray(draws, dtype=float).ravel()
    if theta.size < 2:
        raise ValueError("CRPS needs at least two predictive draws")
    if max_draws is not None:
        theta = _thin(theta[:, None], max_draws)[:, 0]
    n = theta.size
    first = circ_dist(theta, holdout).mean()
    # sum_{l,j} cos(t_l - t_j) = |sum_l exp(i t_l)|^2
    resultant2 = np.cos(theta).sum() ** 2 + np.sin(theta).sum() ** 2
    spread = 1.0 - resultant2 / (n * n)
    return float(first - 0.5 * spread)


def crps_targets(samples: PredictiveSamples, holdout, max_draws=MAX_CRPS_DRAWS) -> np.ndarray:
    """Per-target CRPS for a block of predictive samples."""
    obs = np.asarray(holdout, dtype=float).ravel()
    draws = _thin(samples.draws, max_draws)
    if draws.shape[1] != obs.size:
        raise ValueError("holdout does not match the number of targets")
    return np.array([crps_mc(draws[:, j], obs[j]) for j in range(obs.size)])


@dataclass
class ScoreReport:
    """Per-target and aggregated scores, keyed by validation window."""

    crps: dict
    distance: dict

    @property
    def windows(self) -> list:
        return list(self.crps)

    def window_means(self) -> dict:
        return {
            w: {"crps": float(np.mean(self.crps[w])), "ape": float(np.mean(self.distance[w]))}
            for w in self.crps
        }

    @property
    def mean_crps(self) -> float:
        """Unweighted average of per-window means."""
        return float(np.mean([v["crps"] for v in self.window_means().values()]))

    @property
    def mean_ape(self) -> float:
        return float(np.mean([v["ape"] for v in self.window_means().values()]))

    @property
    def pooled_crps(self) -> float:
        return float(np.mean(np.concatenate([np.ravel(v) for v in self.crps.values()])))

    @property
    def pooled_ape(self) -> float:
        return float(np.mean(np.concatenate([np.ravel(v) for v in self.distance.values()])))

    def rows(self) -> list:
        """Long-format rows ``(window, crps, ape, n_targets)`` plus both averages."""
        out = [
            (w, v["crps"], v["ape"], len(self.crps[w])) for w, v in self.window_means().items()
        ]
        n_total = sum(len(v) for v in self.crps.values())
        out.append(("average", self.mean_crps, self.mean_ape, n_total))
        out.append(("pooled", self.pooled_crps, self.pooled_ape, n_total))
        return out


def score_windows(predictions: dict, holdouts: dict) -> ScoreReport:
    """Score predictive samples window by window.

    ``predictions`` maps a window key to ``PredictiveSamples``; ``holdouts``
    maps the same keys to held-out angle arrays.
    """
    missing = set(predictions) ^ set(holdouts)
    if missing:
        raise KeyError(f"windows without a counterpart: {sorted(map(str, missing))}")
    crps, dist = {}, {}
    for w in predictions:
        s = predictions[w]
        obs = np.asarray(holdouts[w], dtype=float).ravel()
        crps[w] = crps_targets(s, obs)
        dist[w] = circ_dist(s.mean_direction, obs)
    return ScoreReport(crps, dist)
