"""Sampler plumbing shared by the wrapped and projected models."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .circular import circular_mean, credible_arc
from .errors import ConfigurationError


@dataclass
class McmcConfig:
    iterations: int = 10_000
    burn_in: int = 5_000
    thin: int = 2
    adapt: bool = True
    target_accept: float = 0.30
    k_max: int | None = None

    def __post_init__(self):
        if self.iterations <= 0 or self.burn_in < 0 or self.thin <= 0:
            raise ConfigurationError("iterations and thin must be positive, burn_in non-negative")
        if self.burn_in >= self.iterations:
            raise ConfigurationError("burn_in must be smaller than iterations")
        if self.k_max is not None and self.k_max < 1:
            raise ConfigurationError("k_max must be at least 1")

    @property
    def n_retained(self) -> int:
        return (self.iterations - self.burn_in) // self.thin

    def keep(self, it: int) -> bool:
        """Whether 0-based iteration ``it`` is stored."""
        j = it - self.burn_in
        return j >= 0 and j % self.thin == self.thin - 1 and j // self.thin < self.n_retained


class StepSize:
    """Random-walk proposal scale with Robbins-Monro tuning during burn-in."""

    def __init__(self, scale, target=0.30):
        self.log_scale = math.log(scale)
        self.target = target
        self._t = 0
        self.proposed = 0
        self.accepted = 0

    @property
    def scale(self) -> float:
        return math.exp(self.log_scale)

    def update(self, accepted: bool, adapting: bool):
        if adapting:
            self._t += 1
            self.log_scale += (float(accepted) - self.target) / self._t**0.6
        self.proposed += 1
        self.accepted += int(accepted)

    def reset_counts(self):
        self.proposed = 0
        self.accepted = 0

    @property
    def rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else math.nan


def metropolis_accept(log_ratio: float, rng) -> bool:
    return log_ratio >= 0 or math.log(rng.random()) < log_ratio


def slice_sample_positive(logf, x0, width, rng, max_steps=50):
    """One univariate slice-sampling update on ``(0, inf)``.

    Stepping-out followed by shrinkage (Neal, 2003). ``logf`` is the
    unnormalised log density; it is only evaluated at positive points.
    """
    log_y = logf(x0) + math.log(rng.random())
    left = x0 - width * rng.random()
    right = left + width
    left = max(left, 0.0)
    steps = 0
    while left > 0.0 and steps < max_steps and logf(left) > log_y:
        left = max(left - width, 0.0)
        steps += 1
    steps = 0
    while steps < max_steps and logf(right) > log_y:
        right += width
        steps += 1
    while True:
        x1 = left + (right - left) * rng.random()
        if x1 > 0.0 and logf(x1) > log_y:
            return x1
        if x1 < x0:
            left = x1
        else:
            right = x1
        if right - left < 1e-300:
            return x0


@dataclass
class Chain:
    """Retained posterior draws.

    ``params`` maps each scalar parameter name to its ``(n_draws,)`` array;
    ``latent`` holds winding numbers (WN family) or radii (PN family) per draw.
    """

    model: str
    params: dict
    latent: np.ndarray | None
    circular: tuple = ()
    acceptance: dict = field(default_factory=dict)
    config: McmcConfig | None = None
    seed: int | None = None
    info: dict = field(default_factory=dict)

    @property
    def names(self) -> list:
        return list(self.params)

    @property
    def n_draws(self) -> int:
        return len(next(iter(self.params.values()))) if self.params else 0

    def draw(self, i: int) -> dict:
        return {k: float(v[i]) for k, v in self.params.items()}

    def __getitem__(self, name):
        return self.params[name]


def run_chain(sampler, mcmc: McmcConfig, model: str, seed=None, info=None) -> Chain:
    """Drive ``sampler`` for ``mcmc.iterations`` sweeps and collect retained draws.

    Tuning runs only during burn-in; acceptance rates are counted afterwards.
    """
    n_keep = mcmc.n_retained
    store = {name: np.empty(n_keep) for name in sampler.names}
    latent = np.empty((n_keep, sampler.n), dtype=sampler.latent_dtype)
    j = 0
    for it in range(mcmc.iterations):
        if it == mcmc.burn_in:
            for st in sampler.steps.values():
                st.reset_counts()
        sampler.sweep(adapting=mcmc.adapt and it < mcmc.burn_in)
        if mcmc.keep(it):
            for name, v in sampler.values().items():
                store[name][j] = v
            latent[j] = sampler.latent()
            j += 1
    return Chain(
        model=model,
        params=store,
        latent=latent,
        circular=tuple(sampler.circular_names),
        acceptance={name: st.rate for name, st in sampler.steps.items()},
        config=mcmc,
        seed=seed,
        info=dict(info or {}),
    )


class ParameterSummary(NamedTuple):
    name: str
    estimate: float
    lower: float
    upper: float
    circular: bool


def summarize(chain: Chain, level=0.95, min_draws=100) -> list:
    """Point estimate and credible interval per parameter.

    Linear parameters get the posterior mean and an equal-tailed interval;
    circular parameters get the mean direction and the shortest arc
    containing ``level`` of the draws.
    """
    if chain.n_draws < min_draws:
        raise ValueError(f"summary needs at least {min_draws} draws, chain has {chain.n_draws}")
    tail = 100 * (1 - level) / 2
    rows = []
    for name, values in chain.params.items():
        values = np.asarray(values, dtype=float)
        if name in chain.circular:
            lo, hi = credible_arc(values, level)
            rows.append(ParameterSummary(name, circular_mean(values), lo, hi, True))
        else:
            lo, hi = np.percentile(values, [tail, 100 - tail])
            rows.append(ParameterSummary(name, float(values.mean()), float(lo), float(hi), False))
    return rows


def format_summary(rows, digits=3) -> str:
    """Plain-text PE / (CI) table."""
    width = max(len(r.name) for r in rows) + 2
    lines = [f"{'parameter':<{width}}{'PE':>12}  (CI)"]
    for r in rows:
        lines.append(
            f"{r.name:<{width}}{r.estimate:>12.{digits}f}  ({r.lower:.{digits}f}, {r.upper:.{digits}f})"
        )
    return "\n".join(lines)
