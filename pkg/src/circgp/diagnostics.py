"""Joint-distribution ("getting it right") checks for the samplers.

Two simulators target the same joint law of parameters and data. The
marginal-conditional one draws parameters from the prior. The
successive-conditional one alternates a data draw given the parameters with
one posterior sweep given the data. Moments of test functions must agree;
disagreement beyond Monte Carlo error points to a bug in some update.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np


def batch_means_se(x, n_batches=50) -> float:
    """Standard error of the mean of a correlated series by non-overlapping batch means."""
    x = np.asarray(x, dtype=float)
    size = x.size // n_batches
    if size < 2:
        raise ValueError("series too short for batch means")
    means = x[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(n_batches))


def moment_functions(values: dict, circular=()) -> dict:
    """First and second moments; circular parameters use cos and sin of one and two turns."""
    out = {}
    for name, v in values.items():
        v = np.asarray(v, dtype=float)
        if name in circular:
            out[f"cos({name})"] = np.cos(v)
            out[f"sin({name})"] = np.sin(v)
            out[f"cos(2*{name})"] = np.cos(2 * v)
            out[f"sin(2*{name})"] = np.sin(2 * v)
        else:
            out[name] = v
            out[f"{name}^2"] = v * v
    return out


class GewekeResult(NamedTuple):
    z: dict
    marginal_mean: dict
    successive_mean: dict
    n_sweeps: int

    @property
    def max_abs_z(self) -> float:
        return float(max(abs(v) for v in self.z.values()))

    def passed(self, threshold=4.0) -> bool:
        return self.max_abs_z < threshold


def geweke_test(sampler, n_sweeps=100_000, n_tune=2000, n_batches=50) -> GewekeResult:
    """Compare the two simulators for ``sampler``.

    ``sampler`` must provide ``draw_prior()`` (parameters only),
    ``simulate_data()``, ``sweep(adapting)``, ``values()``, ``names`` and
    ``circular_names``; its generator supplies all randomness.
    """
    names = sampler.names
    prior = {k: np.empty(n_sweeps) for k in names}
    for i in range(n_sweeps):
        sampler.draw_prior()
        for k, v in sampler.values().items():
            prior[k][i] = v

    # tune step sizes on the joint chain, then freeze them
    sampler.draw_prior()
    for _ in range(n_tune):
        sampler.simulate_data()
        sampler.sweep(adapting=True)
    chain = {k: np.empty(n_sweeps) for k in names}
    for i in range(n_sweeps):
        sampler.simulate_data()
        sampler.sweep(adapting=False)
        for k, v in sampler.values().items():
            chain[k][i] = v

    g_prior = moment_functions(prior, sampler.circular_names)
    g_chain = moment_functions(chain, sampler.circular_names)
    z, m_prior, m_chain = {}, {}, {}
    for key in g_prior:
        a, b = g_prior[key], g_chain[key]
        se2 = a.var(ddof=1) / a.size + batch_means_se(b, n_batches) ** 2
        m_prior[key], m_chain[key] = float(a.mean()), float(b.mean())
        z[key] = (m_prior[key] - m_chain[key]) / np.sqrt(se2) if se2 > 0 else 0.0
    return GewekeResult(z, m_prior, m_chain, n_sweeps)
