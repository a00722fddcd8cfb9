"""Circular arithmetic, wrapped and projected normal densities, summaries.

All angles are radians in ``[0, 2*pi)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import logsumexp, ndtr, ndtri

from .errors import CircularDomainError, UndefinedDirectionError

TWO_PI = 2.0 * np.pi

# resultant lengths below this give an undefined mean direction
UNDEFINED_RESULTANT = 1e-12


def wrap(y):
    """Map real values onto ``[0, 2*pi)``; accepts scalars or arrays."""
    arr = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise CircularDomainError("cannot wrap non-finite values")
    out = np.mod(arr, TWO_PI)
    # fmod rounding can return exactly 2*pi for tiny negative inputs
    out = np.where(out >= TWO_PI, 0.0, out) + 0.0
    if out.ndim == 0:
        return float(out)
    return out


def atan_star(c, s):
    """Direction of the vector ``(c, s)`` in ``[0, 2*pi)``.

    Piecewise definition::

        atan(s/c)            c > 0, s >= 0
        pi/2                 c = 0, s > 0
        atan(s/c) + pi       c < 0
        atan(s/c) + 2*pi     c >= 0, s < 0

    Raises UndefinedDirectionError when ``c == s == 0``.
    """
    c = np.asarray(c, dtype=float)
    s = np.asarray(s, dtype=float)
    c, s = np.broadcast_arrays(c, s)
    if np.any((c == 0) & (s == 0)):
        raise UndefinedDirectionError("atan_star is undefined at the origin")
    axis = c == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        base = np.arctan(s / np.where(axis, 1.0, c))
    out = np.select(
        [(c > 0) & (s >= 0), axis & (s > 0), axis & (s < 0), c < 0, (c > 0) & (s < 0)],
        [base, np.pi / 2, 1.5 * np.pi, base + np.pi, base + TWO_PI],
    )
    # c == 0 is handled on its own so a signed zero cannot flip the branch;
    # a tiny negative s can round up to exactly 2*pi; + 0.0 clears -0.0
    out = np.where(out >= TWO_PI, 0.0, out) + 0.0
    if out.ndim == 0:
        return float(out)
    return out


def circ_dist(alpha, beta):
    """Circular distance ``1 - cos(alpha - beta)``, in ``[0, 2]``."""
    out = 1.0 - np.cos(np.asarray(alpha, dtype=float) - np.asarray(beta, dtype=float))
    if np.ndim(out) == 0:
        return float(out)
    return out


class CircularSummary(NamedTuple):
    mean_direction: float
    mean_resultant_length: float
    circular_variance: float

    @property
    def defined(self) -> bool:
        return not math.isnan(self.mean_direction)


def circ_summary(angles) -> CircularSummary:
    """Mean direction, mean resultant length and circular variance.

    The mean direction is NaN when the resultant vanishes.
    """
    theta = np.asarray(angles, dtype=float).ravel()
    if theta.size == 0:
        raise CircularDomainError("circular summary of an empty sample")
    sc, ss = np.cos(theta).sum(), np.sin(theta).sum()
    rbar = min(math.hypot(sc, ss) / theta.size, 1.0)
    if rbar < UNDEFINED_RESULTANT:
        direction = math.nan
    else:
        direction = atan_star(sc, ss)
    return CircularSummary(direction, rbar, 1.0 - rbar)


def circular_mean(angles, axis=-1):
    """Vectorised mean direction along ``axis``; NaN where undefined."""
    theta = np.asarray(angles, dtype=float)
    sc = np.cos(theta).mean(axis=axis)
    ss = np.sin(theta).mean(axis=axis)
    out = np.mod(np.arctan2(ss, sc), TWO_PI)
    out = np.where(out >= TWO_PI, 0.0, out)
    out = np.where(np.hypot(sc, ss) < UNDEFINED_RESULTANT, np.nan, out)
    if out.ndim == 0:
        return float(out)
    return out


def credible_arc(angles, level=0.95):
    """Shortest arc holding a fraction ``level`` of the sample.

    Returns ``(start, end)``; the arc runs counter-clockwise from ``start``
    and may cross zero, in which case ``end < start``.
    """
    theta = np.sort(wrap(np.asarray(angles, dtype=float).ravel()))
    n = theta.size
    if n == 0:
        raise CircularDomainError("credible arc of an empty sample")
    k = min(n, max(1, math.ceil(level * n)))
    ext = np.concatenate([theta, theta + TWO_PI])
    lengths = ext[np.arange(n) + k - 1] - theta
    i = int(np.argmin(lengths))
    return float(theta[i]), wrap(ext[i + k - 1])


def default_k_max(sigma2, tol=1e-8, floor=3):
    """Smallest truncation ``k`` with ``2*Phi(-2*pi*k/sigma) < tol`` (at least ``floor``)."""
    if sigma2 <= 0:
        raise CircularDomainError("sigma2 must be positive")
    sigma = math.sqrt(sigma2)
    # 2*Phi(-z) < tol  <=>  z > -Phi^{-1}(tol/2)
    z = -float(ndtri(tol / 2.0))
    k = math.floor(z * sigma / TWO_PI) + 1
    return max(int(floor), k)


def wn_logpdf(x, mu, sigma2, k_max=None):
    """Log of the truncated wrapped normal density."""
    if sigma2 <= 0:
        raise CircularDomainError("sigma2 must be positive")
    if k_max is None:
        k_max = default_k_max(sigma2)
    if k_max < 1:
        raise CircularDomainError("k_max must be at least 1")
    x = np.asarray(x, dtype=float)
    k = np.arange(-k_max, k_max + 1)
    d = x[..., None] + TWO_PI * k - mu
    logs = -0.5 * d * d / sigma2 - 0.5 * math.log(TWO_PI * sigma2)
    out = logsumexp(logs, axis=-1)
    if np.ndim(out) == 0:
        return float(out)
    return out


def wn_pdf(x, mu, sigma2, k_max=None):
    """Wrapped normal density ``sum_k N(x + 2*pi*k; mu, sigma2)``, ``|k| <= k_max``."""
    return np.exp(wn_logpdf(x, mu, sigma2, k_max))


@dataclass(frozen=True)
class ProjectedParams:
    """Bivariate normal parameters of a projected normal (second variance fixed to 1)."""

    mu1: float
    mu2: float
    sigma2_1: float
    rho: float

    def __post_init__(self):
        if not self.sigma2_1 > 0:
            raise CircularDomainError("sigma2_1 must be positive")
        if not -1.0 < self.rho < 1.0:
            raise CircularDomainError("rho must lie in (-1, 1)")

    @property
    def mean(self) -> np.ndarray:
        return np.array([self.mu1, self.mu2])

    @property
    def V(self) -> np.ndarray:
        off = math.sqrt(self.sigma2_1) * self.rho
        return np.array([[self.sigma2_1, off], [off, 1.0]])


def pn_joint_pdf(theta, r, params: ProjectedParams):
    """Joint density of angle and radius ``(theta, r)`` for a projected normal."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise CircularDomainError("radius must be positive")
    theta = np.asarray(theta, dtype=float)
    V = params.V
    det = V[0, 0] * V[1, 1] - V[0, 1] ** 2
    d1 = r * np.cos(theta) - params.mu1
    d2 = r * np.sin(theta) - params.mu2
    quad = (V[1, 1] * d1 * d1 - 2.0 * V[0, 1] * d1 * d2 + V[0, 0] * d2 * d2) / det
    out = np.exp(-0.5 * quad) * r / (TWO_PI * math.sqrt(det))
    if np.ndim(out) == 0:
        return float(out)
    return out


def pn_pdf(theta, params: ProjectedParams):
    """Marginal density of the angle of a projected normal (closed form)."""
    theta = np.asarray(theta, dtype=float)
    Vinv = np.linalg.inv(params.V)
    det = float(np.linalg.det(params.V))
    mu = params.mean
    u = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    A = np.einsum("...i,ij,...j->...", u, Vinv, u)
    B = u @ (Vinv @ mu)
    C = float(mu @ Vinv @ mu)
    D = B / np.sqrt(A)
    # D**2 <= C by Cauchy-Schwarz, so the exponent never overflows
    tail = D * ndtr(D) * math.sqrt(TWO_PI) * np.exp(0.5 * (D * D - C))
    out = (math.exp(-0.5 * C) + tail) / (TWO_PI * A * math.sqrt(det))
    if np.ndim(out) == 0:
        return float(out)
    return out
