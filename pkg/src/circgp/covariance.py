"""Gneiting non-separable space-time correlation and covariance assembly.

Point sets are ``(n, 3)`` float arrays with columns ``x_km, y_km, t``.
"""

from __future__ import annotations

from dataclasses import astuple, dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import lapack

from .errors import CircularDomainError, NotPositiveDefiniteError

CORR_NAMES = ("a", "c", "alpha", "beta", "gamma")


class SpaceTimePoint(NamedTuple):
    x: float
    y: float
    t: int


def as_points(points) -> np.ndarray:
    """Coerce a sequence of ``SpaceTimePoint`` or an ``(n, 3)`` array to a validated array."""
    arr = np.atleast_2d(np.asarray(points, dtype=float))
    if arr.size == 0:
        return arr.reshape(0, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise CircularDomainError(f"points must have shape (n, 3), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise CircularDomainError("point coordinates must be finite")
    t = arr[:, 2]
    if np.any(t < 0) or np.any(t != np.round(t)):
        raise CircularDomainError("time indices must be non-negative integers")
    return arr


@dataclass(frozen=True)
class GneitingParams:
    a: float
    c: float
    alpha: float
    beta: float
    gamma: float
    tau: float = 1.0

    def __post_init__(self):
        ok = (
            self.a >= 0
            and self.c >= 0
            and 0 < self.alpha <= 1
            and 0 < self.gamma <= 1
            and 0 <= self.beta <= 1
            and self.tau >= 1
        )
        if not ok:
            raise CircularDomainError(f"invalid Gneiting parameters {self}")

    def as_array(self) -> np.ndarray:
        """The inferred parameters ``(a, c, alpha, beta, gamma)``; tau is excluded."""
        return np.array(astuple(self)[:5])

    @classmethod
    def from_array(cls, values, tau=1.0) -> "GneitingParams":
        a, c, alpha, beta, gamma = (float(v) for v in values)
        return cls(a, c, alpha, beta, gamma, tau)


def _gneiting(h, u, a, c, alpha, beta, gamma, tau=1.0):
    # callers guarantee valid parameters; h, u >= 0
    temporal = a * np.power(u, 2.0 * alpha) + 1.0
    return np.exp(-c * np.power(h, 2.0 * gamma) / np.power(temporal, beta * gamma)) / np.power(
        temporal, tau
    )


def gneiting_corr(h_norm, u, params: GneitingParams):
    """Correlation at spatial distance ``h_norm`` (km) and time lag ``u``."""
    h = np.asarray(h_norm, dtype=float)
    if np.any(h < 0):
        raise CircularDomainError("spatial distance must be non-negative")
    u = np.abs(np.asarray(u, dtype=float))
    out = _gneiting(h, u, params.a, params.c, params.alpha, params.beta, params.gamma, params.tau)
    if np.ndim(out) == 0:
        return float(out)
    return out


def pairwise_lags(points_a, points_b):
    """Euclidean distances and absolute time lags between two point sets."""
    diff = points_a[:, None, :2] - points_b[None, :, :2]
    h = np.sqrt((diff * diff).sum(-1))
    u = np.abs(points_a[:, None, 2] - points_b[None, :, 2])
    return h, u


class LagTable:
    """Pairwise (distance, lag) table over a fixed point set.

    Correlations are evaluated once per distinct (h, u) pair and scattered
    back, which is much cheaper than elementwise evaluation on gridded
    space-time designs.
    """

    def __init__(self, points):
        self.points = as_points(points)
        n = self.points.shape[0]
        h, u = pairwise_lags(self.points, self.points)
        pairs = np.stack([h.ravel(), u.ravel()], axis=1)
        uniq, inverse = np.unique(pairs, axis=0, return_inverse=True)
        self.n = n
        self._h = uniq[:, 0]
        self._u = uniq[:, 1]
        self._inverse = inverse.reshape(-1)

    def correlation(self, corr) -> np.ndarray:
        """Correlation matrix for a ``GneitingParams`` or an ``(a, c, alpha, beta, gamma)`` vector."""
        if isinstance(corr, GneitingParams):
            vals = _gneiting(self._h, self._u, *astuple(corr))
        else:
            vals = _gneiting(self._h, self._u, *corr)
        return vals[self._inverse].reshape(self.n, self.n)


def cholesky(matrix) -> np.ndarray:
    """Lower Cholesky factor, without jitter.

    Raises NotPositiveDefiniteError carrying the failing leading-minor order.
    """
    L, info = lapack.dpotrf(matrix, lower=1, clean=1)
    if info > 0:
        raise NotPositiveDefiniteError(info)
    if info < 0:
        raise ValueError(f"illegal argument {-info} to dpotrf")
    return L


def _scaled(C, sigma2, nugget):
    n = C.shape[0]
    s2 = np.asarray(sigma2, dtype=float)
    if s2.ndim == 0:
        S = float(s2) * C
    else:
        sd = np.sqrt(s2)
        S = C * np.outer(sd, sd)
    S[np.diag_indices(n)] += np.broadcast_to(np.asarray(nugget, dtype=float), (n,))
    return S


def build_covariance(points, params: GneitingParams, sigma2, nugget=0.0, lags: LagTable | None = None):
    """Covariance ``sigma2 * Cor + diag(nugget)`` over a point set.

    ``sigma2`` and ``nugget`` may be scalars or per-point arrays. Varying
    ``sigma2`` uses ``sqrt(sigma2_i * sigma2_j)`` scaling off the diagonal.
    Positive definiteness is verified by a Cholesky factorization.
    """
    s2 = np.asarray(sigma2, dtype=float)
    ng = np.asarray(nugget, dtype=float)
    if np.any(s2 <= 0):
        raise CircularDomainError("sigma2 must be positive")
    if np.any(ng < 0):
        raise CircularDomainError("nugget must be non-negative")
    if lags is None:
        lags = LagTable(points)
    S = _scaled(lags.correlation(params), s2, ng)
    cholesky(S)
    return S


def cross_covariance(data_points, target, params: GneitingParams, sigma2=1.0):
    """Covariances between data points and one or more targets; no nugget term.

    Returns a vector for a single target and an ``(n, m)`` matrix otherwise.
    """
    pts = as_points(data_points)
    tgt = np.asarray(target, dtype=float)
    single = tgt.ndim == 1
    tgt = as_points(tgt)
    h, u = pairwise_lags(pts, tgt)
    out = np.asarray(sigma2, dtype=float) * _gneiting(h, u, *astuple(params))
    return out[:, 0] if single else out
