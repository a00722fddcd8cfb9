"""Observed circular data over space-time points."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circular import wrap
from .covariance import as_points
from .errors import CircularDomainError


@dataclass
class Dataset:
    """Angles observed at space-time points.

    Parameters
    ----------
    points : (n, 3) array
        Columns ``x_km, y_km, t``.
    angles : (n,) array
        Observed directions; wrapped onto ``[0, 2*pi)`` on construction.
    site_id : (n,) array, optional
    covariates : dict
        Continuous covariate name -> ``(n,)`` float array.
    factors : dict
        Categorical covariate name -> ``(n,)`` array of level labels.
    """

    points: np.ndarray
    angles: np.ndarray
    site_id: np.ndarray | None = None
    covariates: dict = field(default_factory=dict)
    factors: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = as_points(self.points)
        self.angles = np.atleast_1d(wrap(np.asarray(self.angles, dtype=float)))
        n = self.points.shape[0]
        if self.angles.shape != (n,):
            raise CircularDomainError("angles and points disagree in length")
        if self.site_id is None:
            self.site_id = np.arange(n)
        self.site_id = np.asarray(self.site_id)
        self.covariates = {k: np.asarray(v, dtype=float) for k, v in self.covariates.items()}
        self.factors = {k: np.asarray(v).astype(str) for k, v in self.factors.items()}
        for k, v in {**self.covariates, **self.factors}.items():
            if v.shape != (n,):
                raise CircularDomainError(f"column {k} has the wrong length")

    def __len__(self):
        return self.points.shape[0]

    def subset(self, index) -> "Dataset":
        index = np.asarray(index)
        return Dataset(
            self.points[index],
            self.angles[index],
            self.site_id[index],
            {k: v[index] for k, v in self.covariates.items()},
            {k: v[index] for k, v in self.factors.items()},
        )
