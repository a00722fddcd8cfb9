"""Covariate-driven means and variances for both process families.

Four variants layer on the base models:

* ``WNA`` / ``PNA``: cell-mean (ANOVA) parametrisation over up to two
  factors, with cell ``i * m2 + j`` for levels ``i`` and ``j``.
* ``WNR`` / ``PNR``: linear predictors ``H @ eta``. The wrapped variant maps
  the predictor to an angle with ``L(x) = 2 * atan(x)``; the projected
  variant uses it directly as the mean of each component.

Variances and nuggets vary by cell for the wrapped variants. The projected
variants share ``sigma2`` and ``rho`` and let only the nugget vary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circular import wrap
from .errors import ConfigurationError
from .projected import ProjectedStructure, fit_projected, krige_projected
from .wrapped import WrappedStructure, fit_wrapped, krige_wrapped

VARIANTS = ("WNA", "WNR", "PNA", "PNR")


def inverse_tan_link(x):
    """``2 * atan(x)`` wrapped onto ``[0, 2*pi)``."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("link argument must be finite")
    out = wrap(2.0 * np.arctan(x))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class DesignInfo:
    """Factor levels and continuous covariates for a set of observations.

    Parameters
    ----------
    factor_names : tuple of str
        Up to two categorical covariates.
    levels : tuple of tuple of str
        Level labels for each factor, in index order.
    level_index : (n, n_factors) int array
    covariate_names : tuple of str
    continuous : (n, n_covariates) float array
    """

    factor_names: tuple
    levels: tuple
    level_index: np.ndarray
    covariate_names: tuple = ()
    continuous: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def __post_init__(self):
        if len(self.factor_names) > 2:
            raise ConfigurationError("at most two factors are supported")
        idx = np.asarray(self.level_index, dtype=int).reshape(-1, len(self.factor_names))
        for f, lev in enumerate(self.levels):
            if idx.size and (idx[:, f].min() < 0 or idx[:, f].max() >= len(lev)):
                raise ConfigurationError(f"level index out of range for factor {self.factor_names[f]}")
        H = np.asarray(self.continuous, dtype=float).reshape(idx.shape[0], len(self.covariate_names))
        if not np.all(np.isfinite(H)):
            raise ConfigurationError("continuous covariates must be finite")
        object.__setattr__(self, "level_index", idx)
        object.__setattr__(self, "continuous", H)

    @classmethod
    def from_dataset(cls, dataset, factors=(), covariates=(), levels=None) -> "DesignInfo":
        """Build a design from dataset columns.

        ``levels`` fixes the level order (e.g. from a fitted design); by default
        levels are sorted labels.
        """
        factors, covariates = tuple(factors), tuple(covariates)
        for name in factors:
            if name not in dataset.factors:
                raise ConfigurationError(f"dataset has no factor column {name!r}")
        for name in covariates:
            if name not in dataset.covariates:
                raise ConfigurationError(f"dataset has no covariate column {name!r}")
        if levels is None:
            levels = tuple(tuple(sorted(set(dataset.factors[f]))) for f in factors)
        n = len(dataset)
        index = np.zeros((n, len(factors)), dtype=int)
        for f, name in enumerate(factors):
            lookup = {lev: i for i, lev in enumerate(levels[f])}
            try:
                index[:, f] = [lookup[v] for v in dataset.factors[name]]
            except KeyError as exc:
                raise ConfigurationError(f"unknown level {exc.args[0]!r} for factor {name}") from None
        H = np.column_stack([dataset.covariates[c] for c in covariates]) if covariates else np.zeros((n, 0))
        return cls(factors, tuple(levels), index, covariates, H)

    def with_rows(self, dataset) -> "DesignInfo":
        """The same factors, levels and covariates evaluated on another dataset."""
        return DesignInfo.from_dataset(dataset, self.factor_names, self.covariate_names, self.levels)

    @property
    def n(self) -> int:
        return self.level_index.shape[0]

    @property
    def n_cells(self) -> int:
        return int(np.prod([len(lev) for lev in self.levels])) if self.levels else 1

    @property
    def cells(self) -> np.ndarray:
        """Flattened cell index ``i * m2 + j`` per observation."""
        if not self.factor_names:
            return np.zeros(self.n, dtype=int)
        if len(self.factor_names) == 1:
            return self.level_index[:, 0].copy()
        m2 = len(self.levels[1])
        return self.level_index[:, 0] * m2 + self.level_index[:, 1]

    @property
    def cell_names(self) -> tuple:
        if not self.factor_names:
            return ("",)
        if len(self.factor_names) == 1:
            return tuple(self.levels[0])
        return tuple(f"{a}:{b}" for a in self.levels[0] for b in self.levels[1])

    def require_full(self):
        """Raise if any cell has no observations."""
        counts = np.bincount(self.cells, minlength=self.n_cells)
        empty = [self.cell_names[c] for c in np.flatnonzero(counts == 0)]
        if empty:
            raise ConfigurationError(f"no observations in cells: {', '.join(empty)}")

    def regression_matrix(self):
        """Per-cell intercept and slopes: column names and the ``(n, p)`` matrix."""
        cells, names = self.cells, self.cell_names
        cols, out = [], []
        for c, cname in enumerate(names):
            ind = (cells == c).astype(float)
            prefix = f"{cname}:" if cname else ""
            cols.append(f"{prefix}0")
            out.append(ind)
            for k, cov in enumerate(self.covariate_names):
                cols.append(f"{prefix}{cov}")
                out.append(ind * self.continuous[:, k])
        return tuple(cols), np.column_stack(out)


@dataclass(frozen=True)
class AnovaCoeffs:
    """Cell coefficients keyed by cell name.

    ``means`` holds an angle (wrapped family) or a ``(mu1, mu2)`` pair
    (projected family) per cell. For the projected family ``sigma2`` is a
    single shared value and ``nugget`` is per cell.
    """

    means: dict
    sigma2: dict | float
    nugget: dict


def _cell_of(design: DesignInfo, obs):
    return design.cell_names[int(design.cells[obs])]


def _lookup(table, cell, what):
    try:
        return table[cell]
    except KeyError:
        raise ConfigurationError(f"no {what} coefficient for cell {cell!r}") from None


def anova_mean(design: DesignInfo, coeffs: AnovaCoeffs, obs):
    """Mean of observation ``obs``: its cell's angle or component pair."""
    value = _lookup(coeffs.means, _cell_of(design, obs), "mean")
    if np.ndim(value) == 0:
        return float(wrap(value))
    return tuple(float(v) for v in value)


def anova_variance(design: DesignInfo, coeffs: AnovaCoeffs, obs):
    """``(sigma2, nugget)`` for observation ``obs``; a scalar ``sigma2`` is shared."""
    cell = _cell_of(design, obs)
    if isinstance(coeffs.sigma2, dict):
        sigma2 = _lookup(coeffs.sigma2, cell, "variance")
    else:
        sigma2 = coeffs.sigma2
    return float(sigma2), float(_lookup(coeffs.nugget, cell, "nugget"))


@dataclass(frozen=True)
class RegressionCoeffs:
    """``eta`` for the wrapped family, or ``(eta1, eta2)`` for the projected family."""

    eta: np.ndarray
    eta2: np.ndarray | None = None


def regression_mean(row, coeffs: RegressionCoeffs, kind="WNR"):
    """Mean implied by one design row ``H_i`` (intercept column included).

    ``WNR`` returns ``L(H_i @ eta)``; ``PNR`` returns ``(H_i @ eta1, H_i @ eta2)``.
    """
    row = np.asarray(row, dtype=float).ravel()
    eta = np.asarray(coeffs.eta, dtype=float).ravel()
    if row.size != eta.size:
        raise ValueError(f"design row has {row.size} columns, eta has {eta.size}")
    if kind == "WNR":
        return inverse_tan_link(row @ eta)
    if kind == "PNR":
        eta2 = np.asarray(coeffs.eta2, dtype=float).ravel()
        if eta2.size != row.size:
            raise ValueError("eta2 does not match the design row")
        return float(row @ eta), float(row @ eta2)
    raise ConfigurationError(f"unknown regression kind {kind!r}")


# ----------------------------------------------------------------------
def variant_structure(variant: str, design: DesignInfo):
    """Sampler structure for a model variant over ``design``."""
    if variant not in VARIANTS:
        raise ConfigurationError(f"unknown variant {variant!r}; choose from {', '.join(VARIANTS)}")
    design.require_full()
    cells, names = design.cells, design.cell_names
    if variant in ("WNR", "PNR") and not design.covariate_names:
        raise ConfigurationError(f"{variant} needs at least one continuous covariate")
    if variant == "WNA":
        return WrappedStructure(cells, names, cells, names)
    if variant == "WNR":
        cols, H = design.regression_matrix()
        return WrappedStructure(None, (), cells, names, H=H, coef_names=cols)
    if variant == "PNA":
        H = np.eye(design.n_cells)[cells]
        return ProjectedStructure(H, names, cells, names, ("mu1", "mu2"))
    cols, H = design.regression_matrix()
    return ProjectedStructure(H, cols, cells, names, ("eta1", "eta2"))


def fit_variant(dataset, variant, priors, mcmc=None, seed=None, factors=(), covariates=()):
    """Fit ``WNA``, ``WNR``, ``PNA`` or ``PNR`` to ``dataset``.

    Returns ``(chain, design)``; the design is needed to predict at new points.
    """
    design = DesignInfo.from_dataset(dataset, factors, covariates)
    st = variant_structure(variant, design)
    info = {"factors": list(design.factor_names), "covariates": list(design.covariate_names), "levels": [list(l) for l in design.levels]}
    if variant.startswith("WN"):
        chain = fit_wrapped(dataset, st, priors, mcmc, seed, variant, info)
    else:
        chain = fit_projected(dataset, st, priors, mcmc, seed, variant, info)
    return chain, design


def krige_variant(chain, dataset, design: DesignInfo, targets, seed=None, max_draws=None):
    """Predict at ``targets``, a dataset carrying the same factor and covariate columns."""
    variant = chain.model
    st = variant_structure(variant, design)
    t_design = design.with_rows(targets)
    # target rows only need their own cells; empty cells there are fine
    cells, names = t_design.cells, t_design.cell_names
    if variant == "WNA":
        tst = WrappedStructure(cells, names, cells, names)
    elif variant == "WNR":
        cols, H = t_design.regression_matrix()
        tst = WrappedStructure(None, (), cells, names, H=H, coef_names=cols)
    elif variant == "PNA":
        tst = ProjectedStructure(np.eye(t_design.n_cells)[cells], names, cells, names, ("mu1", "mu2"))
    else:
        cols, H = t_design.regression_matrix()
        tst = ProjectedStructure(H, cols, cells, names, ("eta1", "eta2"))
    if variant.startswith("WN"):
        return krige_wrapped(chain, dataset, targets.points, st, tst, seed, max_draws)
    return krige_projected(chain, dataset, targets.points, st, tst, seed, max_draws)
