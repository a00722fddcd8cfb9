"""Wrapped Gaussian space-time process.

The linear process ``Y = mu + eps`` has covariance
``sigma2 * Cor(h, u) + nugget * I`` with the Gneiting correlation, and the
observed angle is ``X = Y mod 2*pi``. Fitting augments the data with
winding numbers ``K`` so that ``Y = X + 2*pi*K``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, lapack, solve_triangular

from .circular import TWO_PI, circ_summary, default_k_max, wrap
from .covariance import (
    CORR_NAMES,
    GneitingParams,
    LagTable,
    _gneiting,
    as_points,
    build_covariance,
    cholesky,
    pairwise_lags,
)
from .errors import CircularDomainError, ConfigurationError, InitializationError
from .mcmc import Chain, McmcConfig, StepSize, metropolis_accept, run_chain, summarize
from .priors import PriorConfig
from .scoring import PredictiveSamples

_LOGIT_PARAMS = {"alpha", "beta", "gamma"}


def _label(base, cell):
    return base if cell == "" else f"{base}[{cell}]"


def _precision(L):
    Qi, info = lapack.dpotri(L, lower=1)
    if info != 0:
        raise np.linalg.LinAlgError("precision matrix could not be formed")
    return np.tril(Qi) + np.tril(Qi, -1).T


def _try_cholesky(S):
    L, info = lapack.dpotrf(S, lower=1, clean=1)
    return L if info == 0 else None


def _logdet(L):
    return 2.0 * float(np.log(np.diag(L)).sum())


def propose_corr(name, value, scale, rng):
    """Random-walk proposal on the log (a, c) or logit (alpha, beta, gamma) scale.

    Returns the proposed value and the log Jacobian ratio, or ``None`` if the
    proposal leaves the open parameter range.
    """
    z = scale * rng.standard_normal()
    if name in _LOGIT_PARAMS:
        lo = math.log(value) - math.log1p(-value)
        new = 1.0 / (1.0 + math.exp(-(lo + z)))
        if not 0.0 < new < 1.0:
            return None
        return new, math.log(new * (1 - new)) - math.log(value * (1 - value))
    new = value * math.exp(z)
    if not 0.0 < new < math.inf:
        return None
    return new, z


@dataclass(frozen=True)
class WnParams:
    mu: float
    sigma2: float
    nugget: float
    corr: GneitingParams

    def __post_init__(self):
        if not (self.sigma2 > 0 and self.nugget > 0):
            raise CircularDomainError("sigma2 and nugget must be positive")
        object.__setattr__(self, "mu", wrap(self.mu))


@dataclass(frozen=True)
class WrappedStructure:
    """How mean, variance and nugget vary over observations.

    Cell-mean models give each observation one circular mean from
    ``mean_cells``; regression models use ``2*atan(H @ eta)``. Variances and
    nuggets are indexed by ``var_cells``.
    """

    mean_cells: np.ndarray | None
    mean_cell_names: tuple
    var_cells: np.ndarray
    var_cell_names: tuple
    H: np.ndarray | None = None
    coef_names: tuple = ()

    @classmethod
    def constant(cls, n):
        zeros = np.zeros(n, dtype=int)
        return cls(zeros, ("",), zeros, ("",))

    @property
    def n(self) -> int:
        return len(self.var_cells)

    @property
    def regression(self) -> bool:
        return self.H is not None

    @property
    def mean_names(self) -> list:
        if self.regression:
            return [_label("eta", c) for c in self.coef_names]
        return [_label("mu", c) for c in self.mean_cell_names]

    @property
    def sigma2_names(self) -> list:
        return [_label("sigma2", c) for c in self.var_cell_names]

    @property
    def nugget_names(self) -> list:
        return [_label("nugget", c) for c in self.var_cell_names]

    @property
    def names(self) -> list:
        return self.mean_names + self.sigma2_names + self.nugget_names + list(CORR_NAMES)

    @property
    def circular_names(self) -> list:
        return [] if self.regression else self.mean_names

    def mean(self, coef):
        coef = np.asarray(coef, dtype=float)
        if self.regression:
            return 2.0 * np.arctan(self.H @ coef)
        return coef[self.mean_cells]

    def unpack(self, values: dict):
        """``(coef, sigma2, nugget, corr)`` arrays from a name -> value mapping."""
        get = lambda names: np.array([values[k] for k in names], dtype=float)  # noqa: E731
        return (
            get(self.mean_names),
            get(self.sigma2_names),
            get(self.nugget_names),
            get(CORR_NAMES),
        )

    def covariance(self, C, sigma2, nugget):
        if len(sigma2) == 1:
            S = sigma2[0] * C
            S[np.diag_indices_from(S)] += nugget[0]
            return S
        sd = np.sqrt(sigma2[self.var_cells])
        S = C * np.outer(sd, sd)
        S[np.diag_indices_from(S)] += nugget[self.var_cells]
        return S


class WrappedSampler:
    """Metropolis-within-Gibbs sampler for the wrapped process.

    One sweep updates, in order: every winding number by discrete Gibbs,
    the mean coefficients, the variances, the nuggets, and the five
    correlation parameters, each by random-walk Metropolis on a transformed
    scale.
    """

    latent_dtype = np.int64

    def __init__(self, points, angles, structure: WrappedStructure, priors: dict, k_max, rng, target_accept=0.30):
        self.lags = LagTable(points)
        self.n = self.lags.n
        self.x = wrap(np.asarray(angles, dtype=float)).copy()
        self.K = np.zeros(self.n, dtype=np.int64)
        self.structure = structure
        self.priors = priors
        self.k_max = int(k_max)
        self.k_grid = np.arange(-self.k_max, self.k_max + 1)
        self.rng = rng
        st = structure
        self.names = st.names
        self.circular_names = st.circular_names
        if not st.regression:
            self._cell_idx = [np.flatnonzero(st.mean_cells == c) for c in range(len(st.mean_cell_names))]
        self.steps = {}
        for name in st.mean_names:
            self.steps[name] = StepSize(0.2, target_accept)
        for name in st.sigma2_names + st.nugget_names:
            self.steps[name] = StepSize(0.3, target_accept)
        for name in CORR_NAMES:
            self.steps[name] = StepSize(0.5 if name in _LOGIT_PARAMS else 0.3, target_accept)

    # -- state ---------------------------------------------------------
    def set_state(self, coef, sigma2, nugget, corr, K):
        self.coef = np.array(coef, dtype=float)
        self.sigma2 = np.array(sigma2, dtype=float)
        self.nugget = np.array(nugget, dtype=float)
        self.corr = np.array(corr, dtype=float)
        self.K = np.array(K, dtype=np.int64)
        self._refresh()

    def _refresh(self):
        st = self.structure
        self.m = st.mean(self.coef)
        self.y = self.x + TWO_PI * self.K
        self.e = self.y - self.m
        self.C = self.lags.correlation(self.corr)
        self.S = st.covariance(self.C, self.sigma2, self.nugget)
        self.L = cholesky(self.S)
        self.logdet = _logdet(self.L)

    def values(self) -> dict:
        st = self.structure
        out = dict(zip(st.mean_names, self.coef.tolist()))
        out.update(zip(st.sigma2_names, self.sigma2.tolist()))
        out.update(zip(st.nugget_names, self.nugget.tolist()))
        out.update(zip(CORR_NAMES, self.corr.tolist()))
        return out

    def latent(self):
        return self.K.copy()

    def log_likelihood(self, L=None, logdet=None, e=None):
        """Gaussian log density of ``Y = X + 2*pi*K`` (additive constant dropped)."""
        L = self.L if L is None else L
        logdet = self.logdet if logdet is None else logdet
        e = self.e if e is None else e
        w = solve_triangular(L, e, lower=True, check_finite=False)
        return -0.5 * (logdet + float(w @ w))

    # -- updates -------------------------------------------------------
    def sweep(self, adapting=False):
        self._update_k()
        if self.structure.regression:
            self._update_eta(adapting)
        else:
            self._update_cell_means(adapting)
        self._update_variances(adapting)
        self._update_corr(adapting)

    def _update_k(self):
        Q = _precision(self.L)
        r = Q @ self.e
        qd = np.diag(Q).copy()
        u = self.rng.random(self.n)
        x, y, e, K = self.x, self.y, self.e, self.K
        shifts = TWO_PI * self.k_grid
        for i in range(self.n):
            q = qd[i]
            cond_mean = y[i] - r[i] / q
            d = x[i] + shifts - cond_mean
            logw = -0.5 * q * d * d
            w = np.exp(logw - logw.max())
            cum = np.cumsum(w)
            k_new = int(np.searchsorted(cum, u[i] * cum[-1], side="right")) - self.k_max
            if k_new != K[i]:
                delta = TWO_PI * (k_new - K[i])
                K[i] = k_new
                y[i] += delta
                e[i] += delta
                r += Q[:, i] * delta
        self.Q, self.r = Q, r

    def _update_cell_means(self, adapting):
        Q, r = self.Q, self.r
        for c, idx in enumerate(self._cell_idx):
            name = self.structure.mean_names[c]
            step = self.steps[name]
            prior = self.priors[name]
            old = self.coef[c]
            delta = step.scale * self.rng.standard_normal()
            total = old + delta
            n_wrap = math.floor(total / TWO_PI)
            new = total - TWO_PI * n_wrap
            if new >= TWO_PI:
                new -= TWO_PI
                n_wrap += 1
            # crossing zero relabels the winding numbers so Y - mu is unchanged
            shift = -n_wrap
            accepted = False
            if shift == 0 or np.all(np.abs(self.K[idx] + shift) <= self.k_max):
                qcol = Q[:, idx].sum(axis=1)
                dq = -2.0 * delta * r[idx].sum() + delta * delta * qcol[idx].sum()
                log_ratio = -0.5 * dq + prior.logpdf(new) - prior.logpdf(old)
                accepted = metropolis_accept(log_ratio, self.rng)
            if accepted:
                self.coef[c] = new
                if shift:
                    self.K[idx] += shift
                    self.y[idx] += TWO_PI * shift
                self.m[idx] = new
                self.e[idx] -= delta
                r -= delta * qcol
            step.update(accepted, adapting)

    def _update_eta(self, adapting):
        Q, H = self.Q, self.structure.H
        q_old = float(self.e @ self.r)
        for j, name in enumerate(self.structure.mean_names):
            step = self.steps[name]
            prior = self.priors[name]
            prop = self.coef.copy()
            prop[j] += step.scale * self.rng.standard_normal()
            m_new = 2.0 * np.arctan(H @ prop)
            e_new = self.y - m_new
            r_new = Q @ e_new
            q_new = float(e_new @ r_new)
            log_ratio = -0.5 * (q_new - q_old) + prior.logpdf(prop[j]) - prior.logpdf(self.coef[j])
            accepted = metropolis_accept(log_ratio, self.rng)
            if accepted:
                self.coef, self.m, self.e, self.r, q_old = prop, m_new, e_new, r_new, q_new
            step.update(accepted, adapting)

    def _mh_covariance(self, name, prior_pair, C, sigma2, nugget, log_jac, adapting, ll):
        # shared accept step for proposals that change the covariance
        S = self.structure.covariance(C, sigma2, nugget)
        L = _try_cholesky(S)
        accepted = False
        if L is not None:
            logdet = _logdet(L)
            ll_new = self.log_likelihood(L, logdet)
            log_ratio = ll_new - ll + prior_pair[1] - prior_pair[0] + log_jac
            accepted = metropolis_accept(log_ratio, self.rng)
        self.steps[name].update(accepted, adapting)
        if accepted:
            self.S, self.L, self.logdet = S, L, logdet
            return True, ll_new
        return False, ll

    def _update_variances(self, adapting):
        st = self.structure
        ll = self.log_likelihood()
        for kind, names in (("sigma2", st.sigma2_names), ("nugget", st.nugget_names)):
            for c, name in enumerate(names):
                current = getattr(self, kind)
                old = current[c]
                z = self.steps[name].scale * self.rng.standard_normal()
                new = old * math.exp(z)
                prop = current.copy()
                prop[c] = new
                prior = self.priors[name]
                pair = (prior.logpdf(old), prior.logpdf(new))
                if kind == "sigma2":
                    ok, ll = self._mh_covariance(name, pair, self.C, prop, self.nugget, z, adapting, ll)
                else:
                    ok, ll = self._mh_covariance(name, pair, self.C, self.sigma2, prop, z, adapting, ll)
                if ok:
                    setattr(self, kind, prop)

    def _update_corr(self, adapting):
        ll = self.log_likelihood()
        for j, name in enumerate(CORR_NAMES):
            proposal = propose_corr(name, self.corr[j], self.steps[name].scale, self.rng)
            if proposal is None:
                self.steps[name].update(False, adapting)
                continue
            new, log_jac = proposal
            prop = self.corr.copy()
            prop[j] = new
            prior = self.priors[name]
            C = self.lags.correlation(prop)
            pair = (prior.logpdf(self.corr[j]), prior.logpdf(new))
            ok, ll = self._mh_covariance(name, pair, C, self.sigma2, self.nugget, log_jac, adapting, ll)
            if ok:
                self.corr, self.C = prop, C

    # -- simulation (prior predictive checks) --------------------------
    def draw_prior(self):
        """Replace all parameters by a prior draw; the data are left alone."""
        st = self.structure
        self.coef = np.array([self.priors[k].sample(self.rng) for k in st.mean_names], dtype=float)
        self.sigma2 = np.array([self.priors[k].sample(self.rng) for k in st.sigma2_names], dtype=float)
        self.nugget = np.array([self.priors[k].sample(self.rng) for k in st.nugget_names], dtype=float)
        self.corr = np.array([self.priors[k].sample(self.rng) for k in CORR_NAMES], dtype=float)

    def simulate_data(self):
        """Redraw ``(X, K)`` from the model at the current parameters."""
        self._refresh()
        y = self.m + self.L @ self.rng.standard_normal(self.n)
        self.x = wrap(y)
        self.K = np.rint((y - self.x) / TWO_PI).astype(np.int64)
        self.y = self.x + TWO_PI * self.K
        self.e = self.y - self.m


# ----------------------------------------------------------------------
def simulate_wrapped(points, structure: WrappedStructure, values: dict, seed=None):
    """Simulate ``(angles, latent_y)`` for any wrapped structure."""
    rng = np.random.default_rng(seed)
    pts = as_points(points)
    coef, sigma2, nugget, corr = structure.unpack(values)
    C = LagTable(pts).correlation(corr)
    L = cholesky(structure.covariance(C, sigma2, nugget))
    y = structure.mean(coef) + L @ rng.standard_normal(pts.shape[0])
    return wrap(y), y


def simulate_wn(points, params: WnParams, seed=None):
    """Simulate angles and the linear process at the given points.

    Returns ``(angles, latent_y)``; deterministic for a fixed seed.
    """
    pts = as_points(points)
    if pts.shape[0] == 0:
        raise CircularDomainError("no points to simulate at")
    rng = np.random.default_rng(seed)
    S = build_covariance(pts, params.corr, params.sigma2, params.nugget)
    L = cholesky(S)
    y = params.mu + L @ rng.standard_normal(pts.shape[0])
    return wrap(y), y


def _init_state(angles, structure: WrappedStructure, priors: dict):
    st = structure
    overall = circ_summary(angles)
    mu0 = overall.mean_direction if overall.defined else math.pi
    if st.regression:
        centered = (mu0 + math.pi) % TWO_PI - math.pi
        target = math.tan(max(-1.5, min(1.5, centered / 2.0)))
        coef = np.linalg.lstsq(st.H, np.full(st.n, target), rcond=None)[0]
    else:
        coef = []
        for c in range(len(st.mean_cell_names)):
            sub = angles[st.mean_cells == c]
            s = circ_summary(sub) if sub.size else overall
            coef.append(s.mean_direction if s.defined else mu0)
        coef = np.array(coef)
    sigma2 = []
    for c in range(len(st.var_cell_names)):
        sub = angles[st.var_cells == c]
        rbar = circ_summary(sub).mean_resultant_length if sub.size else overall.mean_resultant_length
        sigma2.append(min(max(-2.0 * math.log(max(rbar, 1e-12)), 1e-2), 10.0))
    sigma2 = np.array(sigma2)
    nugget = 0.1 * sigma2
    corr = []
    for name in CORR_NAMES:
        v = float(priors[name].mean)
        if name in _LOGIT_PARAMS:
            v = min(max(v, 1e-3), 1 - 1e-3)
        corr.append(v)
    m = st.mean(coef)
    # winding numbers that put each Y closest to its initial mean
    K = np.rint((m - angles) / TWO_PI).astype(np.int64)
    return coef, sigma2, nugget, np.array(corr), K


def fit_wrapped(dataset, structure: WrappedStructure, priors, mcmc: McmcConfig | None = None, seed=None, model="WN", info=None) -> Chain:
    """Run the wrapped-process sampler for any mean/variance structure."""
    mcmc = mcmc or McmcConfig()
    pts = dataset.points
    if len({tuple(p) for p in pts}) < 2:
        raise ConfigurationError("at least two distinct space-time points are required")
    pri = priors.resolve(structure.names) if isinstance(priors, PriorConfig) else dict(priors)
    rng = np.random.default_rng(seed)
    coef, sigma2, nugget, corr, K = _init_state(dataset.angles, structure, pri)
    k_max = mcmc.k_max
    if k_max is None:
        # generous margin over the starting total variance
        k_max = default_k_max(4.0 * float(np.max(sigma2 + nugget)))
    K = np.clip(K, -k_max, k_max)
    sampler = WrappedSampler(pts, dataset.angles, structure, pri, k_max, rng, mcmc.target_accept)
    try:
        sampler.set_state(coef, sigma2, nugget, corr, K)
        ll = sampler.log_likelihood()
    except np.linalg.LinAlgError as exc:
        raise InitializationError(f"initial covariance is not positive definite: {exc}") from exc
    if not math.isfinite(ll):
        raise InitializationError("non-finite likelihood at the initial state; try a wider k_max")
    info = dict(info or {})
    info.update(k_max=k_max, family="wrapped")
    return run_chain(sampler, mcmc, model, seed=seed, info=info)


def fit_wn(dataset, priors, mcmc: McmcConfig | None = None, seed=None) -> Chain:
    """Fit the constant-mean wrapped normal model."""
    return fit_wrapped(dataset, WrappedStructure.constant(len(dataset)), priors, mcmc, seed, "WN")


# ----------------------------------------------------------------------
def conditional_moments(points, y, mean, sigma2, nugget, targets, target_mean, target_sigma2, target_nugget, corr):
    """Mean and variance of the linear process at targets given ``Y`` at data points.

    ``sigma2`` and ``nugget`` may be per-point arrays (geometric-mean scaling
    off the diagonal). Returns ``(M, V)`` arrays of length ``m``.
    """
    pts = as_points(points)
    tgt = as_points(targets)
    n = pts.shape[0]
    corr = np.asarray(corr, dtype=float)
    s2 = np.broadcast_to(np.asarray(sigma2, dtype=float), (n,))
    ts2 = np.broadcast_to(np.asarray(target_sigma2, dtype=float), (tgt.shape[0],))
    tng = np.broadcast_to(np.asarray(target_nugget, dtype=float), (tgt.shape[0],))
    h, u = pairwise_lags(pts, pts)
    S = _gneiting(h, u, *corr) * np.sqrt(np.outer(s2, s2))
    S[np.diag_indices(n)] += np.broadcast_to(np.asarray(nugget, dtype=float), (n,))
    h0, u0 = pairwise_lags(pts, tgt)
    S0 = _gneiting(h0, u0, *corr) * np.sqrt(np.outer(s2, ts2))
    return _conditional(cholesky(S), S0, np.asarray(y) - mean, target_mean, ts2 + tng)


def _conditional(L, S0, resid, target_mean, target_var):
    A = cho_solve((L, True), S0, check_finite=False)
    M = target_mean + A.T @ resid
    V = target_var - np.einsum("ij,ij->j", S0, A)
    return M, V


def krige_wrapped(chain: Chain, dataset, targets, structure: WrappedStructure, target_structure: WrappedStructure, seed=None, max_draws=None) -> PredictiveSamples:
    """Composition sampling of predictive angles at ``targets``.

    For each retained draw the linear data ``Y = X + 2*pi*K`` are rebuilt
    from the stored winding numbers and one value is drawn from the
    Gaussian conditional at every target.
    """
    tgt = as_points(targets)
    if tgt.shape[0] == 0:
        raise ValueError("no targets to predict")
    if chain.n_draws == 0:
        raise ValueError("empty chain")
    if chain.latent is None:
        raise ValueError("kriging needs the winding numbers stored with the chain")
    rng = np.random.default_rng(seed)
    pts = dataset.points
    lags = LagTable(pts)
    h0, u0 = pairwise_lags(pts, tgt)
    idx = np.arange(chain.n_draws)
    if max_draws is not None and chain.n_draws > max_draws:
        idx = np.linspace(0, chain.n_draws - 1, max_draws).round().astype(int)
    out = np.empty((idx.size, tgt.shape[0]))
    for row, l in enumerate(idx):
        coef, sigma2, nugget, corr = structure.unpack(chain.draw(l))
        y = dataset.angles + TWO_PI * chain.latent[l]
        resid = y - structure.mean(coef)
        S = structure.covariance(lags.correlation(corr), sigma2, nugget)
        sd = np.sqrt(sigma2[structure.var_cells])
        tsd2 = sigma2[target_structure.var_cells]
        S0 = _gneiting(h0, u0, *corr) * np.outer(sd, np.sqrt(tsd2))
        M, V = _conditional(
            cholesky(S), S0, resid, target_structure.mean(coef), tsd2 + nugget[target_structure.var_cells]
        )
        out[row] = M + np.sqrt(np.maximum(V, 0.0)) * rng.standard_normal(M.size)
    return PredictiveSamples.from_draws(tgt, wrap(out))


def krige_wn(chain: Chain, dataset, targets, seed=None, max_draws=None) -> PredictiveSamples:
    """Predictive angle samples at new space-time points under the WN model."""
    n, m = len(dataset), len(np.atleast_2d(targets))
    return krige_wrapped(
        chain, dataset, targets, WrappedStructure.constant(n), WrappedStructure.constant(m), seed, max_draws
    )


summarize_wn = summarize
