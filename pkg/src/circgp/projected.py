"""Projected Gaussian space-time process.

A bivariate linear process ``Z = (Z1, Z2)`` has cross covariance
``Cor(h, u) * V + nugget * I`` with ``V = [[sigma2, rho*sigma], [rho*sigma, 1]]``,
and the observed angle is the direction of ``Z``. Fitting augments the data
with radii ``R = |Z|``. Internally the 2n-vector is interleaved as
``[Z1_1, Z2_1, Z1_2, Z2_2, ...]`` so that its covariance is ``kron(C, V)``
plus the nugget diagonal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .circular import ProjectedParams, atan_star, wrap
from .covariance import CORR_NAMES, LagTable, _gneiting, as_points, cholesky, pairwise_lags
from .errors import CircularDomainError, ConfigurationError, InitializationError
from .mcmc import Chain, McmcConfig, StepSize, metropolis_accept, run_chain, slice_sample_positive, summarize
from .priors import Normal, PriorConfig
from .scoring import PredictiveSamples
from .wrapped import _LOGIT_PARAMS, _label, _logdet, _precision, _try_cholesky, propose_corr


def v_matrix(sigma2, rho):
    off = math.sqrt(sigma2) * rho
    return np.array([[sigma2, off], [off, 1.0]])


@dataclass(frozen=True)
class PnParams:
    mu: tuple
    proj_sigma2: float
    rho: float
    nugget: float
    corr: object

    def __post_init__(self):
        ProjectedParams(self.mu[0], self.mu[1], self.proj_sigma2, self.rho)
        if not self.nugget > 0:
            raise CircularDomainError("nugget must be positive")

    @property
    def proj(self) -> ProjectedParams:
        return ProjectedParams(self.mu[0], self.mu[1], self.proj_sigma2, self.rho)

    @property
    def V(self) -> np.ndarray:
        return v_matrix(self.proj_sigma2, self.rho)


@dataclass(frozen=True)
class ProjectedStructure:
    """Linear mean ``Z_l = H @ eta_l`` and nugget cells for the projected process.

    The constant model uses a single column of ones; ANOVA models use cell
    indicators; regression models use per-cell intercept and slope columns.
    ``sigma2`` and ``rho`` are always shared.
    """

    H: np.ndarray
    coef_names: tuple
    var_cells: np.ndarray
    var_cell_names: tuple
    mean_base: tuple = ("mu1", "mu2")

    @classmethod
    def constant(cls, n):
        return cls(np.ones((n, 1)), ("",), np.zeros(n, dtype=int), ("",))

    @property
    def n(self) -> int:
        return self.H.shape[0]

    @property
    def p(self) -> int:
        return self.H.shape[1]

    @property
    def mean_names(self) -> list:
        return [_label(b, c) for b in self.mean_base for c in self.coef_names]

    @property
    def nugget_names(self) -> list:
        return [_label("nugget", c) for c in self.var_cell_names]

    @property
    def names(self) -> list:
        return self.mean_names + ["sigma2", "rho"] + self.nugget_names + list(CORR_NAMES)

    def design(self) -> np.ndarray:
        """``(2n, 2p)`` design matrix for the interleaved vector."""
        D = np.zeros((2 * self.n, 2 * self.p))
        D[0::2, : self.p] = self.H
        D[1::2, self.p :] = self.H
        return D

    def mean(self, coef) -> np.ndarray:
        """``(n, 2)`` mean of ``(Z1, Z2)``."""
        coef = np.asarray(coef, dtype=float)
        return np.column_stack([self.H @ coef[: self.p], self.H @ coef[self.p :]])

    def unpack(self, values: dict):
        get = lambda names: np.array([values[k] for k in names], dtype=float)  # noqa: E731
        return (
            get(self.mean_names),
            values["sigma2"],
            values["rho"],
            get(self.nugget_names),
            get(CORR_NAMES),
        )

    def covariance(self, C, sigma2, rho, nugget):
        S = np.kron(C, v_matrix(sigma2, rho))
        S[np.diag_indices_from(S)] += np.repeat(np.asarray(nugget)[self.var_cells], 2)
        return S


class ProjectedSampler:
    """Metropolis-within-Gibbs sampler for the projected process.

    A sweep slice-samples every radius, draws all mean coefficients jointly
    from their normal full conditional, then updates ``sigma2`` (log scale),
    ``rho`` (Fisher z scale), the nuggets (log scale) and the correlation
    parameters by random-walk Metropolis.
    """

    latent_dtype = np.float64
    circular_names = ()

    def __init__(self, points, angles, structure: ProjectedStructure, priors: dict, rng, target_accept=0.30):
        self.lags = LagTable(points)
        self.n = self.lags.n
        self.theta = wrap(np.asarray(angles, dtype=float)).copy()
        self.u = np.column_stack([np.cos(self.theta), np.sin(self.theta)]).ravel()
        self.R = np.ones(self.n)
        self.structure = structure
        self.D = structure.design()
        self.priors = priors
        self.rng = rng
        self.names = structure.names
        for name in structure.mean_names:
            if not isinstance(priors[name], Normal):
                raise ConfigurationError(f"mean coefficient {name} needs a normal prior")
        self._prior_mean = np.array([priors[k].mean for k in structure.mean_names])
        self._prior_prec = np.array([1.0 / priors[k].var for k in structure.mean_names])
        self.steps = {"sigma2": StepSize(0.3, target_accept), "rho": StepSize(0.3, target_accept)}
        for name in structure.nugget_names:
            self.steps[name] = StepSize(0.3, target_accept)
        for name in CORR_NAMES:
            self.steps[name] = StepSize(0.5 if name in _LOGIT_PARAMS else 0.3, target_accept)

    def set_state(self, coef, sigma2, rho, nugget, corr, R):
        self.coef = np.array(coef, dtype=float)
        self.sigma2 = float(sigma2)
        self.rho = float(rho)
        self.nugget = np.array(nugget, dtype=float)
        self.corr = np.array(corr, dtype=float)
        self.R = np.array(R, dtype=float)
        self._refresh()

    def _refresh(self):
        self.z = np.repeat(self.R, 2) * self.u
        self.m = self.D @ self.coef
        self.e = self.z - self.m
        self.C = self.lags.correlation(self.corr)
        self.S = self.structure.covariance(self.C, self.sigma2, self.rho, self.nugget)
        self.L = cholesky(self.S)
        self.logdet = _logdet(self.L)

    def values(self) -> dict:
        st = self.structure
        out = dict(zip(st.mean_names, self.coef.tolist()))
        out["sigma2"] = self.sigma2
        out["rho"] = self.rho
        out.update(zip(st.nugget_names, self.nugget.tolist()))
        out.update(zip(CORR_NAMES, self.corr.tolist()))
        return out

    def latent(self):
        return self.R.copy()

    def log_likelihood(self, L=None, logdet=None, e=None):
        """Gaussian log density of the interleaved ``Z`` (constant dropped)."""
        L = self.L if L is None else L
        logdet = self.logdet if logdet is None else logdet
        e = self.e if e is None else e
        w = solve_triangular(L, e, lower=True, check_finite=False)
        return -0.5 * (logdet + float(w @ w))

    def sweep(self, adapting=False):
        Q = _precision(self.L)
        self._update_radii(Q)
        self._update_mean(Q)
        self._update_v(adapting)
        self._update_nuggets(adapting)
        self._update_corr(adapting)

    def _update_radii(self, Q):
        r = Q @ self.e
        for i in range(self.n):
            sl = slice(2 * i, 2 * i + 2)
            Qii = Q[sl, sl]
            ui = self.u[sl]
            # conditional mean of z_i given the rest
            cond = self.z[sl] - np.linalg.solve(Qii, r[sl])
            A = float(ui @ Qii @ ui)
            B = float(ui @ Qii @ cond)
            logf = lambda t, A=A, B=B: math.log(t) - 0.5 * A * t * t + B * t  # noqa: E731
            old = self.R[i]
            new = slice_sample_positive(logf, old, 1.0 / math.sqrt(A), self.rng)
            if new != old:
                dz = (new - old) * ui
                self.R[i] = new
                self.z[sl] += dz
                self.e[sl] += dz
                r += Q[:, sl] @ dz

    def _update_mean(self, Q):
        D = self.D
        QD = Q @ D
        P = D.T @ QD + np.diag(self._prior_prec)
        b = QD.T @ self.z + self._prior_prec * self._prior_mean
        Lp = np.linalg.cholesky(P)
        mean = cho_solve((Lp, True), b)
        w = solve_triangular(Lp.T, self.rng.standard_normal(len(b)), lower=False)
        self.coef = mean + w
        self.m = D @ self.coef
        self.e = self.z - self.m

    def _accept_cov(self, name, S, log_prior_ratio, ll):
        L = _try_cholesky(S)
        if L is None:
            return False, ll, None
        logdet = _logdet(L)
        ll_new = self.log_likelihood(L, logdet)
        if metropolis_accept(ll_new - ll + log_prior_ratio, self.rng):
            self.S, self.L, self.logdet = S, L, logdet
            return True, ll_new, L
        return False, ll, None

    def _update_v(self, adapting):
        st = self.structure
        ll = self.log_likelihood()
        # sigma2 on the log scale
        z = self.steps["sigma2"].scale * self.rng.standard_normal()
        new = self.sigma2 * math.exp(z)
        prior = self.priors["sigma2"]
        lpr = prior.logpdf(new) - prior.logpdf(self.sigma2) + z
        ok, ll, _ = self._accept_cov("sigma2", st.covariance(self.C, new, self.rho, self.nugget), lpr, ll)
        if ok:
            self.sigma2 = new
        self.steps["sigma2"].update(ok, adapting)
        # rho on the Fisher z scale
        fz = math.atanh(self.rho) + self.steps["rho"].scale * self.rng.standard_normal()
        new = math.tanh(fz)
        accepted = False
        if -1.0 < new < 1.0:
            prior = self.priors["rho"]
            lpr = prior.logpdf(new) - prior.logpdf(self.rho) + math.log((1 - new * new) / (1 - self.rho**2))
            accepted, ll, _ = self._accept_cov("rho", st.covariance(self.C, self.sigma2, new, self.nugget), lpr, ll)
            if accepted:
                self.rho = new
        self.steps["rho"].update(accepted, adapting)

    def _update_nuggets(self, adapting):
        st = self.structure
        ll = self.log_likelihood()
        for c, name in enumerate(st.nugget_names):
            z = self.steps[name].scale * self.rng.standard_normal()
            prop = self.nugget.copy()
            prop[c] *= math.exp(z)
            prior = self.priors[name]
            lpr = prior.logpdf(prop[c]) - prior.logpdf(self.nugget[c]) + z
            ok, ll, _ = self._accept_cov(name, st.covariance(self.C, self.sigma2, self.rho, prop), lpr, ll)
            if ok:
                self.nugget = prop
            self.steps[name].update(ok, adapting)

    def _update_corr(self, adapting):
        st = self.structure
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
            lpr = prior.logpdf(new) - prior.logpdf(self.corr[j]) + log_jac
            ok, ll, _ = self._accept_cov(name, st.covariance(C, self.sigma2, self.rho, self.nugget), lpr, ll)
            if ok:
                self.corr, self.C = prop, C
            self.steps[name].update(ok, adapting)

    def draw_prior(self):
        """Replace all parameters by a prior draw; the data are left alone."""
        st, pri, rng = self.structure, self.priors, self.rng
        self.coef = np.array([pri[k].sample(rng) for k in st.mean_names], dtype=float)
        self.sigma2 = float(pri["sigma2"].sample(rng))
        self.rho = float(pri["rho"].sample(rng))
        self.nugget = np.array([pri[k].sample(rng) for k in st.nugget_names], dtype=float)
        self.corr = np.array([pri[k].sample(rng) for k in CORR_NAMES], dtype=float)

    def simulate_data(self):
        """Redraw ``(theta, R)`` from the model at the current parameters."""
        self._refresh()
        z = self.m + self.L @ self.rng.standard_normal(2 * self.n)
        pairs = z.reshape(-1, 2)
        self.theta = atan_star(pairs[:, 0], pairs[:, 1])
        self.u = np.column_stack([np.cos(self.theta), np.sin(self.theta)]).ravel()
        self.R = np.hypot(pairs[:, 0], pairs[:, 1])
        self.z = np.repeat(self.R, 2) * self.u
        self.e = self.z - self.m


# ----------------------------------------------------------------------
def simulate_projected(points, structure: ProjectedStructure, values: dict, seed=None):
    """Simulate ``(angles, latent_z)`` for any projected structure; ``latent_z`` is ``(n, 2)``."""
    rng = np.random.default_rng(seed)
    pts = as_points(points)
    coef, sigma2, rho, nugget, corr = structure.unpack(values)
    C = LagTable(pts).correlation(corr)
    L = cholesky(structure.covariance(C, sigma2, rho, nugget))
    z = structure.mean(coef) + (L @ rng.standard_normal(2 * pts.shape[0])).reshape(-1, 2)
    return atan_star(z[:, 0], z[:, 1]), z


def simulate_pn(points, params: PnParams, seed=None):
    """Simulate angles and the bivariate linear process at the given points.

    Returns ``(angles, latent_z)`` with ``latent_z`` of shape ``(n, 2)``.
    """
    pts = as_points(points)
    if pts.shape[0] == 0:
        raise CircularDomainError("no points to simulate at")
    st = ProjectedStructure.constant(pts.shape[0])
    values = {"mu1": params.mu[0], "mu2": params.mu[1], "sigma2": params.proj_sigma2, "rho": params.rho, "nugget": params.nugget}
    values.update(zip(CORR_NAMES, params.corr.as_array()))
    return simulate_projected(pts, st, values, seed)


def fit_projected(dataset, structure: ProjectedStructure, priors, mcmc: McmcConfig | None = None, seed=None, model="PN", info=None) -> Chain:
    """Run the projected-process sampler for any linear mean structure."""
    mcmc = mcmc or McmcConfig()
    pts = dataset.points
    if len({tuple(p) for p in pts}) < 2:
        raise ConfigurationError("at least two distinct space-time points are required")
    pri = priors.resolve(structure.names) if isinstance(priors, PriorConfig) else dict(priors)
    rng = np.random.default_rng(seed)
    sampler = ProjectedSampler(pts, dataset.angles, structure, pri, rng, mcmc.target_accept)
    # radii at 1, so Z starts at the unit vectors; coefficients by least squares
    coef = np.linalg.lstsq(sampler.D, sampler.u, rcond=None)[0]
    corr = []
    for name in CORR_NAMES:
        v = float(pri[name].mean)
        corr.append(min(max(v, 1e-3), 1 - 1e-3) if name in _LOGIT_PARAMS else v)
    nugget = np.full(len(structure.var_cell_names), 0.1)
    try:
        sampler.set_state(coef, 1.0, 0.0, nugget, corr, np.ones(len(dataset)))
        ll = sampler.log_likelihood()
    except np.linalg.LinAlgError as exc:
        raise InitializationError(f"initial covariance is not positive definite: {exc}") from exc
    if not math.isfinite(ll):
        raise InitializationError("non-finite likelihood at the initial state")
    info = dict(info or {})
    info.update(family="projected")
    return run_chain(sampler, mcmc, model, seed=seed, info=info)


def fit_pn(dataset, priors, mcmc: McmcConfig | None = None, seed=None) -> Chain:
    """Fit the constant-mean projected normal model."""
    return fit_projected(dataset, ProjectedStructure.constant(len(dataset)), priors, mcmc, seed, "PN")


# ----------------------------------------------------------------------
def conditional_moments_pn(points, z, mean, targets, target_mean, sigma2, rho, nugget, target_nugget, corr):
    """Bivariate conditional law of ``Z`` at each target given ``Z`` at the data points.

    ``z`` and ``mean`` are ``(n, 2)``; ``target_mean`` is ``(m, 2)``;
    ``nugget`` may be per point. Returns ``M`` of shape ``(m, 2)`` and ``V``
    of shape ``(m, 2, 2)``.
    """
    pts = as_points(points)
    tgt = as_points(targets)
    n, m = pts.shape[0], tgt.shape[0]
    corr = np.asarray(corr, dtype=float)
    Vm = v_matrix(sigma2, rho)
    h, u = pairwise_lags(pts, pts)
    S = np.kron(_gneiting(h, u, *corr), Vm)
    S[np.diag_indices(2 * n)] += np.repeat(np.broadcast_to(np.asarray(nugget, dtype=float), (n,)), 2)
    h0, u0 = pairwise_lags(pts, tgt)
    S0 = np.kron(_gneiting(h0, u0, *corr), Vm)
    tn = np.broadcast_to(np.asarray(target_nugget, dtype=float), (m,))
    resid = (np.asarray(z, dtype=float) - mean).ravel()
    return _conditional_pn(cholesky(S), S0, resid, np.asarray(target_mean, dtype=float), Vm, tn)


def _conditional_pn(L, S0, resid, target_mean, Vm, target_nugget):
    A = cho_solve((L, True), S0, check_finite=False)
    M = target_mean + (A.T @ resid).reshape(-1, 2)
    m = M.shape[0]
    blocks = np.einsum("ia,ib->ab", S0, A).reshape(m, 2, m, 2)
    reduction = blocks[np.arange(m), :, np.arange(m), :]
    V = Vm[None] + target_nugget[:, None, None] * np.eye(2)[None] - reduction
    return M, V


def krige_projected(chain: Chain, dataset, targets, structure: ProjectedStructure, target_structure: ProjectedStructure, seed=None, max_draws=None) -> PredictiveSamples:
    """Composition sampling of predictive angles at ``targets``.

    For each retained draw, ``Z = R * (cos theta, sin theta)`` is rebuilt at
    the data points and a bivariate value is drawn from the Gaussian
    conditional at every target; its direction is the predicted angle.
    """
    tgt = as_points(targets)
    if tgt.shape[0] == 0:
        raise ValueError("no targets to predict")
    if chain.n_draws == 0:
        raise ValueError("empty chain")
    if chain.latent is None:
        raise ValueError("kriging needs the radii stored with the chain")
    rng = np.random.default_rng(seed)
    pts = dataset.points
    lags = LagTable(pts)
    h0, u0 = pairwise_lags(pts, tgt)
    unit = np.column_stack([np.cos(dataset.angles), np.sin(dataset.angles)])
    idx = np.arange(chain.n_draws)
    if max_draws is not None and chain.n_draws > max_draws:
        idx = np.linspace(0, chain.n_draws - 1, max_draws).round().astype(int)
    out = np.empty((idx.size, tgt.shape[0]))
    for row, l in enumerate(idx):
        coef, sigma2, rho, nugget, corr = structure.unpack(chain.draw(l))
        z = chain.latent[l][:, None] * unit
        resid = (z - structure.mean(coef)).ravel()
        S = structure.covariance(lags.correlation(corr), sigma2, rho, nugget)
        Vm = v_matrix(sigma2, rho)
        S0 = np.kron(_gneiting(h0, u0, *corr), Vm)
        M, V = _conditional_pn(
            cholesky(S), S0, resid, target_structure.mean(coef), Vm, nugget[target_structure.var_cells]
        )
        # per-target 2x2 Cholesky, clipped against round-off
        l11 = np.sqrt(np.maximum(V[:, 0, 0], 0.0))
        l21 = np.divide(V[:, 1, 0], l11, out=np.zeros_like(l11), where=l11 > 0)
        l22 = np.sqrt(np.maximum(V[:, 1, 1] - l21**2, 0.0))
        w = rng.standard_normal((M.shape[0], 2))
        z1 = M[:, 0] + l11 * w[:, 0]
        z2 = M[:, 1] + l21 * w[:, 0] + l22 * w[:, 1]
        out[row] = atan_star(z1, z2)
    return PredictiveSamples.from_draws(tgt, out)


def krige_pn(chain: Chain, dataset, targets, seed=None, max_draws=None) -> PredictiveSamples:
    """Predictive angle samples at new space-time points under the PN model."""
    n, m = len(dataset), len(np.atleast_2d(targets))
    return krige_projected(
        chain, dataset, targets, ProjectedStructure.constant(n), ProjectedStructure.constant(m), seed, max_draws
    )


summarize_pn = summarize
