import math

import numpy as np
import pytest
from scipy import integrate, stats

from circgp.circular import TWO_PI, ProjectedParams, atan_star, circ_summary, pn_pdf, wrap
from circgp.covariance import GneitingParams
from circgp.dataset import Dataset
from circgp.errors import ConfigurationError
from circgp.mcmc import Chain, McmcConfig
from circgp.priors import PriorConfig
from circgp.projected import (
    PnParams,
    ProjectedSampler,
    ProjectedStructure,
    conditional_moments_pn,
    fit_pn,
    krige_pn,
    simulate_pn,
)

from conftest import LOW_CORR, LOW_PN_PRIORS, grid_points

LOW = PnParams((2.5, 2.5), 1.0, 0.0, 0.01, LOW_CORR)


def corr_by_hand(p1, p2, a, c, alpha, beta, gamma):
    h = math.hypot(p1[0] - p2[0], p1[1] - p2[1])
    psi = a * abs(p1[2] - p2[2]) ** (2 * alpha) + 1.0
    return math.exp(-c * h ** (2 * gamma) / psi ** (beta * gamma)) / psi


def joint_conditional_pn(points, target, z, mu, sigma2, rho, nugget, corr):
    # full (2n+2) x (2n+2) joint, conditioned through explicit inversion
    allp = np.vstack([points, target])
    n = len(allp)
    V = np.array([[sigma2, rho * math.sqrt(sigma2)], [rho * math.sqrt(sigma2), 1.0]])
    S = np.zeros((2 * n, 2 * n))
    for i in range(n):
        for j in range(n):
            S[2 * i : 2 * i + 2, 2 * j : 2 * j + 2] = corr_by_hand(allp[i], allp[j], *corr) * V
    S += nugget * np.eye(2 * n)
    obs, tg = slice(0, 2 * n - 2), slice(2 * n - 2, 2 * n)
    A = S[tg, obs] @ np.linalg.inv(S[obs, obs])
    M = np.asarray(mu) + A @ (np.ravel(z) - np.tile(mu, n - 1))
    Vc = S[tg, tg] - A @ S[obs, tg]
    return M, Vc


def _point_chain(params: PnParams, R, n_draws=1):
    values = {"mu1": params.mu[0], "mu2": params.mu[1], "sigma2": params.proj_sigma2, "rho": params.rho, "nugget": params.nugget}
    values.update(zip(["a", "c", "alpha", "beta", "gamma"], params.corr.as_array()))
    return Chain(
        "PN",
        {k: np.full(n_draws, v, dtype=float) for k, v in values.items()},
        np.tile(np.asarray(R, dtype=float), (n_draws, 1)),
    )


def test_pn_params_identification():
    p = PnParams((0.3, -0.2), 2.0, 0.4, 0.1, LOW_CORR)
    assert p.V[1, 1] == 1.0
    assert p.V[0, 1] == pytest.approx(0.4 * math.sqrt(2.0))
    with pytest.raises(ValueError):
        PnParams((0, 0), 1.0, 1.0, 0.1, LOW_CORR)
    with pytest.raises(ValueError):
        PnParams((0, 0), 1.0, 0.0, 0.0, LOW_CORR)


def test_simulate_mean_dominates():
    pts = grid_points(4, 3, np.random.default_rng(0))
    th, z = simulate_pn(pts, PnParams((1e6, 0.0), 1.0, 0.0, 0.01, LOW_CORR), seed=2)
    assert np.max(np.minimum(th, TWO_PI - th)) < 1e-3
    assert z.shape == (12, 2)


def test_simulate_deterministic_and_projection_invariant():
    pts = grid_points(5, 3, np.random.default_rng(0))
    a = simulate_pn(pts, LOW, seed=7)
    b = simulate_pn(pts, LOW, seed=7)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    th, z = a
    assert np.array_equal(atan_star(z[:, 0], z[:, 1]), th)
    # powers of two scale both components without rounding
    for lam in (0.5, 4.0, 2.0**40):
        assert np.array_equal(atan_star(lam * z[:, 0], lam * z[:, 1]), th)
    for lam in (0.3, 7.0, 1e3):
        assert np.max(np.abs(atan_star(lam * z[:, 0], lam * z[:, 1]) - th)) < 1e-14


def test_simulate_low_variance_design_is_concentrated():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        th, _ = simulate_pn(grid_points(20, 12, rng), LOW, seed=seed)
        assert circ_summary(th).circular_variance < 0.2


def test_simulate_marginal_matches_projected_normal():
    # independent sites: each angle is projected normal with covariance V + nugget*I
    pts = np.array([[1000.0 * i, 0.0, 1.0] for i in range(500)])
    p = PnParams((0.6, 0.9), 1.7, -0.4, 0.3, GneitingParams(1.0, 1.0, 0.5, 0.5, 0.5))
    th = np.concatenate([simulate_pn(pts, p, seed=s)[0] for s in range(8)])
    V = p.V + 0.3 * np.eye(2)
    s1 = V[0, 0] / V[1, 1]
    rho = V[0, 1] / math.sqrt(V[0, 0] * V[1, 1])
    # rescale so the second variance is one; the angle law is unchanged only
    # when both components are divided by the same constant
    sd2 = math.sqrt(V[1, 1])
    ref = ProjectedParams(p.mu[0] / sd2, p.mu[1] / sd2, s1, rho)
    grid = np.linspace(0, TWO_PI, 20_001)
    F = integrate.cumulative_trapezoid(pn_pdf(grid, ref), grid, initial=0.0)
    emp = np.searchsorted(np.sort(th), grid, side="right") / th.size
    assert np.max(np.abs(emp - F)) < 0.03


def test_conditional_moments_match_joint_inversion():
    rng = np.random.default_rng(4)
    pts = grid_points(2, 1, rng)
    corr = GneitingParams(0.8, 0.3, 0.7, 0.4, 0.6)
    z = rng.normal(1.0, 1.0, (2, 2))
    tgt = np.array([[3.0, 3.0, 2.0]])
    mu = np.array([1.2, -0.4])
    M, V = conditional_moments_pn(pts, z, mu, tgt, mu[None], 1.4, 0.3, 0.07, 0.07, corr.as_array())
    Mo, Vo = joint_conditional_pn(pts, tgt[0], z, mu, 1.4, 0.3, 0.07, corr.as_array())
    assert np.max(np.abs(M[0] - Mo)) < 1e-10
    assert np.max(np.abs(V[0] - Vo)) < 1e-10


def test_krige_far_target_matches_unconditional():
    rng = np.random.default_rng(5)
    pts = grid_points(3, 2, rng)
    p = PnParams((0.5, 0.2), 1.3, 0.5, 0.2, GneitingParams(1.0, 1.0, 0.5, 0.5, 0.5))
    th, z = simulate_pn(pts, p, seed=6)
    R = np.hypot(z[:, 0], z[:, 1])
    pred = krige_pn(_point_chain(p, R, 10_000), Dataset(pts, th), [[1e6, 1e6, 1.0]], seed=1)
    ref = rng.multivariate_normal(p.mu, p.V + 0.2 * np.eye(2), 100_000)
    assert stats.ks_2samp(pred.draws[:, 0], atan_star(ref[:, 0], ref[:, 1])).statistic < 0.02


def test_krige_interpolates_observed_point():
    rng = np.random.default_rng(6)
    pts = grid_points(3, 2, rng)
    p = PnParams((1.0, 0.5), 1.0, 0.2, 1e-12, GneitingParams(0.3, 0.2, 0.5, 0.5, 0.5))
    th, z = simulate_pn(pts, p, seed=7)
    R = np.hypot(z[:, 0], z[:, 1])
    pred = krige_pn(_point_chain(p, R, 200), Dataset(pts, th), pts[4:5], seed=8)
    assert abs(wrap(pred.mean_direction[0] - th[4] + math.pi) - math.pi) < 1e-2


def _sampler(pts, th, R):
    st = ProjectedStructure.constant(len(pts))
    pri = PriorConfig(LOW_PN_PRIORS).resolve(st.names)
    s = ProjectedSampler(pts, th, st, pri, np.random.default_rng(0))
    s.set_state([1.0, 0.5], 1.3, 0.2, [0.05], LOW_CORR.as_array(), R)
    return s


def test_augmented_density_depends_on_z_only():
    rng = np.random.default_rng(9)
    pts = grid_points(3, 2, rng)
    th = rng.uniform(0, TWO_PI, 6)
    R = rng.uniform(0.5, 2.0, 6)
    s = _sampler(pts, th, R)
    z = np.column_stack([R * np.cos(th), R * np.sin(th)]).ravel()
    mean = np.tile([1.0, 0.5], 6)
    ref = stats.multivariate_normal(mean, s.S).logpdf(z)
    assert s.log_likelihood() - 6 * math.log(TWO_PI) == pytest.approx(ref, rel=1e-12)
    # another (theta, R) pair representing the same z
    s2 = _sampler(pts, th + TWO_PI, R)
    assert s2.log_likelihood() == pytest.approx(s.log_likelihood(), rel=1e-13)


def test_sampler_requires_normal_mean_priors():
    pts = grid_points(2, 2, np.random.default_rng(0))
    st = ProjectedStructure.constant(4)
    pri = PriorConfig(dict(LOW_PN_PRIORS, mu1="G(2,2)")).resolve(st.names)
    with pytest.raises(ConfigurationError):
        ProjectedSampler(pts, np.zeros(4), st, pri, np.random.default_rng(0))


def _small_low_dataset(seed, n_sites=6, n_times=4):
    rng = np.random.default_rng(seed)
    pts = grid_points(n_sites, n_times, rng)
    th, _ = simulate_pn(pts, LOW, seed=seed)
    return Dataset(pts, th)


def test_fit_is_deterministic_and_identified():
    data = _small_low_dataset(2)
    mcmc = McmcConfig(300, 100, 2)
    a = fit_pn(data, PriorConfig(LOW_PN_PRIORS), mcmc, seed=5)
    b = fit_pn(data, PriorConfig(LOW_PN_PRIORS), mcmc, seed=5)
    assert a.names == ["mu1", "mu2", "sigma2", "rho", "nugget", "a", "c", "alpha", "beta", "gamma"]
    assert a.circular == ()
    for k in a.names:
        assert np.array_equal(a[k], b[k])
    assert np.array_equal(a.latent, b.latent)
    assert np.all(a.latent > 0) and np.all(np.isfinite(a.latent))
    assert np.all(np.abs(a["rho"]) < 1)
    # the second variance is fixed at one in every stored draw
    for i in range(a.n_draws):
        V = PnParams((a["mu1"][i], a["mu2"][i]), a["sigma2"][i], a["rho"][i], a["nugget"][i], LOW_CORR).V
        assert V[1, 1] == 1.0
    assert all(0.0 <= r <= 1.0 for r in a.acceptance.values())
