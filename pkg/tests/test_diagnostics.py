import numpy as np
import pytest

from circgp.diagnostics import batch_means_se, geweke_test, moment_functions
from circgp.priors import InverseGamma

from conftest import geweke_sampler


def test_batch_means_se_iid():
    rng = np.random.default_rng(0)
    x = rng.normal(0, 2, 100_000)
    assert batch_means_se(x) == pytest.approx(2 / np.sqrt(x.size), rel=0.25)
    with pytest.raises(ValueError):
        batch_means_se(np.ones(60))


def test_batch_means_se_inflates_for_autocorrelation():
    rng = np.random.default_rng(1)
    e = rng.normal(size=50_000)
    x = np.empty_like(e)
    x[0] = e[0]
    for i in range(1, e.size):
        x[i] = 0.9 * x[i - 1] + e[i]
    naive = x.std() / np.sqrt(x.size)
    # AR(1) variance inflation factor (1 + phi) / (1 - phi) = 19
    assert batch_means_se(x) / naive == pytest.approx(np.sqrt(19), rel=0.3)


def test_moment_functions():
    g = moment_functions({"mu": np.array([0.0, np.pi]), "s": np.array([2.0])}, circular=("mu",))
    assert set(g) == {"cos(mu)", "sin(mu)", "cos(2*mu)", "sin(2*mu)", "s", "s^2"}
    assert g["cos(mu)"].tolist() == [1.0, -1.0] and g["s^2"].tolist() == [4.0]


@pytest.mark.parametrize("model", ["WN", "PN"])
def test_short_geweke_run_is_consistent(model):
    r = geweke_test(geweke_sampler(model), n_sweeps=2000, n_tune=500)
    assert r.n_sweeps == 2000
    assert r.passed(threshold=4.5), r.z


def test_geweke_detects_a_wrong_update():
    # the nugget update uses the variance prior while prior draws use the right one
    s = geweke_sampler("WN")
    good = dict(s.priors)
    bad = dict(good, nugget=InverseGamma(6, 2.5))
    draw = s.draw_prior

    def draw_with_correct_prior():
        s.priors = good
        draw()
        s.priors = bad

    s.draw_prior = draw_with_correct_prior
    s.priors = bad
    r = geweke_test(s, n_sweeps=2000, n_tune=500)
    assert abs(r.z["nugget"]) > 4
