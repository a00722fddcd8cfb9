import math

import numpy as np
import pytest

from circgp.errors import ConfigurationError
from circgp.mcmc import McmcConfig
from circgp.priors import Beta, Gamma, InverseGamma, Normal, TruncatedNormal, WrappedNormal
from circgp.simstudy import (
    RESULT_COLUMNS,
    StudyCase,
    StudyDesign,
    default_workers,
    generate_study,
    group_summary,
    run_case,
    run_study,
    truth_centered_priors,
)

ONE_CELL = dict(ac=((1.0, 0.2),), beta=(0.5,), alpha=(0.5,), gamma=(0.5,), groups=("low",))


def test_full_designs_have_48_truths():
    for model in ("WN", "PN"):
        truths = StudyDesign(model).truths()
        assert len(truths) == 48
        assert sum(t["variance_group"] == "low" for t in truths) == 24
        keys = {tuple(t[k] for k in ("a", "c", "alpha", "beta", "gamma", "variance_group")) for t in truths}
        assert len(keys) == 48
    wn_high = [t for t in StudyDesign("WN").truths() if t["variance_group"] == "high"]
    assert {(t["mu"], t["sigma2"], t["nugget"]) for t in wn_high} == {(math.pi, 1.0, 0.1)}
    pn_low = [t for t in StudyDesign("PN").truths() if t["variance_group"] == "low"]
    assert {(t["mu1"], t["mu2"], t["sigma2"], t["rho"], t["nugget"]) for t in pn_low} == {(2.5, 2.5, 1.0, 0.0, 0.01)}


def test_design_validation():
    with pytest.raises(ConfigurationError):
        StudyDesign("XX")
    with pytest.raises(ConfigurationError):
        StudyDesign("WN", groups=("medium",))
    with pytest.raises(ConfigurationError):
        StudyDesign("WN", n_sites=10)


def test_single_combination_and_split_contract():
    (case,) = generate_study(StudyDesign("WN", **ONE_CELL))
    assert len(case.dataset) == 240
    pts = case.dataset.points
    assert np.all((pts[:, :2] >= 0) & (pts[:, :2] <= 10))
    assert sorted(set(pts[:, 2])) == list(range(1, 13))
    assert case.estimation.size == 170 and case.validation.size == 70
    assert np.all(pts[case.estimation, 2] <= 10)
    assert np.intersect1d(case.estimation, case.validation).size == 0
    assert np.union1d(case.estimation, case.validation).size == 240
    # every point at times 11 and 12 is in the validation set
    assert np.all(np.isin(np.flatnonzero(pts[:, 2] > 10), case.validation))


def test_generate_study_is_deterministic():
    a = generate_study(StudyDesign("PN", **ONE_CELL))[0]
    b = generate_study(StudyDesign("PN", **ONE_CELL))[0]
    assert np.array_equal(a.dataset.angles, b.dataset.angles)
    assert np.array_equal(a.estimation, b.estimation)
    c = generate_study(StudyDesign("PN", seed=7, **ONE_CELL))[0]
    assert not np.array_equal(a.dataset.angles, c.dataset.angles)


def test_truth_centered_prior_mapping():
    base = {"a": 0.2, "c": 1.0, "alpha": 0.8, "beta": 0.9, "gamma": 0.5}
    wn = truth_centered_priors({"model": "WN", "mu": math.pi, "sigma2": 0.1, "nugget": 0.01, **base}).priors
    assert wn["a"] == Gamma(2, 5) and wn["c"] == Gamma(5, 4)
    assert wn["alpha"] == Beta(6, 1.5) and wn["beta"] == Beta(6, 1.5) and wn["gamma"] == Beta(5, 5)
    assert wn["sigma2"] == InverseGamma(4.5, 0.55)
    assert wn["nugget"] == InverseGamma(2.001, 0.03)
    assert wn["mu"] == WrappedNormal(math.pi, 5.0)
    assert truth_centered_priors({"model": "WN", "mu": math.pi, "sigma2": 1.0, "nugget": 0.1, **base, "beta": 0.0}).priors["beta"] == Beta(1, 4)
    pn = truth_centered_priors({"model": "PN", "mu1": 0.85, "mu2": 0.85, "sigma2": 1.0, "rho": 0.0, "nugget": 0.1, **base}).priors
    assert pn["mu1"] == Normal(0.85, 5) and pn["sigma2"] == InverseGamma(2.01, 4.01)
    assert pn["rho"] == TruncatedNormal(0.0, 1.0)
    assert pn["nugget"] == InverseGamma(4.5, 0.55)
    with pytest.raises(ConfigurationError):
        truth_centered_priors({"model": "WN", "mu": math.pi, "sigma2": 0.5, "nugget": 0.01, **base})
    with pytest.raises(ConfigurationError):
        truth_centered_priors({"model": "WN", "mu": math.pi, "sigma2": 0.1, "nugget": 0.01, **base, "beta": 1.0})


def test_priors_have_modes_at_the_truth():
    # (shape, scale) inverse gammas and (shape, rate) gammas peak at the grid value
    for (k, s), truth in [((4.5, 0.55), 0.1), ((2.001, 0.03), 0.01)]:
        assert s / (k + 1) == pytest.approx(truth, rel=1e-3)
    for (k, r), truth in [((2, 5), 0.2), ((5, 4), 1.0)]:
        assert (k - 1) / r == pytest.approx(truth)


SMOKE = McmcConfig(200, 100, 1)


def test_smoke_run_and_determinism():
    (case,) = generate_study(StudyDesign("WN", **ONE_CELL))
    row = run_case(case, SMOKE)
    assert row["error"] == ""
    assert math.isfinite(row["mean_crps"]) and math.isfinite(row["mean_ape"])
    assert 0 <= row["mean_ape"] <= 2 and -1 <= row["mean_crps"] <= 2
    assert set(row) == set(RESULT_COLUMNS)
    again = run_case(case, SMOKE)
    assert {k: v for k, v in row.items() if k != "wall_seconds"} == {k: v for k, v in again.items() if k != "wall_seconds"}


def test_swapping_estimation_and_validation_changes_scores():
    cases = generate_study(StudyDesign("PN", **ONE_CELL))
    swapped = [StudyCase(c.dataset, c.truth, c.validation, c.estimation, c.seed) for c in cases]
    a = run_study(cases, SMOKE, workers=1)
    b = run_study(swapped, SMOKE, workers=1)
    assert any(x["mean_crps"] != y["mean_crps"] for x, y in zip(a, b))


def test_failures_are_recorded_not_raised():
    (case,) = generate_study(StudyDesign("WN", **ONE_CELL))
    bad = StudyCase(case.dataset, dict(case.truth, sigma2=0.5), case.estimation, case.validation, case.seed)
    row = run_case(bad, SMOKE)
    assert "ConfigurationError" in row["error"] and math.isnan(row["mean_crps"])


def test_worker_pool_matches_serial():
    design = StudyDesign("WN", ac=((1.0, 0.2),), beta=(0.0,), alpha=(0.5,), gamma=(0.5,))
    cases = generate_study(design)
    tiny = McmcConfig(60, 30, 1)
    serial = run_study(cases, tiny, workers=1)
    pooled = run_study(cases, tiny, workers=2)
    strip = lambda rows: [{k: v for k, v in r.items() if k != "wall_seconds"} for r in rows]  # noqa: E731
    assert strip(serial) == strip(pooled)


def test_default_workers_from_environment(monkeypatch):
    monkeypatch.delenv("CIRCGP_WORKERS", raising=False)
    assert default_workers() == 1
    monkeypatch.setenv("CIRCGP_WORKERS", "3")
    assert default_workers() == 3
    monkeypatch.setenv("CIRCGP_WORKERS", "many")
    with pytest.raises(ConfigurationError):
        default_workers()


def test_group_summary():
    rows = [
        {"variance_group": "low", "mean_crps": 0.1},
        {"variance_group": "low", "mean_crps": 0.3},
        {"variance_group": "high", "mean_crps": 0.9},
        {"variance_group": "high", "mean_crps": float("nan")},
    ]
    g = group_summary(rows)
    assert g["low"] == {"mean": pytest.approx(0.2), "min": 0.1, "max": 0.3, "n": 2}
    assert g["high"]["n"] == 1
