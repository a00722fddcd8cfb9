import math

import numpy as np
import pytest
from hypothesis import strategies as st

from circgp.covariance import GneitingParams


def grid_points(n_sites, n_times, rng, extent=10.0, t0=1):
    sites = rng.uniform(0.0, extent, size=(n_sites, 2))
    return np.array([[x, y, t] for t in range(t0, t0 + n_times) for x, y in sites], dtype=float)


@st.composite
def gneiting_params(draw):
    return GneitingParams(
        a=draw(st.floats(0.01, 5.0)),
        c=draw(st.floats(0.01, 5.0)),
        alpha=draw(st.floats(0.05, 1.0)),
        beta=draw(st.floats(0.0, 1.0)),
        gamma=draw(st.floats(0.05, 1.0)),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


LOW_WN_PRIORS = {
    "mu": "WrapN(pi,5)",
    "sigma2": "IG(4.5,0.55)",
    "nugget": "IG(2.001,0.03)",
    "a": "G(5,4)",
    "c": "G(2,5)",
    "alpha": "B(5,5)",
    "beta": "B(5,5)",
    "gamma": "B(5,5)",
}

LOW_PN_PRIORS = {
    "mu1": "N(2.5,5)",
    "mu2": "N(2.5,5)",
    "sigma2": "IG(2.01,4.01)",
    "rho": "TN(0,1)",
    "nugget": "IG(2.001,0.03)",
    "a": "G(5,4)",
    "c": "G(2,5)",
    "alpha": "B(5,5)",
    "beta": "B(5,5)",
    "gamma": "B(5,5)",
}

LOW_CORR = GneitingParams(1.0, 0.2, 0.5, 0.5, 0.5)
PI = math.pi


GEWEKE_CORR = {"a": "G(20,20)", "c": "G(20,40)", "alpha": "B(20,20)", "beta": "B(20,20)", "gamma": "B(20,20)"}

# light-tailed priors keep the prior-predictive chain well mixed
GEWEKE_PRIORS = {
    "WN": {"mu": "WrapN(pi,0.5)", "sigma2": "IG(6,2.5)", "nugget": "IG(6,0.5)", **GEWEKE_CORR},
    "PN": {"mu1": "N(1,0.5)", "mu2": "N(0.5,0.5)", "sigma2": "IG(6,5)", "rho": "TN(0,0.2)", "nugget": "IG(6,0.5)", **GEWEKE_CORR},
    "WNA": {"mu": "WrapN(pi,0.5)", "sigma2": "IG(6,2.5)", "nugget": "IG(6,0.5)", **GEWEKE_CORR},
    "WNR": {"eta": "N(0,0.25)", "sigma2": "IG(6,2.5)", "nugget": "IG(6,0.5)", **GEWEKE_CORR},
    "PNA": {"mu1": "N(1,0.5)", "mu2": "N(0.5,0.5)", "sigma2": "IG(6,5)", "rho": "TN(0,0.2)", "nugget": "IG(6,0.5)", **GEWEKE_CORR},
    "PNR": {"eta1": "N(0.5,0.25)", "eta2": "N(0.3,0.25)", "sigma2": "IG(6,5)", "rho": "TN(0,0.2)", "nugget": "IG(6,0.5)", **GEWEKE_CORR},
}


def geweke_sampler(model, seed=1):
    """Sampler on 4 sites x 3 times for the joint-distribution test."""
    from circgp.covariates import DesignInfo, variant_structure
    from circgp.dataset import Dataset
    from circgp.priors import PriorConfig
    from circgp.projected import ProjectedSampler, ProjectedStructure
    from circgp.wrapped import WrappedSampler, WrappedStructure

    rng = np.random.default_rng(0)
    pts = grid_points(4, 3, rng)
    n = len(pts)
    data = Dataset(
        pts,
        np.zeros(n),
        factors={"state": np.array(["calm", "storm"])[np.arange(n) % 2]},
        covariates={"height": rng.uniform(0.5, 3.0, n)},
    )
    if model == "WN":
        st = WrappedStructure.constant(n)
    elif model == "PN":
        st = ProjectedStructure.constant(n)
    else:
        design = DesignInfo.from_dataset(data, ["state"], ["height"] if model.endswith("R") else [])
        st = variant_structure(model, design)
    pri = PriorConfig(GEWEKE_PRIORS[model]).resolve(st.names)
    if model.startswith("WN"):
        return WrappedSampler(pts, data.angles, st, pri, 3, np.random.default_rng(seed))
    return ProjectedSampler(pts, data.angles, st, pri, np.random.default_rng(seed))
