"""Fit the wrapped and projected models to one simulated dataset and score them.

Simulates a low-variance wrapped normal dataset on the study layout
(20 sites x 12 times), fits both models to the 170 estimation points and
scores predictions at the 70 held-out points.

    python demos/compare_wn_pn.py [iterations]
"""

import sys
import time

from circgp.mcmc import McmcConfig, format_summary, summarize
from circgp.priors import PriorConfig
from circgp.projected import fit_pn, krige_pn
from circgp.scoring import score_windows
from circgp.simstudy import StudyDesign, generate_study, truth_centered_priors
from circgp.wrapped import fit_wn, krige_wn

PN_PRIORS = {
    "mu1": "N(0,10)", "mu2": "N(0,10)", "sigma2": "IG(2,2)", "rho": "TN(0,1)", "nugget": "IG(2.001,0.03)",
    "a": "G(5,4)", "c": "G(2,5)", "alpha": "B(5,5)", "beta": "B(5,5)", "gamma": "B(5,5)",
}


def main(iterations=2000):
    design = StudyDesign("WN", ac=((1.0, 0.2),), beta=(0.5,), alpha=(0.5,), gamma=(0.5,), groups=("low",))
    (case,) = generate_study(design)
    est = case.dataset.subset(case.estimation)
    val = case.dataset.subset(case.validation)
    mcmc = McmcConfig(iterations, iterations // 2, 2)

    fits = {
        "WN": (fit_wn, krige_wn, truth_centered_priors(case.truth)),
        "PN": (fit_pn, krige_pn, PriorConfig(PN_PRIORS)),
    }
    for name, (fit, krige, priors) in fits.items():
        start = time.perf_counter()
        chain = fit(est, priors, mcmc, seed=1)
        pred = krige(chain, est, val.points, seed=2)
        report = score_windows({"validation": pred}, {"validation": val.angles})
        print(f"\n{name}: {time.perf_counter() - start:.1f} s, CRPS {report.mean_crps:.4f}, APE {report.mean_ape:.4f}")
        print(format_summary(summarize(chain)))


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 2000)
