"""Joint-distribution check of a sampler on a tiny design.

Compares prior draws with a chain that alternates data simulation and one
sampler sweep. Both target the prior, so every moment z-score should be
small; a wrong update shows up as a large |z|.

    python demos/geweke_check.py [model] [sweeps]
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from conftest import geweke_sampler  # noqa: E402

from circgp.diagnostics import geweke_test  # noqa: E402


def main(model="WN", sweeps=5000):
    result = geweke_test(geweke_sampler(model), n_sweeps=sweeps, n_tune=1000)
    for key, z in sorted(result.z.items(), key=lambda kv: -abs(kv[1])):
        print(f"{key:>24}  prior {result.marginal_mean[key]: .4f}  chain {result.successive_mean[key]: .4f}  z {z: .2f}")
    print(f"\nmax |z| = {result.max_abs_z:.2f} over {sweeps} sweeps")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "WN", int(sys.argv[2]) if len(sys.argv) > 2 else 5000)
