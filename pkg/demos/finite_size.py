"""Compare finite-N free energies with the large-N limit for SK.

Exact enumeration over all 2^N spin configurations gives the quenched free
energy at small N; the Gaussian-ratio estimator gives the annealed one at
N in the thousands. Both approach beta^2.
"""

from orthospin import ModelSpec, SpectralMeasure, annealed_moments, quenched_free_energy

BETA = 0.3
print(f"limit: {BETA ** 2:.5f}")
for n in (8, 12, 16):
    est = quenched_free_energy(ModelSpec.sk(), n, BETA, 30, seed=1, with_expected=False)
    print(f"quenched n={n:<5} {est.mean:.5f} +- {est.std_err:.5f}")
for n in (100, 500, 2000):
    est = annealed_moments(SpectralMeasure.semicircle(), n, BETA, 20_000, seed=1)
    print(f"annealed n={n:<5} {est.log_first_moment_rate:.5f} +- {est.std_errs[0]:.5f}"
          f"   second-moment gap {est.gap:+.1e}")
