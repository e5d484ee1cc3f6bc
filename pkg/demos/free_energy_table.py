"""Print the high-temperature free energy of the three model families.

For each model the limit is computed twice, once from the closed form and
once by numerically inverting the Hilbert transform, next to the
small-beta approximation beta^2 var / 2 + beta m.
"""

from orthospin import (
    ModelSpec,
    TransformProfile,
    closed_form_limit,
    free_energy_limit,
    limiting_measure,
    small_beta_series,
)

MODELS = [ModelSpec.sk(), ModelSpec.rom(0.5), ModelSpec.rom(0.7), ModelSpec.hopfield(4.0)]
BETAS = [0.05, 0.1, 0.15]


def main():
    print(f"{'model':<20}{'beta':>6}{'closed':>14}{'numeric':>14}{'series':>14}")
    for spec in MODELS:
        numeric = TransformProfile(limiting_measure(spec), closed_form=False)
        for b in BETAS:
            print(f"{spec.name:<20}{b:>6}{closed_form_limit(spec, b):>14.9f}"
                  f"{free_energy_limit(numeric, b):>14.9f}{small_beta_series(numeric, b):>14.9f}")


if __name__ == "__main__":
    main()
