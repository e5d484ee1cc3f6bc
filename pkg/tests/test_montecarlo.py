import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orthospin import (
    CapExceededError,
    DimensionError,
    ModelSpec,
    SpectralMeasure,
    annealed_moments,
    concentration_scan,
    exact_log_partition,
    naive_log_partition,
    quenched_free_energy,
    sample_coupling,
    sample_haar,
)
from orthospin.montecarlo import mean_energy, saddle_kappa


def _instance(n, seed):
    d = np.random.default_rng(seed).normal(size=n)
    return d, sample_haar(n, seed).matrix


# -- Haar ------------------------------------------------------------------------------

def test_haar_orthogonal():
    for n in (1, 2, 7, 40):
        o = sample_haar(n, seed=n).matrix
        assert np.max(np.abs(o @ o.T - np.eye(n))) < 1e-12
        assert np.allclose(np.linalg.norm(o, axis=0), 1.0, atol=1e-12)
    assert abs(sample_haar(1, 3).matrix[0, 0]) == 1.0


def test_haar_second_moment():
    vals = np.array([sample_haar(5, s).matrix[0, 0] ** 2 for s in range(20_000)])
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean() - 0.2) < 3 * se


def test_haar_is_seeded():
    assert np.array_equal(sample_haar(6, 1).matrix, sample_haar(6, 1).matrix)
    assert not np.array_equal(sample_haar(6, 1).matrix, sample_haar(6, 2).matrix)


# -- enumeration -------------------------------------------------------------------------

def test_enumeration_examples():
    d, o = _instance(5, 0)
    assert exact_log_partition(d, o, 0.0) == 0.0
    assert exact_log_partition(np.ones(2), np.eye(2), 0.7) == pytest.approx(0.7, abs=1e-15)
    d, o = _instance(3, 11)
    assert exact_log_partition(d, o, 0.4) == pytest.approx(naive_log_partition(d, o, 0.4), abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 9), seed=st.integers(0, 2**32 - 1), beta=st.floats(0.0, 2.0))
def test_gray_matches_naive(n, seed, beta):
    d, o = _instance(n, seed)
    assert exact_log_partition(d, o, beta) == pytest.approx(naive_log_partition(d, o, beta), abs=1e-12)


def test_enumeration_input_checks():
    with pytest.raises(CapExceededError):
        exact_log_partition(np.ones(25), np.eye(25), 0.1)
    with pytest.raises(DimensionError):
        exact_log_partition(np.ones(3), np.eye(4), 0.1)


def test_relabeling_invariance():
    d, o = _instance(8, 5)
    perm = np.random.default_rng(1).permutation(8)
    base = exact_log_partition(d, o, 0.6)
    # same coupling matrix: eigenpairs listed in another order
    assert exact_log_partition(d[perm], o[:, perm], 0.6) == pytest.approx(base, abs=1e-13)
    # spins relabeled
    assert exact_log_partition(d, o[perm], 0.6) == pytest.approx(base, abs=1e-13)


def test_worker_count_does_not_change_result():
    d, o = _instance(14, 2)
    assert exact_log_partition(d, o, 0.5, workers=1) == exact_log_partition(d, o, 0.5, workers=4)


def test_slope_at_zero_is_mean_energy():
    d, o = _instance(9, 8)
    h = 1e-5
    slope = (exact_log_partition(d, o, h) - exact_log_partition(d, o, -h)) / (2 * h)
    assert slope == pytest.approx(mean_energy(d, o), abs=1e-8)
    assert mean_energy(d, o) == pytest.approx(d.mean(), abs=1e-14)


def test_psd_coupling_gives_convex_nondecreasing_phi():
    d = sample_coupling(ModelSpec.hopfield(2.0), 10, seed=3).d_values
    o = sample_haar(10, 3).matrix
    betas = np.linspace(0.0, 1.0, 21)
    phi = np.array([exact_log_partition(d, o, b) for b in betas])
    assert np.all(np.diff(phi) >= 0)
    assert np.all(np.diff(phi, 2) >= -1e-12)


# -- quenched ------------------------------------------------------------------------------

def test_quenched_at_zero_temperature_parameter():
    est = quenched_free_energy(ModelSpec.rom(0.5), 16, 0.0, 5, seed=0)
    assert est.phi_values == (0.0,) * 5


def test_quenched_estimate_invariants():
    est = quenched_free_energy(ModelSpec.sk(), 10, 0.3, 12, seed=4)
    assert min(est.phi_values) <= est.mean <= max(est.phi_values)
    assert est.std_err == pytest.approx(np.std(est.phi_values, ddof=1) / math.sqrt(12))
    again = quenched_free_energy(ModelSpec.sk(), 10, 0.3, 12, seed=4)
    assert again == est
    with pytest.raises(CapExceededError):
        quenched_free_energy(ModelSpec.sk(), 30, 0.3, 1, seed=0)


def test_sk_quenched_small_example():
    est = quenched_free_energy(ModelSpec.sk(), 16, 0.3, 50, seed=0)
    assert abs(est.mean - 0.09) < 0.03


def test_concentration_scan_rows():
    rows = concentration_scan(ModelSpec.sk(), 0.0, [6, 8], 10, seed=0)
    assert [r["n"] for r in rows] == [6, 8]
    assert all(r["std"] == 0.0 for r in rows)


def test_sk_std_trend_decreases():
    rows = concentration_scan(ModelSpec.sk(), 0.3, [8, 12, 16, 20], 60, seed=2)
    slope = np.polyfit([r["n"] for r in rows], np.log([r["std"] for r in rows]), 1)[0]
    assert slope < 0


# -- annealed ------------------------------------------------------------------------------

def test_annealed_zero_beta():
    est = annealed_moments(SpectralMeasure.semicircle(), 50, 0.0, 100, seed=0)
    assert est.log_first_moment_rate == 0.0 and est.log_second_moment_rate == 0.0


def test_saddle_kappa_solves_mean_equation():
    lam = SpectralMeasure.two_point(0.5).quantiles(100)
    k = saddle_kappa(lam, 0.3)
    assert k > lam.max()
    assert np.mean(1.0 / (k - lam)) == pytest.approx(0.6, rel=1e-12)


@pytest.mark.parametrize("measure", [SpectralMeasure.semicircle(), SpectralMeasure.two_point(0.5)],
                         ids=["sk", "rom"])
def test_importance_sampling_agrees_with_plain(measure):
    plain = annealed_moments(measure, 8, 0.3, 200_000, seed=1, tilt=None, controls=False)
    tilted = annealed_moments(measure, 8, 0.3, 50_000, seed=2)
    for i, (a, b) in enumerate([(plain.log_first_moment_rate, tilted.log_first_moment_rate),
                                (plain.log_second_moment_rate, tilted.log_second_moment_rate)]):
        se = math.hypot(plain.std_errs[i], tilted.std_errs[i])
        assert abs(a - b) < 3 * se


def test_annealed_accepts_sample_and_array():
    cs = sample_coupling(ModelSpec.rom(0.5), 40, seed=0)
    a = annealed_moments(cs, 40, 0.2, 2000, seed=3)
    b = annealed_moments(cs.expected_d, 40, 0.2, 2000, seed=3)
    assert a == b
    with pytest.raises(DimensionError):
        annealed_moments(np.ones(3), 4, 0.2, 100, seed=0)


def test_annealed_determinism_and_worker_invariance():
    args = (SpectralMeasure.semicircle(), 60, 0.3, 9000)
    one = annealed_moments(*args, seed=5, chunk=1000, workers=1)
    three = annealed_moments(*args, seed=5, chunk=1000, workers=3)
    assert one == three
    assert annealed_moments(*args, seed=6, chunk=1000) != one


@pytest.mark.parametrize("measure,beta", [(SpectralMeasure.semicircle(), 0.3),
                                          (SpectralMeasure.two_point(0.5), 0.25),
                                          (SpectralMeasure.marchenko_pastur(2.0), 0.1)],
                         ids=["sk", "rom", "hopfield"])
def test_second_moment_not_below_first(measure, beta):
    for n in (10, 100):
        est = annealed_moments(measure, n, beta, 20_000, seed=n)
        assert est.gap >= -3 * est.gap_std_err


@pytest.mark.parametrize("measure,beta", [(SpectralMeasure.semicircle(), 0.3),
                                          (SpectralMeasure.two_point(0.5), 0.25)],
                         ids=["sk", "rom"])
def test_moment_gap_shrinks_resolvably_at_small_n(measure, beta):
    small = annealed_moments(measure, 8, beta, 200_000, seed=3)
    large = annealed_moments(measure, 32, beta, 200_000, seed=3)
    combined = math.hypot(small.gap_std_err, large.gap_std_err)
    assert small.gap - large.gap > 3 * combined
