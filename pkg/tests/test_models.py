import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orthospin import (
    CouplingSample,
    DimensionError,
    DomainError,
    ModelSpec,
    SpectralMeasure,
    TransformProfile,
    closed_form_limit,
    condition_c_margin,
    free_energy_limit,
    limiting_measure,
    rigidity_report,
    sample_coupling,
)
from orthospin.models import w2_sorted


def test_spec_validation():
    with pytest.raises(ValueError):
        ModelSpec.rom(0.0)
    with pytest.raises(ValueError):
        ModelSpec.hopfield(1.0)


def test_spec_json_round_trip_and_digest():
    specs = [ModelSpec.sk(), ModelSpec.rom(0.3), ModelSpec.hopfield(4.0),
             ModelSpec.custom(SpectralMeasure.discrete([(-1.0, 0.5), (2.0, 0.5)]))]
    digests = {s.digest() for s in specs}
    assert len(digests) == len(specs)
    for s in specs:
        back = ModelSpec.from_dict(s.to_dict())
        assert back == s and back.digest() == s.digest()


def test_limiting_measures():
    assert limiting_measure(ModelSpec.sk()).support == (-2.0, 2.0)
    rom = limiting_measure(ModelSpec.rom(0.5))
    assert rom.support == (-1.0, 1.0)
    assert rom.quantiles(4).tolist() == [-1.0, -1.0, 1.0, 1.0]
    lo, hi = limiting_measure(ModelSpec.hopfield(2.0)).support
    assert lo == pytest.approx((1 - math.sqrt(2)) ** 2)
    assert hi == pytest.approx((1 + math.sqrt(2)) ** 2)


def test_closed_form_examples():
    assert closed_form_limit(ModelSpec.sk(), 0.3) == pytest.approx(0.09, abs=1e-15)
    rom = closed_form_limit(ModelSpec.rom(0.5), 0.25)
    assert rom == pytest.approx(free_energy_limit(TransformProfile(SpectralMeasure.two_point(0.5)), 0.25),
                                abs=1e-10)
    assert closed_form_limit(ModelSpec.hopfield(2.0), 0.0) == 0.0
    assert closed_form_limit(ModelSpec.hopfield(2.0), 0.25) == pytest.approx(math.log(2.0), abs=1e-15)
    assert closed_form_limit(ModelSpec.custom(SpectralMeasure.semicircle()), 0.3) is None
    with pytest.raises(DomainError):
        closed_form_limit(ModelSpec.hopfield(2.0), 0.5)


def test_rom_pattern():
    s = sample_coupling(ModelSpec.rom(0.5), 4, seed=123)
    assert s.d_values.tolist() == [1.0, 1.0, -1.0, -1.0]
    s = sample_coupling(ModelSpec.rom(0.3), 10, seed=0)
    assert int(np.sum(s.d_values == 1.0)) == 3
    assert rigidity_report(s).w2_to_target == 0.0


def test_sk_moments():
    for seed in range(3):
        d = sample_coupling(ModelSpec.sk(), 200, seed).d_values
        assert abs(d.mean()) < 0.15
        assert abs(np.mean(d * d) - 1.0) < 0.15


def test_hopfield_gram_is_psd():
    d = sample_coupling(ModelSpec.hopfield(2.0), 100, seed=4).d_values
    assert d.min() >= 0.0
    with pytest.raises(DimensionError):
        sample_coupling(ModelSpec.hopfield(1.01), 10, seed=0)


def test_sampling_is_deterministic():
    a = sample_coupling(ModelSpec.sk(), 50, seed=9)
    b = sample_coupling(ModelSpec.sk(), 50, seed=9)
    c = sample_coupling(ModelSpec.sk(), 50, seed=10)
    assert np.array_equal(a.d_values, b.d_values)
    assert not np.array_equal(a.d_values, c.d_values)


def test_dimension_bounds():
    with pytest.raises(DimensionError):
        sample_coupling(ModelSpec.sk(), 1, seed=0)
    with pytest.raises(DimensionError):
        sample_coupling(ModelSpec.sk(), 5000, seed=0)


def test_w2_example_against_matching_oracle():
    d, e = np.array([0.0, 1.0]), np.array([0.0, 3.0])
    best = min(math.sqrt(np.mean((d - e[list(p)]) ** 2)) for p in itertools.permutations(range(2)))
    assert w2_sorted(d, e) == pytest.approx(best)
    # the cheaper matching pairs 0 with 0 and 1 with 3
    assert w2_sorted(d, e) == pytest.approx(math.sqrt(2.0), abs=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=6), st.integers(0, 2**31))
def test_w2_is_optimal_matching(values, seed):
    a = np.array(values)
    b = np.random.default_rng(seed).normal(size=a.size)
    brute = min(math.sqrt(np.mean((a - b[list(p)]) ** 2)) for p in itertools.permutations(range(a.size)))
    assert w2_sorted(a, b) == pytest.approx(brute, abs=1e-12)


@pytest.mark.parametrize("spec", [ModelSpec.sk(), ModelSpec.hopfield(2.0)], ids=["sk", "hopfield"])
def test_rigidity_report_sanity(spec):
    for n in (20, 200):
        s = sample_coupling(spec, n, seed=1)
        r = rigidity_report(s)
        assert r.w2_to_target >= 0
        assert r.sup_norm >= np.max(np.abs(s.expected_d)) - r.w2_to_target * math.sqrt(n)
        assert r.w2_scaled == pytest.approx(math.sqrt(n) * r.w2_to_target)


def test_sk_rigidity_stays_bounded():
    scaled = [rigidity_report(sample_coupling(ModelSpec.sk(), n, seed=2)).w2_scaled
              for n in (50, 200, 800)]
    assert max(scaled) < 3.0


def test_custom_sample_uses_quantiles():
    m = SpectralMeasure.discrete([(-1.0, 0.25), (0.5, 0.75)])
    s = sample_coupling(ModelSpec.custom(m), 8, seed=0)
    assert isinstance(s, CouplingSample)
    assert s.d_values.tolist() == [-1.0, -1.0, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5]


def test_condition_c_margin():
    assert condition_c_margin(ModelSpec.sk(), 0.2) == pytest.approx(0.21, abs=1e-12)
    assert condition_c_margin(ModelSpec.rom(0.5), 1e-3) == pytest.approx(0.25, abs=1e-5)
    assert condition_c_margin(ModelSpec.hopfield(2.0), 0.4) < 0
    assert condition_c_margin(ModelSpec.hopfield(2.0), 0.1) > 0
