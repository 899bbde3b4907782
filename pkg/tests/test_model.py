import math

import pytest
from hypothesis import given, strategies as st

from combmem import (CombConfig, MemoryConfig, ValidationError, build_comb,
                     impedance_matching_delta, spectral_span)


def test_four_tooth_comb_matches_device_spacing():
    comb = build_comb(4, 3.5e6)
    assert comb.detunings == pytest.approx((-5.25e6, -1.75e6, 1.75e6, 5.25e6))
    assert spectral_span(comb) == pytest.approx(10.5e6)


def test_single_resonator_comb_is_trivial():
    comb = build_comb(1, 5e6)
    assert comb.detunings == (0.0,)
    assert spectral_span(comb) == 0.0


def test_three_tooth_comb_symmetry_forces_center_tooth():
    comb = build_comb(3, 2e6)
    assert comb.detunings == pytest.approx((-2e6, 0.0, 2e6))


def test_wide_comb_span_is_arithmetic():
    assert spectral_span(build_comb(4, 18e6)) == pytest.approx(54e6)


@pytest.mark.parametrize("n,delta", [(0, 1e6), (-2, 1e6), (3, 0.0), (3, -1e6)])
def test_build_comb_rejects_nonpositive_arguments(n, delta):
    with pytest.raises(ValidationError):
        build_comb(n, delta)


def test_comb_config_validates_spacing():
    with pytest.raises(ValidationError):
        CombConfig(delta=-1.0, detunings=(0.0,))


@given(st.integers(min_value=1, max_value=9),
       st.floats(min_value=1e3, max_value=1e8, allow_nan=False))
def test_comb_is_symmetric_under_negation_and_sums_to_zero(n, delta):
    comb = build_comb(n, delta)
    dets = sorted(comb.detunings)
    negated = sorted(-d for d in comb.detunings)
    assert dets == pytest.approx(negated)
    assert sum(dets) == pytest.approx(0.0, abs=1e-6 * delta)
    assert spectral_span(comb) == pytest.approx((n - 1) * delta)


def test_matching_reproduces_device_scale_spacing():
    # kappa_c/2pi of 0.955 MHz asks for a spacing of about 1.5 MHz
    assert impedance_matching_delta(0.955e6) == pytest.approx(1.5e6, rel=1e-3)


def test_matching_zero_and_identity_points():
    assert impedance_matching_delta(0.0) == 0.0
    assert impedance_matching_delta(2e6 / math.pi) == pytest.approx(1e6)


def test_matching_rejects_negative_rate():
    with pytest.raises(ValidationError):
        impedance_matching_delta(-1.0)


@given(st.floats(min_value=0, max_value=1e8, allow_nan=False),
       st.floats(min_value=0, max_value=1e3, allow_nan=False))
def test_matching_is_linear(kappa, scale):
    lhs = impedance_matching_delta(scale * kappa)
    rhs = scale * impedance_matching_delta(kappa)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_memory_config_defaults_are_half_wave_spaced():
    cfg = MemoryConfig.uniform()
    assert cfg.n_resonators == 4
    assert cfg.kappa_c == (0.55e6,) * 4
    assert cfg.kappa_i == (0.312e6,) * 4
    assert cfg.spacing_phase == pytest.approx(tuple(k * math.pi for k in range(4)))


def test_memory_config_rejects_bad_shapes_and_signs():
    with pytest.raises(ValidationError):
        MemoryConfig(n_resonators=2, kappa_c=(1e5,), kappa_i=(1e4, 1e4))
    with pytest.raises(ValidationError):
        MemoryConfig(n_resonators=1, kappa_c=(-1e5,), kappa_i=(0.0,))
    with pytest.raises(ValidationError):
        MemoryConfig(n_resonators=0)
