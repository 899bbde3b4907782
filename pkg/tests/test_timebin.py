import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from combmem import (ConfigurationError, MemoryConfig, TimeBinState, ValidationError,
                     build_comb, echo_window_pair, encode, fidelity, leakage_noise,
                     run_protocol, simulate, static_comb, timebin_schedule)
from combmem.timebin import output_state_metrics, restrict

DEVICE = MemoryConfig.uniform()
COMB = build_comb(4, 3.5e6)
EQUAL = math.sqrt(0.5)


def make_state(a_e=EQUAL, a_l=EQUAL, phi=0.0, sep=150e-9, fwhm=50e-9):
    return TimeBinState(a_e=a_e, a_l=a_l, phi=phi, bin_separation=sep, fwhm=fwhm)


# ---------------------------------------------------------------------------
# encoding

def test_equal_superposition_encodes_equal_energy_bins():
    train = encode(make_state(), t0=0.3e-6, mean_photons=1.0)
    assert len(train.pulses) == 2
    assert train.pulses[0].mean_photon_number == pytest.approx(0.5)
    assert train.pulses[1].mean_photon_number == pytest.approx(0.5)
    assert train.pulses[1].center_time - train.pulses[0].center_time == pytest.approx(150e-9)
    assert train.total_photons == pytest.approx(1.0)


def test_single_bin_state_encodes_one_pulse():
    train = encode(make_state(a_e=1.0, a_l=0.0), t0=0.3e-6)
    assert len(train.pulses) == 1
    assert train.pulses[0].center_time == pytest.approx(0.3e-6)


def test_relative_phase_lands_on_the_late_pulse():
    train = encode(make_state(phi=math.pi), t0=0.3e-6)
    assert train.pulses[0].phase == 0.0
    assert train.pulses[1].phase == pytest.approx(math.pi)


def test_state_normalization_is_enforced():
    with pytest.raises(ValidationError):
        TimeBinState(a_e=1.0, a_l=0.5, phi=0.0, bin_separation=150e-9, fwhm=50e-9)


def test_overlapping_bins_are_rejected():
    with pytest.raises(ValidationError):
        make_state(sep=40e-9, fwhm=50e-9)


# ---------------------------------------------------------------------------
# fidelity arithmetic

def test_perfect_storage_has_unit_fidelity():
    assert fidelity(1.0, 0.0) == 1.0


def test_equal_signal_and_noise_gives_two_thirds():
    assert fidelity(0.25, 0.25) == pytest.approx(2.0 / 3.0)


def test_fidelity_rejects_degenerate_input():
    with pytest.raises(ValidationError):
        fidelity(0.0, 0.0)
    with pytest.raises(ValidationError):
        fidelity(-1.0, 0.1)


@given(st.floats(min_value=1e-12, max_value=1e6),
       st.floats(min_value=0.0, max_value=1e6))
def test_fidelity_is_bounded_and_decreasing_in_noise(signal, noise):
    f = fidelity(signal, noise)
    assert 0.5 <= f <= 1.0
    assert fidelity(signal, noise + 1.0) <= f


# ---------------------------------------------------------------------------
# windows

def test_bin_windows_are_disjoint_by_construction():
    sched = static_comb(COMB, 2.5e-6)
    win_e, win_l = echo_window_pair(sched, COMB.delta, make_state(), 0.3e-6)
    assert win_l.t_start >= win_e.t_end
    assert win_l.center - win_e.center == pytest.approx(150e-9, rel=1e-9)


def test_oversized_windows_are_a_configuration_error():
    sched = static_comb(COMB, 2.5e-6)
    with pytest.raises(ConfigurationError):
        echo_window_pair(sched, COMB.delta, make_state(), 0.3e-6, half_width=120e-9)


# ---------------------------------------------------------------------------
# storage protocol

def test_static_memory_preserves_the_amplitude_ratio_exactly():
    """Each bin alone sees the identical (time-shifted) transfer function,
    so the single-bin echo energies scale exactly as the input amplitudes."""
    from combmem.analysis import window_energy
    state = make_state(a_e=0.6, a_l=0.8, phi=0.7)
    sched = static_comb(COMB, 2.0e-6)
    win_e, win_l = echo_window_pair(sched, COMB.delta, state, 0.3e-6)
    r_e = simulate(DEVICE, sched, encode(restrict(state, "early"), 0.3e-6), dt=0.5e-9)
    r_l = simulate(DEVICE, sched, encode(restrict(state, "late"), 0.3e-6), dt=0.5e-9)
    e_e = (window_energy(r_e, win_e, "transmission", emitted=True)
           + window_energy(r_e, win_e, "reflection"))
    e_l = (window_energy(r_l, win_l, "transmission", emitted=True)
           + window_energy(r_l, win_l, "reflection"))
    assert math.sqrt(e_l / e_e) == pytest.approx(0.8 / 0.6, rel=1e-9)


def test_phase_sweep_is_recovered_without_drift():
    """The relative phase rides on the late pulse and comes back unchanged
    (single-bin runs: no cross-bin interference in the windows)."""
    from combmem.analysis import _window_slice
    sched = static_comb(COMB, 2.0e-6)
    for phi in np.linspace(0.0, 2 * math.pi, 5, endpoint=False):
        state = make_state(phi=float(phi))
        win_e, win_l = echo_window_pair(sched, COMB.delta, state, 0.3e-6)
        r_e = simulate(DEVICE, sched, encode(restrict(state, "early"), 0.3e-6), dt=0.5e-9)
        r_l = simulate(DEVICE, sched, encode(restrict(state, "late"), 0.3e-6), dt=0.5e-9)

        def peak_phase(result, window):
            sl = _window_slice(result, window)
            seg = (result.s_T - result.s_in)[sl]
            return float(np.angle(seg[np.argmax(np.abs(seg))]))

        dev = peak_phase(r_l, win_l) - peak_phase(r_e, win_e) - phi
        dev = (dev + math.pi) % (2 * math.pi) - math.pi
        assert dev == pytest.approx(0.0, abs=1e-9)


def test_two_bin_interference_stays_within_ten_percent_of_ideal():
    """The two-bin measurement includes cross-bin leakage interfering with
    each echo; in the half-period configuration it stays a small correction."""
    state = make_state(phi=0.6, sep=0.5 / COMB.delta, fwhm=70e-9)
    sched = timebin_schedule(COMB, state, 0.3e-6, 300e-9)
    result = simulate(DEVICE, sched, encode(state, 0.3e-6), dt=0.5e-9)
    win_e, win_l = echo_window_pair(sched, COMB.delta, state, 0.3e-6, half_width=10e-9)
    ratio, dev = output_state_metrics(result, win_e, win_l, state)
    assert ratio == pytest.approx(1.0, abs=0.1)
    assert abs(dev) < 0.1


def test_leakage_is_symmetric_between_bins():
    """With the bins half a comb period apart each window samples the other
    bin at its darkest point; the residual leakages agree closely."""
    state = make_state(sep=0.5 / COMB.delta, fwhm=70e-9)
    sched = timebin_schedule(COMB, state, 0.3e-6, 300e-9)
    kwargs = dict(t0=0.3e-6, mean_photons=1.0, dt=0.5e-9, half_width=10e-9)
    n_el = leakage_noise(DEVICE, sched, COMB.delta, state, "early", **kwargs)
    n_le = leakage_noise(DEVICE, sched, COMB.delta, state, "late", **kwargs)
    assert n_el == pytest.approx(n_le, rel=0.35)


def test_well_separated_bins_leak_almost_nothing():
    """Once the first bin's emission has rung down (fast internal loss,
    bins many periods apart) nothing reaches the other bin's window."""
    cfg = MemoryConfig.uniform(kappa_i=2e6)
    state = make_state(sep=600e-9, fwhm=40e-9)
    comb = build_comb(4, 8e6)
    sched = static_comb(comb, 2.2e-6)
    n = leakage_noise(cfg, sched, 8e6, state, "early", t0=0.3e-6, dt=0.5e-9)
    assert n < 2e-4


def test_restrict_keeps_one_bin_amplitude():
    state = make_state(a_e=0.6, a_l=0.8)
    early = restrict(state, "early")
    assert (early.a_e, early.a_l) == (0.6, 0.0)
    with pytest.raises(ValidationError):
        restrict(state, "middle")


def test_protocol_report_reaches_high_fidelity_with_storage():
    state = make_state(phi=1.0, sep=0.5 / COMB.delta, fwhm=70e-9)
    sched = timebin_schedule(COMB, state, 0.3e-6, 300e-9)
    report = run_protocol(DEVICE, sched, COMB.delta, state, 0.3e-6, dt=0.5e-9,
                          half_width=10e-9)
    assert report.fidelity_early > 0.99
    assert report.fidelity_late > 0.99
    assert report.amplitude_ratio == pytest.approx(1.0, abs=0.1)
    assert abs(report.phase_deviation) < 0.1
    assert report.storage_time == pytest.approx(1 / COMB.delta + 300e-9, rel=1e-6)
