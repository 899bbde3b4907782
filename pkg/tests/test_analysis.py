import math

import numpy as np
import pytest

from combmem import (ConfigurationError, DiagnosticError, MemoryConfig, Pulse,
                     PulseTrain, ValidationError, bandwidth_from_sweep, build_comb,
                     decay_fit, echo_windows, heterodyne_render, phase_difference,
                     simulate, static_comb, storage_efficiency, write_close_read,
                     write_sweep_csv, write_trace_csv)
from combmem.optimizer import first_echo_efficiency

DEVICE = MemoryConfig.uniform()
COMB = build_comb(4, 3.5e6)


def run_device(pulse_kwargs=None, t_end=2e-6, schedule=None, config=DEVICE, dt=0.5e-9):
    kwargs = {"center_time": 0.4e-6, "fwhm": 97e-9}
    kwargs.update(pulse_kwargs or {})
    train = PulseTrain((Pulse(**kwargs),))
    sched = schedule or static_comb(COMB, t_end)
    return simulate(config, sched, train, t_end=t_end, dt=dt), sched, train


# ---------------------------------------------------------------------------
# windows

def test_first_window_tiles_the_comb_period():
    sched = static_comb(COMB, 3e-6)
    (w,) = echo_windows(sched, 3.5e6, 0.4e-6, 1)
    assert w.center - 0.4e-6 == pytest.approx(285.714e-9, rel=1e-4)
    assert (w.t_end - w.t_start) / 2 == pytest.approx(142.857e-9, rel=1e-4)


def test_second_order_window_at_six_megahertz():
    sched = static_comb(build_comb(4, 6e6), 3e-6)
    windows = echo_windows(sched, 6e6, 0.4e-6, 2)
    assert windows[1].center - 0.4e-6 == pytest.approx(333.33e-9, rel=1e-3)


def test_close_stage_shifts_the_window_by_its_duration():
    sched = write_close_read(COMB, 0.55e-6, 0.5e-6, 3e-6)
    (w,) = echo_windows(sched, 3.5e6, 0.4e-6, 1)
    assert w.center - 0.4e-6 == pytest.approx(785.714e-9, rel=1e-4)


def test_window_beyond_schedule_is_a_diagnostic():
    sched = static_comb(COMB, 0.6e-6)
    with pytest.raises(DiagnosticError):
        echo_windows(sched, 3.5e6, 0.4e-6, 1)


# ---------------------------------------------------------------------------
# efficiency

def test_uncoupled_memory_stores_nothing():
    cfg = MemoryConfig.uniform(kappa_c=0.0)
    result, sched, _ = run_device(config=cfg, dt=1e-9)
    windows = echo_windows(sched, COMB.delta, 0.4e-6, 1)
    # emitted field is identically zero; the as-measured window still sees
    # the direct pulse tail, which is all there is without coupling
    assert storage_efficiency(result, windows, emitted=True).efficiency == 0.0
    assert storage_efficiency(result, windows).efficiency < 1e-3


def test_device_efficiency_is_about_twelve_percent():
    result, sched, _ = run_device({"fwhm": 110e-9})
    windows = echo_windows(sched, COMB.delta, 0.4e-6, 1)
    eta = storage_efficiency(result, windows).efficiency
    assert eta == pytest.approx(0.12, abs=0.05)


def test_matched_spacing_beats_half_and_double():
    kappa = 0.55e6
    cfg = MemoryConfig.uniform(kappa_c=kappa, kappa_i=0.0)
    matched = math.pi * kappa / 2.0
    fwhm = 600e-9
    eta = {s: first_echo_efficiency(cfg, s * matched, fwhm) for s in (0.5, 1.0, 2.0)}
    assert eta[1.0] > eta[0.5]
    assert eta[1.0] > eta[2.0]


def test_echo_energies_never_exceed_the_input():
    result, sched, _ = run_device(t_end=3e-6)
    windows = echo_windows(sched, COMB.delta, 0.4e-6, 3)
    m = storage_efficiency(result, windows)
    total = sum(m.energies_T.values()) + sum(m.energies_R.values())
    assert total <= m.input_energy * (1 + 1e-9)


def test_zero_input_energy_is_rejected():
    sched = static_comb(COMB, 1e-6)
    result = simulate(DEVICE, sched, PulseTrain(()), t_end=1e-6, dt=1e-9)
    with pytest.raises(ValidationError):
        storage_efficiency(result, [])


# ---------------------------------------------------------------------------
# phase

def test_echo_phase_tracks_the_input_phase():
    diffs = []
    for phase in np.linspace(0.0, 2.0 * math.pi, 8, endpoint=False):
        result, sched, train = run_device({"phase": float(phase)})
        windows = echo_windows(sched, COMB.delta, 0.4e-6, 1)
        diffs.append(phase_difference(result, windows, train))
    spread = np.ptp(np.unwrap(diffs))
    assert spread < 1e-3


def test_opposite_input_phases_give_opposite_echoes():
    out = []
    for phase in (0.0, math.pi):
        result, sched, _ = run_device({"phase": phase})
        windows = echo_windows(sched, COMB.delta, 0.4e-6, 1)
        m = storage_efficiency(result, windows)
        out.append(m.echo_phase)
    delta = (out[1] - out[0]) % (2 * math.pi)
    assert delta == pytest.approx(math.pi, abs=1e-6)


def test_phase_difference_ignores_the_amplitude():
    vals = []
    for nbar in (1.0, 100.0):
        result, sched, train = run_device({"mean_photon_number": nbar, "phase": 0.3})
        windows = echo_windows(sched, COMB.delta, 0.4e-6, 1)
        vals.append(phase_difference(result, windows, train))
    assert vals[0] == pytest.approx(vals[1], abs=1e-9)


def test_phase_needs_an_echo_to_read():
    cfg = MemoryConfig.uniform(kappa_c=0.0)
    result, sched, train = run_device(config=cfg, dt=1e-9)
    windows = echo_windows(sched, COMB.delta, 0.4e-6, 1)
    with pytest.raises(DiagnosticError):
        phase_difference(result, windows, train)


# ---------------------------------------------------------------------------
# sweeps and fits

def test_bandwidth_knee_on_a_synthetic_saturation_curve():
    fwhm = np.geomspace(20e-9, 400e-9, 15)
    eta = 0.12 * (1.0 - np.exp(-fwhm / 80e-9))
    sweep = bandwidth_from_sweep(fwhm, eta)
    assert sweep.best_efficiency == pytest.approx(float(eta.max()))
    assert eta[list(sweep.axis).index(sweep.knee)] >= 0.95 * sweep.best_efficiency
    assert sweep.bandwidth == pytest.approx(1.0 / sweep.knee)


def test_monotone_rising_sweep_has_no_plateau():
    fwhm = np.geomspace(20e-9, 400e-9, 10)
    eta = np.linspace(0.01, 0.2, 10)
    with pytest.raises(DiagnosticError) as err:
        bandwidth_from_sweep(fwhm, eta)
    assert err.value.partial is not None
    assert err.value.partial.best_efficiency == pytest.approx(0.2)


def test_sweep_must_cover_a_decade():
    with pytest.raises(ValidationError):
        bandwidth_from_sweep([100e-9, 200e-9, 300e-9], [0.1, 0.1, 0.1])


def test_decay_fit_recovers_a_synthetic_time_constant():
    tau = 0.51e-6
    t = np.linspace(0.3e-6, 1.6e-6, 6)
    eta = 0.12 * np.exp(-t / tau)
    assert decay_fit(t, eta) == pytest.approx(tau, rel=1e-9)


def test_flat_decay_reports_infinity():
    t = np.linspace(0.3e-6, 1.5e-6, 5)
    assert decay_fit(t, np.full(5, 0.12)) == math.inf


def test_doubling_the_rate_halves_the_time_constant():
    t = np.linspace(0.2e-6, 1.4e-6, 6)
    tau1 = decay_fit(t, 0.1 * np.exp(-t / 0.5e-6))
    tau2 = decay_fit(t, 0.1 * np.exp(-t / 0.25e-6))
    assert tau2 == pytest.approx(tau1 / 2, rel=1e-9)


def test_rising_decay_data_is_a_diagnostic():
    t = np.linspace(0.2e-6, 1.4e-6, 5)
    with pytest.raises(DiagnosticError):
        decay_fit(t, [0.1, 0.05, 0.2, 0.04, 0.03])


# ---------------------------------------------------------------------------
# heterodyne rendering

def test_heterodyne_envelope_is_the_field_magnitude():
    result, _, _ = run_device(dt=0.5e-9, t_end=1.2e-6)
    trace, envelope = heterodyne_render(result, 80e6)
    assert np.array_equal(envelope, np.abs(result.s_T))
    assert np.all(np.abs(trace) <= envelope + 1e-12)


def test_underresolved_intermediate_frequency_is_rejected():
    result, _, _ = run_device(dt=1e-9, t_end=1.2e-6)
    with pytest.raises(ConfigurationError):
        heterodyne_render(result, 200e6)


def test_zero_field_renders_to_zero():
    cfg = MemoryConfig.uniform(kappa_c=0.0)
    sched = static_comb(COMB, 1e-6)
    result = simulate(cfg, sched, PulseTrain(()), t_end=1e-6, dt=0.5e-9)
    trace, envelope = heterodyne_render(result, 80e6)
    assert np.all(trace == 0) and np.all(envelope == 0)


# ---------------------------------------------------------------------------
# CSV emitters

def test_trace_csv_round_trips(tmp_path):
    path = tmp_path / "trace.csv"
    t = np.array([0.0, 0.5e-9, 1.0e-9])
    s = np.array([1 + 1j, -2 + 0.25j, 0.125 - 4j])
    write_trace_csv(path, t, s)
    lines = path.read_text().splitlines()
    assert lines[0] == "t_s,re,im,abs"
    got = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    assert np.array_equal(got[:, 0], t)
    assert np.array_equal(got[:, 1] + 1j * got[:, 2], s)
    assert np.array_equal(got[:, 3], np.abs(s))


def test_sweep_csv_round_trips(tmp_path):
    path = tmp_path / "sweep.csv"
    write_sweep_csv(path, [1e-9, 2e-9], [0.1, 0.2])
    lines = path.read_text().splitlines()
    assert lines[0] == "axis,eta"
    assert [float(line.split(",")[1]) for line in lines[1:]] == [0.1, 0.2]
