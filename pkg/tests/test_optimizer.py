import math

import numpy as np
import pytest

from combmem import (ConfigurationError, MemoryConfig, Pulse, ValidationError,
                     build_comb, first_echo_efficiency, optimize_delta, optimize_fwhm,
                     sweep_grid)


def test_efficiency_is_independent_of_the_photon_number():
    cfg = MemoryConfig.uniform()
    one = first_echo_efficiency(cfg, 3.5e6, 100e-9, mean_photons=1.0)
    many = first_echo_efficiency(cfg, 3.5e6, 100e-9, mean_photons=100.0)
    assert many == pytest.approx(one, rel=1e-10)


def test_single_resonator_objective_is_flat():
    """One resonator has no comb: past its ring-down there is nothing at any
    comb delay, and the optimizer reports a flat objective."""
    cfg = MemoryConfig.uniform(1, kappa_c=4e6, kappa_i=4e6)
    report = optimize_delta(cfg, Pulse(center_time=0.0, fwhm=40e-9), (0.5e6, 1.5e6), tol=0.2e6)
    assert report.flat
    assert report.evaluations == len(report.trace)


def test_optimum_tracks_the_coupling_rate():
    """Doubling every coupling rate doubles the best comb spacing."""
    fast = dict(tol=0.08e6, emitted=True)
    argmax = {}
    for kappa in (1.2e6, 2.4e6):
        cfg = MemoryConfig.uniform(kappa_c=kappa, kappa_i=0.0)
        matched = math.pi * kappa / 2.0
        pulse = Pulse(center_time=0.0, fwhm=0.8 / matched)
        report = optimize_delta(cfg, pulse, (0.5 * matched, 2.0 * matched), **fast)
        argmax[kappa] = report.best_params["delta_hz"]
        assert report.best_value == pytest.approx(max(v for _, v in report.trace))
    assert argmax[2.4e6] / argmax[1.2e6] == pytest.approx(2.0, rel=0.2)


def test_optimum_beats_the_range_endpoints():
    kappa = 1.2e6
    cfg = MemoryConfig.uniform(kappa_c=kappa, kappa_i=0.0)
    matched = math.pi * kappa / 2.0
    pulse = Pulse(center_time=0.0, fwhm=0.8 / matched)
    report = optimize_delta(cfg, pulse, (0.5 * matched, 2.0 * matched), tol=0.1e6)
    ends = [v for p, v in report.trace
            if p["delta_hz"] in (0.5 * matched, 2.0 * matched)]
    assert report.best_value >= max(ends)


def test_delta_range_validation():
    cfg = MemoryConfig.uniform()
    pulse = Pulse(center_time=0.0, fwhm=100e-9)
    with pytest.raises(ValidationError):
        optimize_delta(cfg, pulse, (2e6, 1e6), tol=1e5)
    with pytest.raises(ValidationError):
        optimize_delta(cfg, pulse, (1e6, 2e6), tol=-1.0)
    with pytest.raises(ConfigurationError):
        optimize_delta(cfg, pulse, (1.0, 2e6), tol=1e5)


def test_plateau_fwhm_for_the_device_comb():
    # measured coupling spread, weak teeth at the comb edges
    kappa_c = (0.25e6, 0.65e6, 0.86e6, 0.45e6)
    cfg = MemoryConfig(n_resonators=4, kappa_c=kappa_c, kappa_i=(0.312e6,) * 4)
    comb = build_comb(4, 3.5e6)
    report = optimize_fwhm(cfg, comb, (0.07 / 3.5e6, 0.7 / 3.5e6))
    assert report.best_params["fwhm_s"] == pytest.approx(100e-9, rel=0.3)
    assert report.best_value == pytest.approx(max(v for _, v in report.trace))


def test_uncoupled_fwhm_objective_is_flat():
    cfg = MemoryConfig.uniform(kappa_c=0.0, kappa_i=0.1e6)
    comb = build_comb(4, 3.5e6)
    report = optimize_fwhm(cfg, comb, (30e-9, 400e-9))
    assert report.flat


def _counting_objective(config, point):
    return point["a"] * 10.0 + point["b"]


def test_grid_sweep_visits_every_point_in_order():
    cfg = MemoryConfig.uniform(1)
    sweep = sweep_grid(cfg, {"a": [1.0, 2.0, 3.0], "b": [0.1, 0.2, 0.3]},
                       objective=_counting_objective)
    assert len(sweep.points) == 9
    assert sweep.values[0] == pytest.approx(10.1)
    assert sweep.values[-1] == pytest.approx(30.3)
    assert sweep.errors == []


def test_grid_sweep_single_point():
    cfg = MemoryConfig.uniform(1)
    sweep = sweep_grid(cfg, {"a": [5.0], "b": [1.0]}, objective=_counting_objective)
    assert len(sweep.points) == 1


def _fragile_objective(config, point):
    if point["a"] > 1.5:
        raise RuntimeError("synthetic failure")
    return point["a"]


def test_grid_sweep_records_failures_without_dying():
    cfg = MemoryConfig.uniform(1)
    sweep = sweep_grid(cfg, {"a": [1.0, 2.0]}, objective=_fragile_objective)
    assert sweep.values[0] == pytest.approx(1.0)
    assert math.isnan(sweep.values[1])
    assert sweep.errors[0][0] == 1 and "synthetic failure" in sweep.errors[0][1]


def test_parallel_sweep_matches_serial():
    cfg = MemoryConfig.uniform(1)
    serial = sweep_grid(cfg, {"a": [1.0, 2.0], "b": [0.5, 0.25]},
                        objective=_counting_objective, jobs=1)
    parallel = sweep_grid(cfg, {"a": [1.0, 2.0], "b": [0.5, 0.25]},
                          objective=_counting_objective, jobs=2)
    assert serial.values == parallel.values
    assert serial.points == parallel.points
