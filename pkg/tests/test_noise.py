import math

import numpy as np
import pytest

from cfqsim import engine
from cfqsim.errors import RangeError, UndefinedVisibilityError
from cfqsim.noise import (
    LockController,
    apply_visibility,
    calibrate_visibility,
    coincidence_filter,
    counterfactual_violation,
    drift_step,
    estimate_visibility,
    heralded_rate,
    identification_rates,
    lock_step,
    sample_source,
    simulate_lock_run,
    visibility_from_phase,
)
from cfqsim.optics import H, ModeId, new_single_photon
from cfqsim.scenario import (
    SourceModel,
    builtin_scenarios,
    with_visibility,
)

SLAZ = builtin_scenarios()["slaz_m4n2"]
PLAIN_MZ = builtin_scenarios()["plain_mz"]


# ---------------------------------------------------------------------------
# drift and lock

def test_drift_step_zero_sigma():
    rng = np.random.default_rng(1)
    assert drift_step(0.7, 0.0, rng) == 0.7


def test_drift_step_increment_statistics():
    rng = np.random.default_rng(7)
    sigma = 0.05
    phase = 0.0
    increments = []
    for _ in range(100_000):
        new = drift_step(phase, sigma, rng)
        increments.append(new - phase)
        phase = new
    var = np.var(increments)
    assert abs(var - sigma**2) / sigma**2 < 0.05


def test_drift_step_reproducible():
    a = [drift_step(0.0, 0.1, np.random.default_rng(42)) for _ in range(3)]
    assert a[0] == a[1] == a[2]
    with pytest.raises(RangeError):
        drift_step(0.0, -1.0, np.random.default_rng(0))


def test_lock_step_proportional():
    ctrl = LockController(gain=0.5, actuator_range=1.0)
    assert lock_step(ctrl, 0.0) == 0.0
    assert lock_step(ctrl, 0.2) == pytest.approx(-0.1)


def test_lock_step_clamps_to_actuator_range():
    ctrl = LockController(gain=2.0, actuator_range=0.3)
    assert lock_step(ctrl, 10.0) == -0.3
    assert lock_step(ctrl, -10.0) == 0.3


def test_lock_controller_validation():
    with pytest.raises(RangeError):
        LockController(gain=0.0)
    with pytest.raises(RangeError):
        LockController(actuator_range=-1.0)


def test_visibility_estimator():
    assert estimate_visibility(1.0, 0.0) == 1.0
    assert estimate_visibility(0.5, 0.5) == 0.0
    with pytest.raises(UndefinedVisibilityError):
        estimate_visibility(0.0, 0.0)
    with pytest.raises(RangeError):
        estimate_visibility(-1.0, 0.5)


def test_visibility_from_phase():
    assert visibility_from_phase(0.0, ceiling=0.98) == pytest.approx(0.98)
    assert visibility_from_phase(math.pi / 2) == pytest.approx(0.0, abs=1e-12)


def test_lock_run_meets_visibility_targets():
    locked = simulate_lock_run(locked=True, seed=11)
    unlocked = simulate_lock_run(locked=False, seed=11)
    assert locked.mean() >= 0.98
    assert locked.min() >= 0.95
    assert unlocked.mean() < 0.9
    assert unlocked.mean() < locked.mean()


def test_lock_run_sigma_zero_is_constant_ceiling():
    series = simulate_lock_run(steps=50, sigma=0.0, locked=True, seed=3)
    assert np.all(series == series[0])


# ---------------------------------------------------------------------------
# visibility applied to interferometers

def test_apply_visibility_identity_at_unity():
    state = new_single_photon(ModeId("a", H, 0))
    out, diverted = apply_visibility(state, [ModeId("a", H, 0)], [ModeId("b", H, 0)], 1.0)
    assert diverted == 0.0
    assert out.amplitude(ModeId("a", H, 0)) == 1.0
    with pytest.raises(RangeError):
        apply_visibility(state, [ModeId("a", H, 0)], [ModeId("b", H, 0)], 1.5)


def test_apply_visibility_diverts_complement():
    state = new_single_photon(ModeId("a", H, 0))
    out, diverted = apply_visibility(state, [ModeId("a", H, 0)], [], 0.75)
    assert diverted == pytest.approx(0.25)
    assert abs(out.amplitude(ModeId("a", H, 0))) ** 2 == pytest.approx(0.75)


def test_plain_mz_measures_contrast_equal_to_v():
    for v in (1.0, 0.98, 0.6):
        program = engine.compile_scenario(with_visibility(PLAIN_MZ, v), 0)
        result = engine.run_exact(program)
        bright, dark = result.probs["D0"], result.probs["D1"]
        contrast = (bright - dark) / (bright + dark)
        assert contrast == pytest.approx(v, abs=1e-9)


def test_plain_mz_no_interference_at_zero_visibility():
    program = engine.compile_scenario(with_visibility(PLAIN_MZ, 0.0), 0)
    result = engine.run_exact(program)
    assert result.probs["D0"] == pytest.approx(0.5, abs=1e-9)
    assert result.probs["D1"] == pytest.approx(0.5, abs=1e-9)


def test_identification_degrades_monotonically():
    grid = np.linspace(1.0, 0.85, 16)
    id0s, id1s = zip(*(identification_rates(SLAZ, float(v)) for v in grid))
    assert all(a >= b - 1e-12 for a, b in zip(id0s, id0s[1:]))
    assert all(a >= b - 1e-12 for a, b in zip(id1s, id1s[1:]))
    assert id0s[0] == pytest.approx(0.853553, abs=1e-6)
    assert id1s[0] == pytest.approx(1.0, abs=1e-12)


def test_identification_degrades_with_both_interferometers_noisy():
    grid = np.linspace(1.0, 0.85, 16)
    pairs = [identification_rates(SLAZ, float(v), include_inner_visibility=True)
             for v in grid]
    id0s, id1s = zip(*pairs)
    assert all(a >= b - 1e-12 for a, b in zip(id0s, id0s[1:]))
    assert all(a >= b - 1e-12 for a, b in zip(id1s, id1s[1:]))
    # degrading the inner interferometer as well never helps
    outer_only = [identification_rates(SLAZ, float(v)) for v in grid]
    assert all(b[0] <= a[0] + 1e-12 for a, b in zip(outer_only, pairs))


def test_calibration_finds_visibility_matching_both_rates():
    report = calibrate_visibility(SLAZ)
    assert 0.90 <= report.visibility <= 1.0
    assert report.within_tolerance
    assert abs(report.residual_logic0) <= 0.02
    assert abs(report.residual_logic1) <= 0.02
    assert set(report.sensitivity) == {"outer_only", "outer_and_inner"}


# ---------------------------------------------------------------------------
# sources and coincidences

def test_heralded_source_rate():
    model = SourceModel(kind="heralded", pair_rate=2e7,
                        coupling_efficiency=0.3, herald_detector_efficiency=0.6)
    assert heralded_rate(model) == pytest.approx(3.6e6)
    rng = np.random.default_rng(5)
    events = sample_source(model, duration=1.0, rng=rng)
    assert abs(len(events) - 3.6e6) / 3.6e6 < 0.02
    assert np.all(np.diff(events) >= 0)


def test_heralded_rate_scales_linearly():
    base = SourceModel(kind="heralded", pair_rate=1e6)
    double = SourceModel(kind="heralded", pair_rate=2e6)
    rng1, rng2 = np.random.default_rng(8), np.random.default_rng(9)
    n1 = len(sample_source(base, duration=1.0, rng=rng1))
    n2 = len(sample_source(double, duration=1.0, rng=rng2))
    assert abs(n2 - 2 * n1) / (2 * n1) < 0.05


def test_coherent_source_zero_mean_never_counts():
    model = SourceModel(kind="coherent", mean_photon_number=0.0)
    counts = sample_source(model, trials=1000, rng=np.random.default_rng(2))
    assert counts.sum() == 0


def test_coincidence_filter_window():
    heralds = np.array([0.0, 1.0, 2.0])
    window = 1e-6
    accepted = coincidence_filter(heralds, np.array([1.0]), window)
    assert accepted.tolist() == [1.0]
    rejected = coincidence_filter(heralds, np.array([1.0 + 2 * window]), window)
    assert rejected.size == 0


def test_coincidence_filter_requires_sorted_inputs():
    with pytest.raises(RangeError):
        coincidence_filter(np.array([1.0, 0.5]), np.array([0.1]), 1e-6)
    with pytest.raises(RangeError):
        coincidence_filter(np.array([0.5]), np.array([0.1]), 0.0)


def test_accidental_coincidences_follow_poisson_estimate():
    # 1e6 heralds, dark rate 100/s, 1 ns window: ~0.1 expected accidentals
    rng = np.random.default_rng(21)
    duration = 1.0
    heralds = np.sort(rng.uniform(0.0, duration, 1_000_000))
    darks = np.sort(rng.uniform(0.0, duration, rng.poisson(100 * duration)))
    accepted = coincidence_filter(heralds, darks, 1e-9)
    assert accepted.size <= 3


# ---------------------------------------------------------------------------
# counterfactual violation

def test_single_photon_joint_violation_is_exactly_zero():
    heralded = SourceModel(kind="heralded")
    for scenario in builtin_scenarios().values():
        for logic in (0, 1):
            assert counterfactual_violation(scenario, logic, heralded) == 0.0


def test_coherent_light_violates_counterfactuality():
    coherent = SourceModel(kind="coherent", mean_photon_number=1.0)
    assert counterfactual_violation(SLAZ, 0, coherent) > 0.0
    assert counterfactual_violation(SLAZ, 1, coherent) > 0.0


def test_coherent_violation_vanishes_with_mean_photon_number():
    previous = 0.0
    for mu in (1e-6, 1e-4, 1e-2, 0.3, 1.0):
        value = counterfactual_violation(
            SLAZ, 0, SourceModel(kind="coherent", mean_photon_number=mu))
        assert value > previous
        previous = value
    assert counterfactual_violation(
        SLAZ, 0, SourceModel(kind="coherent", mean_photon_number=0.0)) == 0.0
