"""Instrumentation models: phase drift, active locking, visibility,
photon sources, coincidence filtering, and the counterfactuality check
for classical light.

All sampling functions take an explicit numpy Generator; nothing here
keeps hidden random state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import engine
from .errors import RangeError, UndefinedVisibilityError
from .optics import ModeState
from .scenario import (
    COHERENT,
    HERALDED,
    Scenario,
    SourceModel,
    builtin_scenarios,
    with_visibility,
)


# --------------------------------------------------------------------------
# phase drift and the lock loop

def drift_step(phase: float, sigma: float, rng: np.random.Generator) -> float:
    """One Gaussian random-walk step of the interferometer phase."""
    if sigma < 0.0:
        raise RangeError("sigma must be >= 0")
    if sigma == 0.0:
        return phase
    return phase + rng.normal(0.0, sigma)


@dataclass(frozen=True)
class LockController:
    gain: float = 0.6
    setpoint_phase: float = 0.0
    actuator_range: float = 0.5
    sample_period: int = 1

    def __post_init__(self):
        if self.gain <= 0.0:
            raise RangeError("gain must be > 0")
        if self.actuator_range <= 0.0:
            raise RangeError("actuator_range must be > 0")
        if self.sample_period < 1:
            raise RangeError("sample_period must be >= 1")


def lock_step(controller: LockController, measured_phase_error: float) -> float:
    """Proportional correction, clamped to the actuator range."""
    correction = -controller.gain * measured_phase_error
    return max(-controller.actuator_range,
               min(controller.actuator_range, correction))


def estimate_visibility(i_max: float, i_min: float) -> float:
    """(I_max - I_min) / (I_max + I_min) from two output intensities."""
    if i_max < 0.0 or i_min < 0.0:
        raise RangeError("intensities must be >= 0")
    total = i_max + i_min
    if total == 0.0:
        raise UndefinedVisibilityError("both intensities are zero")
    return (i_max - i_min) / total


def visibility_from_phase(phi: float, ceiling: float = 1.0) -> float:
    """|cos(phi)| scaled by the static visibility ceiling."""
    if not 0.0 <= ceiling <= 1.0:
        raise RangeError("ceiling must be in [0, 1]")
    return ceiling * abs(math.cos(phi))


DEFAULT_LOCK_STEPS = 25 * 60      # one sample per second for 25 minutes
DEFAULT_DRIFT_SIGMA = 0.06        # rad per step; unlocked mean falls below 0.9
DEFAULT_CEILING = 0.985


def simulate_lock_run(
    steps: int = DEFAULT_LOCK_STEPS,
    sigma: float = DEFAULT_DRIFT_SIGMA,
    locked: bool = True,
    seed: int = 0,
    controller: LockController | None = None,
    ceiling: float = DEFAULT_CEILING,
) -> np.ndarray:
    """Visibility time series of a drifting interferometer, optionally
    under the proportional lock."""
    if steps < 1:
        raise RangeError("steps must be >= 1")
    controller = controller or LockController()
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    phase = 0.0
    series = np.empty(steps, dtype=float)
    for t in range(steps):
        phase = drift_step(phase, sigma, rng)
        if locked and t % controller.sample_period == 0:
            phase += lock_step(controller, phase - controller.setpoint_phase)
        series[t] = visibility_from_phase(phase, ceiling)
    return series


# --------------------------------------------------------------------------
# visibility applied to a state

def apply_visibility(
    state: ModeState, a_modes, b_modes, v: float
) -> tuple[ModeState, float]:
    """Scale the coherent amplitudes of two interferometer arms by sqrt(v).

    Returns the reduced state and the diverted probability, which the
    caller routes into an incoherent background (the engine redistributes
    it over output ports by classical splitting ratios).
    """
    if not 0.0 <= v <= 1.0:
        raise RangeError("visibility must be in [0, 1]")
    out = state.copy()
    diverted = 0.0
    root = math.sqrt(v)
    for mode in tuple(a_modes) + tuple(b_modes):
        amp = out.amplitude(mode)
        if amp != 0:
            diverted += (1.0 - v) * abs(amp) ** 2
            out._set(mode, amp * root)
    return out, diverted


# --------------------------------------------------------------------------
# sources and coincidences

def sample_source(
    model: SourceModel,
    duration: float | None = None,
    trials: int | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Heralded source: sorted herald times over `duration` seconds.
    Coherent source: photon numbers for `trials` pulses."""
    rng = rng if rng is not None else np.random.default_rng(0)
    if model.kind == HERALDED:
        if duration is None or duration <= 0:
            raise RangeError("heralded sampling needs a positive duration")
        rate = (model.pair_rate * model.coupling_efficiency
                * model.herald_detector_efficiency)
        count = rng.poisson(rate * duration)
        return np.sort(rng.uniform(0.0, duration, count))
    if model.kind == COHERENT:
        if trials is None or trials < 1:
            raise RangeError("coherent sampling needs trials >= 1")
        return rng.poisson(model.mean_photon_number, trials)
    raise RangeError(f"unknown source kind {model.kind!r}")


def heralded_rate(model: SourceModel) -> float:
    return (model.pair_rate * model.coupling_efficiency
            * model.herald_detector_efficiency)


def coincidence_filter(
    herald_times: np.ndarray,
    detection_times: np.ndarray,
    window: float,
    bin_delay: float = 0.0,
) -> np.ndarray:
    """Detections within +/- window/2 of (herald + expected delay)."""
    if window <= 0.0:
        raise RangeError("window must be > 0")
    herald_times = np.asarray(herald_times, dtype=float)
    detection_times = np.asarray(detection_times, dtype=float)
    for name, arr in (("herald", herald_times), ("detection", detection_times)):
        if arr.size > 1 and np.any(np.diff(arr) < 0):
            raise RangeError(f"{name} times must be sorted")
    if herald_times.size == 0 or detection_times.size == 0:
        return detection_times[:0]
    expected = herald_times + bin_delay
    idx = np.searchsorted(expected, detection_times)
    lo = np.clip(idx - 1, 0, expected.size - 1)
    hi = np.clip(idx, 0, expected.size - 1)
    nearest = np.minimum(
        np.abs(detection_times - expected[lo]),
        np.abs(detection_times - expected[hi]),
    )
    return detection_times[nearest <= window / 2.0]


# --------------------------------------------------------------------------
# counterfactuality with classical light

def counterfactual_violation(
    scenario: Scenario, logic: int, source: SourceModel
) -> float:
    """Joint probability, in one trial, of energy in the channel at the
    receiver and a conclusive click at the sender.

    A single heralded photon is either absorbed or detected, never both,
    so the joint probability is identically zero.  Classical light splits:
    with mean photon number mu, the channel flux and the conclusive ports
    carry independent Poissonian photon numbers, and the joint probability
    of (>= 1 photon through the receiver's station) and (>= 1 conclusive
    click) is strictly positive at finite M.
    """
    if source.kind == HERALDED:
        return 0.0
    if source.kind != COHERENT:
        raise RangeError(f"unknown source kind {source.kind!r}")
    mu = source.mean_photon_number
    if mu <= 0.0:
        return 0.0
    result = engine.run_exact(engine.compile_scenario(scenario, logic))
    exposure = result.channel_exposure
    conclusive = result.conclusive
    p_channel = 1.0 - math.exp(-mu * exposure)
    p_conclusive = 1.0 - math.exp(-mu * conclusive)
    return p_channel * p_conclusive


# --------------------------------------------------------------------------
# calibration against the observed identification rates

@dataclass
class CalibrationReport:
    visibility: float
    id_logic0: float
    id_logic1: float
    target_logic0: float
    target_logic1: float
    residual_logic0: float
    residual_logic1: float
    within_tolerance: bool
    tolerance: float
    sensitivity: dict

    def to_dict(self) -> dict:
        return {
            "visibility": self.visibility,
            "id_logic0": self.id_logic0,
            "id_logic1": self.id_logic1,
            "target_logic0": self.target_logic0,
            "target_logic1": self.target_logic1,
            "residual_logic0": self.residual_logic0,
            "residual_logic1": self.residual_logic1,
            "within_tolerance": self.within_tolerance,
            "tolerance": self.tolerance,
            "sensitivity": self.sensitivity,
        }


def identification_rates(scenario: Scenario, v: float,
                         include_inner_visibility: bool = False) -> tuple[float, float]:
    """(P(D0|conclusive) at logic 0, P(D1|conclusive) at logic 1) with the
    interference visibility set to v."""
    s = with_visibility(scenario, v)
    r0 = engine.run_exact(engine.compile_scenario(s, 0, include_inner_visibility))
    r1 = engine.run_exact(engine.compile_scenario(s, 1, include_inner_visibility))
    id0 = r0.conditional.get("D0") or 0.0
    id1 = r1.conditional.get("D1") or 0.0
    return id0, id1


def calibrate_visibility(
    scenario: Scenario | None = None,
    target_logic0: float = 0.834,
    target_logic1: float = 0.912,
    bounds: tuple[float, float] = (0.90, 1.0),
    tolerance: float = 0.02,
    grid: int = 201,
) -> CalibrationReport:
    """One-dimensional search for the visibility that reproduces both
    observed identification rates, with residuals reported."""
    scenario = scenario if scenario is not None else builtin_scenarios()["slaz_m4n2"]
    lo, hi = bounds
    best_v, best_err, best_ids = lo, float("inf"), (0.0, 0.0)
    for v in np.linspace(lo, hi, grid):
        id0, id1 = identification_rates(scenario, float(v))
        err = max(abs(id0 - target_logic0), abs(id1 - target_logic1))
        if err < best_err:
            best_v, best_err, best_ids = float(v), err, (id0, id1)
    id0, id1 = best_ids
    inner0, inner1 = identification_rates(scenario, best_v, include_inner_visibility=True)
    sensitivity = {
        "outer_only": {"id_logic0": id0, "id_logic1": id1},
        "outer_and_inner": {"id_logic0": inner0, "id_logic1": inner1},
    }
    return CalibrationReport(
        visibility=best_v,
        id_logic0=id0,
        id_logic1=id1,
        target_logic0=target_logic0,
        target_logic1=target_logic1,
        residual_logic0=id0 - target_logic0,
        residual_logic1=id1 - target_logic1,
        within_tolerance=(abs(id0 - target_logic0) <= tolerance
                          and abs(id1 - target_logic1) <= tolerance),
        tolerance=tolerance,
        sensitivity=sensitivity,
    )
