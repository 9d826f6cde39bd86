"""Counterfactual-communication interferometer simulator and toolkit."""
from .analytics import (
    IdealProbs,
    expected_trials_per_bit,
    half_mirror_merit,
    ideal_block_probs,
    ideal_pass_probs,
    ideal_pass_success,
    ideal_probs_for,
    optimize_half_mirror,
    zeno_survival,
)
from .engine import (
    AuditReport,
    PathRecord,
    Program,
    RunResult,
    audit_counterfactuality,
    compile_scenario,
    path_sum,
    run_exact,
    run_monte_carlo,
)
from .optics import (
    H,
    V,
    ModeId,
    ModeState,
    absorb,
    apply_jones,
    apply_pbs,
    apply_phase,
    apply_rotation,
    detect,
    hwp,
    mirror,
    new_single_photon,
    qwp,
    rotator,
)
from .protocol import (
    BitTrial,
    ImageStats,
    MonoImage,
    decode_pbm,
    encode_pbm,
    summarize,
    transmit_bit,
    transmit_image,
)
from .noise import (
    CalibrationReport,
    LockController,
    apply_visibility,
    calibrate_visibility,
    coincidence_filter,
    counterfactual_violation,
    drift_step,
    estimate_visibility,
    lock_step,
    sample_source,
    simulate_lock_run,
    visibility_from_phase,
)
from .scenario import (
    NoiseConfig,
    ParseError,
    Scenario,
    ScenarioParseError,
    SourceModel,
    builtin_scenarios,
    parse_scenario,
    scenario_hash,
    serialize_scenario,
    slaz_ideal,
    with_visibility,
)

__version__ = "0.1.0"
