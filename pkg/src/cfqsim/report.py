"""Canonical JSON report serialization.

Reports are emitted with sorted keys and a trailing newline so that runs
with identical seeds produce byte-identical files.  Wall-clock timing is
never serialized (it goes to stderr) for the same reason.
"""
from __future__ import annotations

import json
from typing import Any

REPORT_FORMAT_VERSION = 1


def dumps(payload: dict[str, Any]) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def run_report(
    scenario_name: str,
    scenario_hash: str,
    logic: int,
    result,
    seed: int | None,
    trials: int | None,
    counts: dict[str, int] | None,
    noise,
) -> dict[str, Any]:
    monte_carlo = None
    if counts is not None:
        monte_carlo = {"trials": trials, "seed": seed, "counts": counts}
    return {
        "kind": "run_report",
        "format_version": REPORT_FORMAT_VERSION,
        "scenario": scenario_name,
        "scenario_hash": scenario_hash,
        "logic": logic,
        "seed": seed,
        "exact": {
            "probabilities": result.probs,
            "sinks": result.sinks,
            "residual": result.residual,
            "conclusive": result.conclusive,
            "conditional": result.conditional,
            "channel_exposure": result.channel_exposure,
        },
        "monte_carlo": monte_carlo,
        "noise": noise_echo(noise),
        "wall_time_s": None,
    }


def noise_echo(noise) -> dict[str, Any]:
    return {
        "visibility": noise.visibility,
        "phase_drift_sigma": noise.phase_drift_sigma,
        "detector_efficiency": noise.detector_efficiency,
        "dark_rate": noise.dark_rate,
        "coincidence_window": noise.coincidence_window,
        "source": {
            "kind": noise.source.kind,
            "pair_rate": noise.source.pair_rate,
            "coupling_efficiency": noise.source.coupling_efficiency,
            "herald_detector_efficiency": noise.source.herald_detector_efficiency,
            "mean_photon_number": noise.source.mean_photon_number,
        },
    }


def audit_report(
    scenario_name: str,
    scenario_hash: str,
    audit,
    violation: dict[str, Any],
) -> dict[str, Any]:
    return {
        "kind": "audit_report",
        "format_version": REPORT_FORMAT_VERSION,
        "scenario": scenario_name,
        "scenario_hash": scenario_hash,
        "logic": audit.logic,
        "blocking": audit.blocking,
        "detectors": {
            name: {
                "traversing_amplitude": d.traversing_amplitude,
                "non_traversing_amplitude": d.non_traversing_amplitude,
                "traversing_share": d.traversing_share,
                "probability": d.probability,
            }
            for name, d in audit.detectors.items()
        },
        "joint_absorbed_and_conclusive": audit.joint_absorbed_and_conclusive,
        "df_only_claim_holds": audit.df_only_claim_holds,
        "path_count": audit.path_count,
        "violation": violation,
    }


def calibration_report(scenario_name: str, scenario_hash: str, report) -> dict[str, Any]:
    payload = report.to_dict()
    payload.update({
        "kind": "calibration_report",
        "format_version": REPORT_FORMAT_VERSION,
        "scenario": scenario_name,
        "scenario_hash": scenario_hash,
    })
    return payload


def image_stats_report(
    scenario_name: str,
    scenario_hash: str,
    seed: int,
    width: int,
    height: int,
    stats,
) -> dict[str, Any]:
    payload = stats.to_dict()
    payload.update({
        "kind": "image_stats",
        "format_version": REPORT_FORMAT_VERSION,
        "scenario": scenario_name,
        "scenario_hash": scenario_hash,
        "seed": seed,
        "width": width,
        "height": height,
    })
    return payload
