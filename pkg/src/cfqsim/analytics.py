"""Closed-form results for the nested-Zeno cavity.

These expressions are independent of the engine's transform pipeline and
serve as its oracles: the conditional pass-case success cos^2(pi/2M), the
block-case survival (1-R)^2 R^(M-2) cos^(2(M-1))(pi/2M), the weak
measurement survival cos^(2N)(pi/2N), and the half-mirror figure of merit
(1-R)^2 R^(M-2) whose maximizer is (M-2)/M.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ChannelInfeasibleError, RangeError
from .scenario import CHANNEL_ONLY, FULL_BREAK, Scenario, slaz_ideal

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class IdealProbs:
    p_d0: float
    p_d1: float
    p_df: float
    p_sink: float
    p_d0_given_conclusive: float
    p_d1_given_conclusive: float

    def conclusive(self) -> float:
        return self.p_d0 + self.p_d1


def ideal_pass_success(m: int) -> float:
    """Conditional probability of a D0 click when the channel is clear."""
    if m < 2:
        raise RangeError("m must be >= 2")
    return math.cos(math.pi / (2 * m)) ** 2


def zeno_survival(n: int) -> float:
    """Survival probability of n weak measurements, cos^(2n)(pi/2n)."""
    if n < 1:
        raise RangeError("n must be >= 1")
    return math.cos(math.pi / (2 * n)) ** (2 * n)


def half_mirror_merit(r: float, m: int) -> float:
    """Probability of entering, surviving m-2 internal reflections, and
    exiting at the correct pass: (1-r)^2 r^(m-2)."""
    if m < 3:
        raise RangeError("m must be >= 3")
    if not 0.0 <= r <= 1.0:
        raise RangeError("r must be in [0, 1]")
    return (1.0 - r) ** 2 * r ** (m - 2)


def optimize_half_mirror(m: int, tol: float = 1e-6) -> float:
    """Golden-section argmax of the merit over r in [0, 1]."""
    if m < 3:
        raise RangeError("m must be >= 3")
    lo, hi = 0.0, 1.0
    x1 = hi - GOLDEN * (hi - lo)
    x2 = lo + GOLDEN * (hi - lo)
    f1, f2 = half_mirror_merit(x1, m), half_mirror_merit(x2, m)
    while hi - lo > tol:
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + GOLDEN * (hi - lo)
            f2 = half_mirror_merit(x2, m)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - GOLDEN * (hi - lo)
            f1 = half_mirror_merit(x1, m)
    return 0.5 * (lo + hi)


def ideal_block_probs(m: int, n: int, r: float, model: str = FULL_BREAK) -> IdealProbs:
    """Ideal outcome probabilities when the receiver blocks (logic 1)."""
    if m < 2:
        raise RangeError("m must be >= 2")
    if n < 1:
        raise RangeError("n must be >= 1")
    if not 0.0 <= r <= 1.0:
        raise RangeError("r must be in [0, 1]")
    if model == FULL_BREAK:
        p_d1 = (1.0 - r) ** 2 * r ** (m - 2) * math.cos(math.pi / (2 * m)) ** (2 * (m - 1))
        conclusive = p_d1
        return IdealProbs(
            p_d0=0.0,
            p_d1=p_d1,
            p_df=0.0,
            p_sink=1.0 - p_d1,
            p_d0_given_conclusive=0.0,
            p_d1_given_conclusive=1.0 if conclusive > 0 else 0.0,
        )
    if model == CHANNEL_ONLY:
        # no closed form is claimed for this blocking model; defer to the
        # exact engine run
        from . import engine

        scenario = slaz_ideal(m, n, r, blocking=CHANNEL_ONLY)
        result = engine.run_exact(engine.compile_scenario(scenario, logic=1))
        conclusive = result.conclusive
        return IdealProbs(
            p_d0=result.probs["D0"],
            p_d1=result.probs["D1"],
            p_df=result.probs["Df"],
            p_sink=sum(result.sinks.values()) + result.residual,
            p_d0_given_conclusive=(result.probs["D0"] / conclusive) if conclusive else 0.0,
            p_d1_given_conclusive=(result.probs["D1"] / conclusive) if conclusive else 0.0,
        )
    raise RangeError(f"unknown blocking model {model!r}")


def ideal_pass_probs(m: int, r: float) -> IdealProbs:
    """Ideal outcome probabilities when the channel is clear (logic 0)."""
    if m < 2:
        raise RangeError("m must be >= 2")
    if not 0.0 <= r <= 1.0:
        raise RangeError("r must be in [0, 1]")
    weight = (1.0 - r) ** 2 * r ** (m - 2)
    success = ideal_pass_success(m)
    return IdealProbs(
        p_d0=weight * success,
        p_d1=weight * (1.0 - success),
        p_df=0.0,
        p_sink=1.0 - weight,
        p_d0_given_conclusive=success if weight > 0 else 0.0,
        p_d1_given_conclusive=(1.0 - success) if weight > 0 else 0.0,
    )


def expected_trials_per_bit(probs: IdealProbs) -> float:
    """Mean repeat-until-conclusive attempts, 1 / (p_d0 + p_d1)."""
    conclusive = probs.conclusive()
    if conclusive <= 0.0:
        raise ChannelInfeasibleError("conclusive probability is zero")
    return 1.0 / conclusive


def ideal_probs_for(scenario: Scenario, logic: int) -> IdealProbs:
    """Closed-form probabilities for a nested scenario and logic value."""
    if scenario.kind != "nested":
        raise RangeError("closed forms exist only for nested scenarios")
    if logic == 0:
        return ideal_pass_probs(scenario.m, scenario.half_mirror_r)
    return ideal_block_probs(scenario.m, scenario.n, scenario.half_mirror_r,
                             scenario.blocking)
