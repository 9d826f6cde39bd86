"""Compile scenarios into transform programs and execute them.

Three execution modes share one compiled Program:

* ``run_exact``       -- deterministic amplitude evolution,
* ``run_monte_carlo`` -- seeded sampling of trial outcomes,
* ``path_sum``        -- explicit enumeration of discrete arm-choice paths,
  used as the independent oracle for ``run_exact`` and for the
  counterfactuality audit.

Nested-cavity layout
--------------------

The photon enters through a partially transmissive mirror (reflectivity R),
makes M-1 passes and exits through the same mirror, so the correct exit
carries weight (1-R)^2 R^(M-2).  Per pass, a polarization rotation of
pi/2M plays the role of the outer beam splitter; the V component then
traverses the inner interferometer: N rotation stages of pi/2N between the
local arm ``r2`` and the transmission channel ``r3``, a station at ``r3``
where the receiving side may absorb, and a mirrored return leg.  With the
channel clear the traversal is an exact identity, so the cavity state
accumulates a free rotation and exits with conditional success
cos^2(pi/2M).  With blocking, nothing V-polarized survives a pass
(``fullbreak``) or a residue cos^(2N)(pi/2N) survives (``channelonly``).
The exit splitter routes V to D0 and H to D1; inner light that ends on the
channel-side port leaves toward Df.  Light exiting after the wrong number
of passes is collected in the ``wrong_bin`` sink (time-bin selection).

Imperfect interference (visibility v < 1) diverts probability into an
incoherent, depolarized background that is tracked classically alongside
the amplitudes: it follows mirror splitting ratios, never re-joins the
cavity coherently (inner-region background exits to Df or the blocking
dump), scatters off the blocking dump with weight 1-v, and splits evenly
at the exit splitter.  The model is calibrated, not microscopic; its one
anchor is that a plain two-arm interferometer measures contrast exactly v.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    NumericalIntegrityError,
    PathSumBoundError,
    RangeError,
)
from .optics import H, V, ModeId, ModeState, new_single_photon
from .scenario import (
    COHERENT,
    FULL_BREAK,
    NoiseConfig,
    Scenario,
    SourceModel,
)

SINK_BLOCK = "bob_block"
SINK_WRONG_BIN = "wrong_bin"

PATH_SUM_MAX_CHOICES = 24

BucketKey = tuple[str, int]


@dataclass(frozen=True)
class Stage:
    """One primitive transform plus its classical-background rule."""

    kind: str  # rot | phase | pbs | absorb | advance | vis | station
    modes: tuple[ModeId, ...] = ()
    cos: float = 1.0
    sin: float = 0.0
    phi: float = 0.0
    fraction: float = 0.0
    sink: str = ""
    scatter: float = 0.0            # absorbed fraction re-emitted as background
    scatter_key: BucketKey | None = None
    visibility: float = 1.0
    bucket: tuple | None = None     # classical rule, see _apply_bucket_rule
    exposure: bool = False          # stage meters channel flux at the receiver
    cycle: int = 0                  # outer cycle index (1-based; 0 = outside)


@dataclass
class Program:
    stages: list[Stage]
    ports: dict[str, frozenset[ModeId]]
    channel_paths: frozenset[str]
    cycle_bounds: list[int]
    input_mode: ModeId
    scenario: Scenario
    logic: int
    conclusive_detectors: tuple[str, ...] = ("D0", "D1")

    @property
    def channel_modes(self) -> frozenset[ModeId]:
        modes = set()
        for stage in self.stages:
            for m in stage.modes:
                if m.path in self.channel_paths:
                    modes.add(m)
        return frozenset(modes)


@dataclass
class RunResult:
    probs: dict[str, float]
    sinks: dict[str, float]
    residual: float
    conclusive: float
    conditional: dict[str, float | None]
    channel_exposure: float
    coherent_probs: dict[str, float]
    background_probs: dict[str, float]


@dataclass(frozen=True)
class PathRecord:
    """One discrete arm-choice history with its complex amplitude.

    `choices` holds (cycle, branch) pairs, one per branching element the
    path met; cycle 0 marks elements outside the outer cycles.
    """

    choices: tuple[tuple[int, int], ...]
    amplitude: complex
    final_mode: ModeId | None          # set when the path reaches program end
    sink_event: tuple[str, int, ModeId] | None  # (sink, stage index, mode)
    port: str                          # detector name, "sink:<name>", or "mode:<...>"
    traversed_channel: bool

    def choices_by_cycle(self) -> dict[int, tuple[int, ...]]:
        grouped: dict[int, list[int]] = {}
        for cycle, branch in self.choices:
            grouped.setdefault(cycle, []).append(branch)
        return {cycle: tuple(branches) for cycle, branches in grouped.items()}


@dataclass
class DetectorAudit:
    """Channel-traversing vs non-traversing decomposition of one port.

    The two classes interfere, so `probability` (the physical port
    probability) is not their sum; `traversing_share` is defined on the
    incoherent split p_trav / (p_trav + p_non) to stay within [0, 1].
    """

    traversing_amplitude: float
    non_traversing_amplitude: float
    traversing_share: float
    probability: float


@dataclass
class AuditReport:
    detectors: dict[str, DetectorAudit]
    joint_absorbed_and_conclusive: float
    df_only_claim_holds: bool
    logic: int
    blocking: str
    path_count: int


def _snap(x: float) -> float:
    for target in (0.0, 1.0, -1.0):
        if abs(x - target) < 1e-15:
            return target
    return x


def _trig(theta: float) -> tuple[float, float]:
    return _snap(math.cos(theta)), _snap(math.sin(theta))


# --------------------------------------------------------------------------
# compilation

def compile_scenario(
    s: Scenario, logic: int, include_inner_visibility: bool = False
) -> Program:
    """Instantiate the transform program for one logic value."""
    if logic not in (0, 1):
        raise RangeError(f"logic must be 0 or 1, got {logic}")
    if s.kind == "custom":
        return _compile_custom(s)
    return _compile_nested(s, logic, include_inner_visibility)


def _compile_custom(s: Scenario) -> Program:
    v = s.noise.visibility
    stages: list[Stage] = []
    for spec in s.stages:
        modes = tuple(ModeId(p, H, 0) for p in spec.paths)
        keys = tuple((p, 0) for p in spec.paths)
        if spec.kind == "bs":
            c, sn = _trig(spec.param("theta"))
            stages.append(Stage("rot", modes, cos=c, sin=sn,
                                bucket=("mix", keys[0], keys[1], c * c)))
        elif spec.kind == "phase":
            stages.append(Stage("phase", modes, phi=spec.param("phi")))
        elif spec.kind == "absorb":
            fraction = spec.param("fraction", 1.0)
            stages.append(Stage("absorb", modes, fraction=fraction, sink=spec.sink,
                                bucket=("sink", keys[0], spec.sink, fraction)))
        elif spec.kind == "vis":
            stages.append(Stage("vis", modes, visibility=v,
                                bucket=("vis", keys[0], keys[1])))
    ports = {
        name: frozenset(ModeId(p, H, 0) for p in paths)
        for name, paths in s.detectors
    }
    detector_names = tuple(name for name, _ in s.detectors)
    conclusive = tuple(n for n in ("D0", "D1") if n in ports) or detector_names
    return Program(
        stages=stages,
        ports=ports,
        channel_paths=frozenset(),
        cycle_bounds=[],
        input_mode=ModeId(s.paths[0], H, 0),
        scenario=s,
        logic=0,
        conclusive_detectors=conclusive,
    )


def _compile_nested(s: Scenario, logic: int, include_inner_vis: bool) -> Program:
    m, n, r = s.m, s.n, s.half_mirror_r
    v = s.noise.visibility
    theta_m = s.outer_angle
    theta_n = s.inner_angle
    # Half mirror as a beam splitter: amplitude sqrt(r) stays inside.
    hm_cos, hm_sin = _snap(math.sqrt(r)), _snap(math.sqrt(1.0 - r))
    blocking = logic == 1
    full_break = blocking and s.blocking == FULL_BREAK
    scatter = (1.0 - v) if blocking else 0.0

    stages: list[Stage] = []
    cycle_bounds: list[int] = []

    src0, cav0 = ModeId("src", H, 0), ModeId("cav", H, 0)
    stages.append(Stage("rot", (src0, cav0), cos=hm_cos, sin=hm_sin))
    stages.append(Stage("absorb", (src0,), fraction=1.0, sink=SINK_WRONG_BIN,
                        bucket=("sink", ("src", 0), SINK_WRONG_BIN, 1.0)))

    for k in range(1, m):
        t = k - 1
        cav_h, cav_v = ModeId("cav", H, t), ModeId("cav", V, t)
        r2, r3, fd = ModeId("r2", V, t), ModeId("r3", V, t), ModeId("fd", V, t)
        cav_key, r2_key, r3_key, fd_key = ("cav", t), ("r2", t), ("r3", t), ("fd", t)

        cycle_bounds.append(len(stages))
        stages.append(Stage("rot", (cav_h, cav_v), cos=_snap(math.cos(theta_m)),
                            sin=_snap(math.sin(theta_m)), cycle=k))
        if v < 1.0:
            stages.append(Stage("vis", (cav_h, cav_v), visibility=v, cycle=k,
                                bucket=("vis", cav_key, cav_key)))
        # into the inner interferometer (background enters with its V share)
        stages.append(Stage("rot", (cav_v, r2), cos=0.0, sin=1.0, cycle=k,
                            bucket=("move", cav_key, r2_key, 0.5)))
        inner_cos, inner_sin = _trig(theta_n)
        for _ in range(n):
            stages.append(Stage("rot", (r2, r3), cos=inner_cos, sin=inner_sin,
                                cycle=k, bucket=("mix", r2_key, r3_key, inner_cos ** 2)))
            if blocking:
                stages.append(Stage("absorb", (r3,), fraction=1.0, sink=SINK_BLOCK,
                                    scatter=scatter, scatter_key=cav_key,
                                    exposure=True, cycle=k,
                                    bucket=("sink", r3_key, SINK_BLOCK, 1.0)))
            else:
                stages.append(Stage("station", (r3,), exposure=True, cycle=k))
        if include_inner_vis and v < 1.0:
            stages.append(Stage("vis", (r2, r3), visibility=v, cycle=k,
                                bucket=("vis", r2_key, r3_key)))
        if full_break:
            stages.append(Stage("absorb", (r2,), fraction=1.0, sink=SINK_BLOCK,
                                scatter=scatter, scatter_key=cav_key, cycle=k,
                                bucket=("sink", r2_key, SINK_BLOCK, 1.0)))
        # return leg: exact inverse chain; with blocking the dump acts on
        # each step of the retrace as well
        if blocking:
            if not full_break:
                for _ in range(n):
                    stages.append(Stage("absorb", (r3,), fraction=1.0, sink=SINK_BLOCK,
                                        scatter=scatter, scatter_key=cav_key,
                                        exposure=True, cycle=k,
                                        bucket=("sink", r3_key, SINK_BLOCK, 1.0)))
                    stages.append(Stage("rot", (r2, r3), cos=inner_cos, sin=-inner_sin,
                                        cycle=k, bucket=("mix", r2_key, r3_key, inner_cos ** 2)))
        else:
            rc, rs = _trig(-n * theta_n)
            stages.append(Stage("rot", (r2, r3), cos=rc, sin=rs, cycle=k,
                                bucket=("mix", r2_key, r3_key, rc * rc)))
        # recombine: the local-arm port re-joins the cavity, the channel-side
        # port leaves toward Df; background never re-joins coherent light
        bucket_dest_sink = blocking
        stages.append(Stage(
            "rot", (r2, cav_v), cos=0.0, sin=1.0, cycle=k,
            bucket=("sink", r2_key, SINK_BLOCK, 1.0) if bucket_dest_sink
            else ("move", r2_key, fd_key, 1.0),
        ))
        stages.append(Stage(
            "rot", (r3, fd), cos=0.0, sin=1.0, cycle=k,
            bucket=("sink", r3_key, SINK_BLOCK, 1.0) if bucket_dest_sink
            else ("move", r3_key, fd_key, 1.0),
        ))
        # round trip complete: advance the cavity time bin, then the mirror
        stages.append(Stage("advance", (ModeId("cav", H, t),), cycle=k))
        t2 = k
        cav_h2, cav_v2 = ModeId("cav", H, t2), ModeId("cav", V, t2)
        out_h, out_v = ModeId("out", H, t2), ModeId("out", V, t2)
        stages.append(Stage("rot", (cav_h2, out_h), cos=hm_cos, sin=hm_sin, cycle=k,
                            bucket=("move", ("cav", t2), ("out", t2), 1.0 - r)))
        stages.append(Stage("rot", (cav_v2, out_v), cos=hm_cos, sin=hm_sin, cycle=k))
        if k < m - 1:
            stages.append(Stage("absorb", (out_h,), fraction=1.0, sink=SINK_WRONG_BIN,
                                cycle=k, bucket=("sink", ("out", t2), SINK_WRONG_BIN, 1.0)))
            stages.append(Stage("absorb", (out_v,), fraction=1.0, sink=SINK_WRONG_BIN,
                                cycle=k))

    t_exit = m - 1
    stages.append(Stage("absorb", (ModeId("cav", H, t_exit),), fraction=1.0,
                        sink=SINK_WRONG_BIN,
                        bucket=("sink", ("cav", t_exit), SINK_WRONG_BIN, 1.0)))
    stages.append(Stage("absorb", (ModeId("cav", V, t_exit),), fraction=1.0,
                        sink=SINK_WRONG_BIN))
    stages.append(Stage(
        "pbs",
        (ModeId("out", H, t_exit), ModeId("d1", H, t_exit),
         ModeId("out", V, t_exit), ModeId("d0", V, t_exit)),
        bucket=("scramble", ("out", t_exit), ("d0", t_exit), ("d1", t_exit)),
    ))

    ports = {
        "D0": frozenset({ModeId("d0", V, t_exit)}),
        "D1": frozenset({ModeId("d1", H, t_exit)}),
        "Df": frozenset(ModeId("fd", V, t) for t in range(m - 1)),
    }
    return Program(
        stages=stages,
        ports=ports,
        channel_paths=frozenset({"r3"}),
        cycle_bounds=cycle_bounds,
        input_mode=ModeId("src", H, 0),
        scenario=s,
        logic=logic,
    )


# --------------------------------------------------------------------------
# exact evolution

def _apply_bucket_rule(bucket: dict[BucketKey, float], rule: tuple,
                       sinks: dict[str, float]) -> None:
    op = rule[0]
    if op == "mix":
        _, ka, kb, c2 = rule
        pa, pb = bucket.get(ka, 0.0), bucket.get(kb, 0.0)
        if pa or pb:
            bucket[ka] = c2 * pa + (1.0 - c2) * pb
            bucket[kb] = (1.0 - c2) * pa + c2 * pb
    elif op == "move":
        _, src, dst, frac = rule
        p = bucket.get(src, 0.0)
        if p:
            moved = p * frac
            bucket[src] = p - moved
            bucket[dst] = bucket.get(dst, 0.0) + moved
    elif op == "sink":
        _, key, sink, frac = rule
        p = bucket.get(key, 0.0)
        if p:
            taken = p * frac
            bucket[key] = p - taken
            sinks[sink] = sinks.get(sink, 0.0) + taken
    elif op == "scramble":
        _, src, d0, d1 = rule
        p = bucket.pop(src, 0.0)
        if p:
            bucket[d0] = bucket.get(d0, 0.0) + 0.5 * p
            bucket[d1] = bucket.get(d1, 0.0) + 0.5 * p


def run_exact(program: Program, input_state: ModeState | None = None) -> RunResult:
    """Deterministic evolution of amplitudes plus classical background."""
    state = input_state.copy() if input_state is not None else new_single_photon(program.input_mode)
    if abs(state.total_norm() - 1.0) > 1e-9:
        raise NumericalIntegrityError("input state is not normalized")
    amps: dict[ModeId, complex] = dict(state.amplitudes)
    sinks: dict[str, float] = dict(state.sinks)
    bucket: dict[BucketKey, float] = {}
    exposure = 0.0

    def norm() -> float:
        return (sum(abs(a) ** 2 for a in amps.values())
                + sum(sinks.values()) + sum(bucket.values()))

    for idx, stage in enumerate(program.stages):
        kind = stage.kind
        if kind == "rot":
            a, b = stage.modes
            aa, ab = amps.pop(a, 0j), amps.pop(b, 0j)
            na = stage.cos * aa - stage.sin * ab
            nb = stage.sin * aa + stage.cos * ab
            if na != 0:
                amps[a] = na
            if nb != 0:
                amps[b] = nb
        elif kind == "phase":
            mode = stage.modes[0]
            if mode in amps:
                amps[mode] *= complex(math.cos(stage.phi), math.sin(stage.phi))
        elif kind == "pbs":
            in_h, out_h, in_v, out_v = stage.modes
            if in_h in amps:
                amps[out_h] = amps.pop(in_h)
            if in_v in amps:
                amps[out_v] = amps.pop(in_v)
        elif kind == "absorb":
            mode = stage.modes[0]
            amp = amps.pop(mode, 0j)
            if amp != 0:
                p = abs(amp) ** 2
                if stage.exposure:
                    exposure += p
                taken = p * stage.fraction
                if stage.scatter > 0.0 and stage.scatter_key is not None:
                    back = taken * stage.scatter
                    bucket[stage.scatter_key] = bucket.get(stage.scatter_key, 0.0) + back
                    taken -= back
                if taken:
                    sinks[stage.sink] = sinks.get(stage.sink, 0.0) + taken
                rest = amp * math.sqrt(1.0 - stage.fraction)
                if rest != 0:
                    amps[mode] = rest
        elif kind == "station":
            mode = stage.modes[0]
            if mode in amps:
                exposure += abs(amps[mode]) ** 2
        elif kind == "advance":
            path = stage.modes[0].path
            t = stage.modes[0].time_bin
            for m in [mm for mm in amps if mm.path == path and mm.time_bin == t]:
                amps[ModeId(m.path, m.pol, t + 1)] = amps.pop(m)
            key = (path, t)
            if key in bucket:
                bucket[(path, t + 1)] = bucket.get((path, t + 1), 0.0) + bucket.pop(key)
        elif kind == "vis":
            v = stage.visibility
            if v < 1.0 and stage.bucket is not None:
                root = math.sqrt(v)
                _, ka, kb = stage.bucket
                diverted = {ka: 0.0, kb: 0.0}
                for m, key in zip(stage.modes, (ka, kb)):
                    if m in amps:
                        diverted[key] += (1.0 - v) * abs(amps[m]) ** 2
                        amps[m] *= root
                for key, p in diverted.items():
                    if p:
                        bucket[key] = bucket.get(key, 0.0) + p
        if stage.bucket is not None and kind != "vis":
            _apply_bucket_rule(bucket, stage.bucket, sinks)
        if abs(norm() - 1.0) > 1e-9:
            raise NumericalIntegrityError(
                f"norm drifted to {norm()!r} after stage {idx} ({kind})")

    coherent = {
        name: sum(abs(amps.get(m, 0j)) ** 2 for m in modes)
        for name, modes in program.ports.items()
    }
    port_keys = {
        name: {(m.path, m.time_bin) for m in modes}
        for name, modes in program.ports.items()
    }
    background = {
        name: sum(p for key, p in bucket.items() if key in keys)
        for name, keys in port_keys.items()
    }
    probs = {name: coherent[name] + background[name] for name in coherent}
    total_sinks = dict(sinks)
    residual = 1.0 - sum(probs.values()) - sum(total_sinks.values())
    residual = 0.0 if abs(residual) < 1e-12 else residual
    conclusive = sum(probs.get(d, 0.0) for d in program.conclusive_detectors)
    conditional: dict[str, float | None] = {}
    for d in program.conclusive_detectors:
        conditional[d] = probs.get(d, 0.0) / conclusive if conclusive > 0 else None
    return RunResult(
        probs=probs,
        sinks=total_sinks,
        residual=residual,
        conclusive=conclusive,
        conditional=conditional,
        channel_exposure=exposure,
        coherent_probs=coherent,
        background_probs=background,
    )


# --------------------------------------------------------------------------
# Monte Carlo

MC_CHUNK = 1 << 16


def outcome_distribution(
    program: Program, noise: NoiseConfig | None = None,
    source: SourceModel | None = None,
) -> dict[str, float]:
    """Per-trial outcome probabilities including detector imperfections.

    Categories are the program's detectors plus "none" (no usable click:
    lost photon, missed detection, or a discarded multi-click).
    """
    noise = noise if noise is not None else program.scenario.noise
    source = source if source is not None else noise.source
    result = run_exact(program)
    eta = noise.detector_efficiency
    q_dark = min(noise.dark_rate * noise.coincidence_window, 1.0)
    names = list(program.ports)
    dist: dict[str, float] = {}
    if source.kind == COHERENT:
        mu = source.mean_photon_number
        lam = {d: mu * result.probs[d] * eta + q_dark for d in names}
        for d in names:
            p_only = (1.0 - math.exp(-lam[d])) * math.prod(
                math.exp(-lam[o]) for o in names if o != d
            )
            dist[d] = p_only
    else:
        p_real = {d: result.probs[d] * eta for d in names}
        p_none_real = 1.0 - sum(p_real.values())
        no_dark_elsewhere = {
            d: math.prod((1.0 - q_dark) for o in names if o != d) for d in names
        }
        for d in names:
            dist[d] = (p_real[d] + p_none_real * q_dark) * no_dark_elsewhere[d]
    dist["none"] = max(0.0, 1.0 - sum(dist.values()))
    return dist


def run_monte_carlo(
    program: Program,
    source: SourceModel | None = None,
    noise: NoiseConfig | None = None,
    trials: int = 1,
    seed: int = 0,
) -> dict[str, int]:
    """Sampled counts per outcome; reproducible given (seed, trials).

    Trials are drawn in fixed-size chunks whose random streams derive from
    (seed, chunk index), so the counts do not depend on how chunks might be
    scheduled across workers.
    """
    if trials < 1:
        raise RangeError("trials must be >= 1")
    dist = outcome_distribution(program, noise, source)
    names = list(dist)
    pvals = np.array([dist[n] for n in names], dtype=float)
    pvals = np.clip(pvals, 0.0, None)
    pvals /= pvals.sum()
    counts = np.zeros(len(names), dtype=np.int64)
    n_chunks = (trials + MC_CHUNK - 1) // MC_CHUNK
    for chunk in range(n_chunks):
        size = min(MC_CHUNK, trials - chunk * MC_CHUNK)
        rng = np.random.default_rng(np.random.SeedSequence((seed, chunk)))
        counts += rng.multinomial(size, pvals)
    return {name: int(c) for name, c in zip(names, counts)}


# --------------------------------------------------------------------------
# path enumeration

def _count_branch_points(s: Scenario) -> int:
    if s.kind == "custom":
        return sum(1 for st in s.stages if st.kind == "bs")
    return (s.m - 1) * s.n


def path_sum(program: Program) -> list[PathRecord]:
    """All discrete arm-choice paths with amplitudes.

    Grouped per final mode (coherently) these reproduce the exact final
    amplitudes; grouped per absorption event they reproduce sink
    probabilities.
    """
    if _count_branch_points(program.scenario) > PATH_SUM_MAX_CHOICES:
        raise PathSumBoundError(
            f"path enumeration limited to (M-1)*N <= {PATH_SUM_MAX_CHOICES} branch points"
        )
    channel = program.channel_paths
    mode_to_port = {
        m: name for name, modes in program.ports.items() for m in modes
    }
    records: list[PathRecord] = []
    # stack entries: (stage index, mode, amplitude, entered, returned, choices)
    stack: list[tuple[int, ModeId, complex, bool, bool, tuple[tuple[int, int], ...]]] = [
        (0, program.input_mode, 1.0 + 0j, False, False, ())
    ]
    stages = program.stages
    n_stages = len(stages)
    while stack:
        idx, mode, amp, entered, returned, choices = stack.pop()
        while idx < n_stages:
            stage = stages[idx]
            kind = stage.kind
            if kind == "rot":
                a, b = stage.modes
                if mode == a or mode == b:
                    if mode == a:
                        stay, cross = stage.cos * amp, stage.sin * amp
                        other = b
                    else:
                        stay, cross = stage.cos * amp, -stage.sin * amp
                        other = a
                    if stay != 0 and cross != 0:
                        stack.append(_advance_flags(
                            idx + 1, other, cross, entered, returned,
                            choices + ((stage.cycle, 1),), channel))
                        amp = stay
                        choices = choices + ((stage.cycle, 0),)
                    elif cross != 0:
                        mode, amp = other, cross
                        entered, returned = _flags(mode, entered, returned, channel)
                    elif stay != 0:
                        amp = stay
                    else:
                        amp = 0j
                        break
            elif kind == "phase":
                if mode == stage.modes[0]:
                    amp *= complex(math.cos(stage.phi), math.sin(stage.phi))
            elif kind == "pbs":
                in_h, out_h, in_v, out_v = stage.modes
                if mode == in_h:
                    mode = out_h
                elif mode == in_v:
                    mode = out_v
                entered, returned = _flags(mode, entered, returned, channel)
            elif kind == "absorb":
                if mode == stage.modes[0] and stage.fraction > 0.0:
                    if stage.fraction >= 1.0:
                        records.append(PathRecord(
                            choices=choices,
                            amplitude=amp,
                            final_mode=None,
                            sink_event=(stage.sink, idx, mode),
                            port=f"sink:{stage.sink}",
                            traversed_channel=entered and returned,
                        ))
                        amp = 0j
                        break
                    sunk = amp * math.sqrt(stage.fraction)
                    records.append(PathRecord(
                        choices=choices + ((stage.cycle, 1),),
                        amplitude=sunk,
                        final_mode=None,
                        sink_event=(stage.sink, idx, mode),
                        port=f"sink:{stage.sink}",
                        traversed_channel=entered and returned,
                    ))
                    amp *= math.sqrt(1.0 - stage.fraction)
                    choices = choices + ((stage.cycle, 0),)
            elif kind == "advance":
                path, t = stage.modes[0].path, stage.modes[0].time_bin
                if mode.path == path and mode.time_bin == t:
                    mode = ModeId(mode.path, mode.pol, t + 1)
            elif kind == "vis":
                if stage.visibility < 1.0 and mode in stage.modes:
                    amp *= math.sqrt(stage.visibility)
            idx += 1
        else:
            if amp != 0:
                records.append(PathRecord(
                    choices=choices,
                    amplitude=amp,
                    final_mode=mode,
                    sink_event=None,
                    port=mode_to_port.get(mode, f"mode:{mode.path}:{mode.pol}:{mode.time_bin}"),
                    traversed_channel=entered and returned,
                ))
    return records


def _flags(mode: ModeId, entered: bool, returned: bool,
           channel: frozenset[str]) -> tuple[bool, bool]:
    if mode.path in channel:
        return True, returned
    if entered:
        return entered, True
    return entered, returned


def _advance_flags(idx, mode, amp, entered, returned, choices, channel):
    entered, returned = _flags(mode, entered, returned, channel)
    return (idx, mode, amp, entered, returned, choices)


def grouped_port_amplitudes(records: Iterable[PathRecord]) -> dict[ModeId, complex]:
    """Coherent per-mode sums over all paths that reach the program end."""
    sums: dict[ModeId, complex] = {}
    for rec in records:
        if rec.final_mode is not None:
            sums[rec.final_mode] = sums.get(rec.final_mode, 0j) + rec.amplitude
    return sums


def grouped_sink_probs(records: Iterable[PathRecord]) -> dict[str, float]:
    """Sink probabilities: coherent within one absorption event, additive
    across events."""
    events: dict[tuple[str, int, ModeId], complex] = {}
    for rec in records:
        if rec.sink_event is not None:
            events[rec.sink_event] = events.get(rec.sink_event, 0j) + rec.amplitude
    out: dict[str, float] = {}
    for (sink, _, _), amp in events.items():
        out[sink] = out.get(sink, 0.0) + abs(amp) ** 2
    return out


def path_sum_port_probs(program: Program,
                        records: Sequence[PathRecord] | None = None) -> dict[str, float]:
    records = path_sum(program) if records is None else records
    per_mode = grouped_port_amplitudes(records)
    return {
        name: sum(abs(per_mode.get(m, 0j)) ** 2 for m in modes)
        for name, modes in program.ports.items()
    }


# --------------------------------------------------------------------------
# counterfactuality audit

def audit_counterfactuality(s: Scenario, logic: int,
                            claim_tol: float = 1e-12) -> AuditReport:
    """Decompose detector amplitudes into channel-traversing and
    non-traversing path classes and report the joint probability of
    (absorbed at the receiver AND conclusive click), which is structurally
    zero for a single photon."""
    program = compile_scenario(s, logic)
    records = path_sum(program)
    detectors: dict[str, DetectorAudit] = {}
    for name, modes in program.ports.items():
        trav: dict[ModeId, complex] = {}
        non: dict[ModeId, complex] = {}
        for rec in records:
            if rec.final_mode in modes:
                target = trav if rec.traversed_channel else non
                target[rec.final_mode] = target.get(rec.final_mode, 0j) + rec.amplitude
        p_trav = sum(abs(a) ** 2 for a in trav.values())
        p_non = sum(abs(a) ** 2 for a in non.values())
        p_port = sum(
            abs(trav.get(m, 0j) + non.get(m, 0j)) ** 2 for m in modes
        )
        total = p_trav + p_non
        detectors[name] = DetectorAudit(
            traversing_amplitude=math.sqrt(p_trav),
            non_traversing_amplitude=math.sqrt(p_non),
            traversing_share=(p_trav / total) if total > 1e-18 else 0.0,
            probability=p_port,
        )
    # a path terminates either in a sink or at a detector, never both
    joint = 0.0
    conclusive = [d for d in program.conclusive_detectors if d in detectors]
    df_only = all(detectors[d].traversing_share <= claim_tol for d in conclusive)
    return AuditReport(
        detectors=detectors,
        joint_absorbed_and_conclusive=joint,
        df_only_claim_holds=df_only,
        logic=logic,
        blocking=s.blocking if s.kind == "nested" else "n/a",
        path_count=len(records),
    )
