"""Declarative scenario descriptions and the `.cfq` text format.

A scenario is either `nested` (the counterfactual-communication cavity,
fully determined by M, N, the half-mirror reflectivity and the blocking
model) or `custom` (an explicit list of paths, stages and detectors, used
for small calibration interferometers).  Interferometer angles are always
derived from M and N, never stored, so a file cannot describe an
inconsistent nested scenario.

The format is line oriented: `key = value` pairs, `path` / `stage` /
`detector` directives for custom topologies, and `[noise]` / `[source]`
sections.  `parse_scenario` either returns a validated Scenario or raises
`ScenarioParseError` carrying a positioned ParseError; it never raises
anything else, no matter the input bytes.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterator

FORMAT_VERSION = 1

FULL_BREAK = "fullbreak"
CHANNEL_ONLY = "channelonly"
BLOCKING_MODELS = (FULL_BREAK, CHANNEL_ONLY)

HERALDED = "heralded"
COHERENT = "coherent"
SOURCE_KINDS = (HERALDED, COHERENT)

STAGE_KINDS = ("bs", "phase", "absorb", "vis")


class ErrorKind(Enum):
    SYNTAX = "Syntax"
    UNKNOWN_ELEMENT = "UnknownElement"
    BAD_PARAMETER = "BadParameter"
    WIRING_CONFLICT = "WiringConflict"


@dataclass(frozen=True)
class ParseError:
    line: int
    column: int
    message: str
    kind: ErrorKind

    def __str__(self) -> str:
        return f"{self.line}:{self.column}: {self.kind.value}: {self.message}"


class ScenarioParseError(Exception):
    """Wraps a ParseError so parsing failures can be raised."""

    def __init__(self, error: ParseError):
        super().__init__(str(error))
        self.error = error


@dataclass(frozen=True)
class SourceModel:
    kind: str = HERALDED
    pair_rate: float = 2.0e7
    coupling_efficiency: float = 0.3
    herald_detector_efficiency: float = 0.6
    mean_photon_number: float = 0.0


@dataclass(frozen=True)
class NoiseConfig:
    visibility: float = 1.0
    phase_drift_sigma: float = 0.0
    detector_efficiency: float = 1.0
    dark_rate: float = 0.0
    coincidence_window: float = 1.0e-9
    source: SourceModel = field(default_factory=SourceModel)


@dataclass(frozen=True)
class StageSpec:
    """One custom-topology element: kind, target paths, parameters."""

    kind: str
    paths: tuple[str, ...]
    params: tuple[tuple[str, float], ...] = ()
    sink: str = ""

    def param(self, name: str, default: float = 0.0) -> float:
        for key, value in self.params:
            if key == name:
                return value
        return default


@dataclass(frozen=True)
class Scenario:
    kind: str = "nested"
    m: int = 4
    n: int = 2
    half_mirror_r: float = 0.5
    blocking: str = FULL_BREAK
    paths: tuple[str, ...] = ()
    stages: tuple[StageSpec, ...] = ()
    detectors: tuple[tuple[str, tuple[str, ...]], ...] = ()
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    seed: int = 0

    @property
    def outer_angle(self) -> float:
        return math.pi / (2 * self.m)

    @property
    def inner_angle(self) -> float:
        return math.pi / (2 * self.n)

    def detector_map(self) -> dict[str, tuple[str, ...]]:
        return dict(self.detectors)


# --------------------------------------------------------------------------
# validation

def _validate(s: Scenario) -> str | None:
    """Returns an error message, or None if the scenario is consistent."""
    if s.kind == "nested":
        if s.m < 2:
            return "m must be an integer >= 2"
        if s.n < 1:
            return "n must be an integer >= 1"
        if not 0.0 <= s.half_mirror_r <= 1.0:
            return "half_mirror_r must be in [0, 1]"
        if s.blocking not in BLOCKING_MODELS:
            return f"blocking must be one of {BLOCKING_MODELS}"
    elif s.kind == "custom":
        if not s.paths:
            return "custom scenario declares no paths"
        if len(set(s.paths)) != len(s.paths):
            return "duplicate path declaration"
        declared = set(s.paths)
        for st in s.stages:
            for p in st.paths:
                if p not in declared:
                    return f"stage references undeclared path {p!r}"
            if st.kind in ("bs", "vis") and st.paths[0] == st.paths[1]:
                return f"stage {st.kind} wires a path to itself"
            if st.kind == "absorb" and not 0.0 <= st.param("fraction", 1.0) <= 1.0:
                return "absorb fraction must be in [0, 1]"
        if not s.detectors:
            return "custom scenario declares no detectors"
        seen: set[str] = set()
        for name, ports in s.detectors:
            for p in ports:
                if p not in declared:
                    return f"detector {name!r} references undeclared path {p!r}"
                if p in seen:
                    return f"path {p!r} assigned to more than one detector"
                seen.add(p)
    else:
        return f"unknown scenario kind {s.kind!r}"

    if not 0 <= s.seed < 2**64:
        return "seed must be a 64-bit unsigned integer"
    n = s.noise
    if not 0.0 <= n.visibility <= 1.0:
        return "visibility must be in [0, 1]"
    if n.phase_drift_sigma < 0.0:
        return "phase_drift_sigma must be >= 0"
    if not 0.0 <= n.detector_efficiency <= 1.0:
        return "detector_efficiency must be in [0, 1]"
    if n.dark_rate < 0.0:
        return "dark_rate must be >= 0"
    if n.coincidence_window <= 0.0:
        return "coincidence_window must be > 0"
    src = n.source
    if src.kind not in SOURCE_KINDS:
        return f"source kind must be one of {SOURCE_KINDS}"
    if src.pair_rate < 0 or src.mean_photon_number < 0:
        return "source rates must be >= 0"
    if not 0.0 <= src.coupling_efficiency <= 1.0:
        return "coupling_efficiency must be in [0, 1]"
    if not 0.0 <= src.herald_detector_efficiency <= 1.0:
        return "herald_detector_efficiency must be in [0, 1]"
    return None


# --------------------------------------------------------------------------
# parsing

_TOP_INT_KEYS = {"format_version", "m", "n", "seed"}
_TOP_FLOAT_KEYS = {"half_mirror_r"}
_TOP_STR_KEYS = {"scenario", "blocking"}
_NOISE_KEYS = {
    "visibility",
    "phase_drift_sigma",
    "detector_efficiency",
    "dark_rate",
    "coincidence_window",
}
_SOURCE_FLOAT_KEYS = {
    "pair_rate",
    "coupling_efficiency",
    "herald_detector_efficiency",
    "mean_photon_number",
}


def _err(line: int, col: int, msg: str, kind: ErrorKind) -> ScenarioParseError:
    return ScenarioParseError(ParseError(line, col, msg, kind))


def _parse_float(raw: str, lineno: int, col: int) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise _err(lineno, col, f"expected a number, got {raw!r}", ErrorKind.BAD_PARAMETER)
    if math.isnan(value) or math.isinf(value):
        raise _err(lineno, col, "numbers must be finite", ErrorKind.BAD_PARAMETER)
    return value


def _parse_int(raw: str, lineno: int, col: int) -> int:
    try:
        return int(raw)
    except ValueError:
        raise _err(lineno, col, f"expected an integer, got {raw!r}", ErrorKind.BAD_PARAMETER)


def parse_scenario(text: str) -> Scenario:
    """Parse and validate `.cfq` text; raises ScenarioParseError on failure."""
    top: dict[str, object] = {}
    noise: dict[str, float] = {}
    source: dict[str, object] = {}
    paths: list[str] = []
    stages: list[StageSpec] = []
    detectors: list[tuple[str, tuple[str, ...]]] = []
    section = ""
    last_line = 0

    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        last_line = lineno
        line = raw_line.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        stripped = line.strip()
        col = line.index(stripped[0]) + 1

        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise _err(lineno, col, "unterminated section header", ErrorKind.SYNTAX)
            name = stripped[1:-1].strip()
            if name not in ("noise", "source"):
                raise _err(lineno, col, f"unknown section {name!r}", ErrorKind.UNKNOWN_ELEMENT)
            section = name
            continue

        words = stripped.split()
        if section == "" and words[0] in ("path", "stage", "detector"):
            directive = words[0]
            if directive == "path":
                if len(words) != 2:
                    raise _err(lineno, col, "usage: path <name>", ErrorKind.SYNTAX)
                if words[1] in paths:
                    raise _err(lineno, col, f"duplicate path {words[1]!r}", ErrorKind.WIRING_CONFLICT)
                paths.append(words[1])
            elif directive == "stage":
                stages.append(_parse_stage(words[1:], lineno, col, paths))
            else:
                detectors.append(_parse_detector(stripped, words, lineno, col, paths, detectors))
            continue

        if "=" not in stripped:
            raise _err(lineno, col, f"expected key = value, got {stripped!r}", ErrorKind.SYNTAX)
        key, _, raw_value = stripped.partition("=")
        key = key.strip()
        value = raw_value.strip()
        vcol = line.index("=") + 2
        if not key:
            raise _err(lineno, col, "missing key before '='", ErrorKind.SYNTAX)
        if not value:
            raise _err(lineno, vcol, f"missing value for {key!r}", ErrorKind.SYNTAX)

        if section == "noise":
            if key not in _NOISE_KEYS:
                raise _err(lineno, col, f"unknown noise key {key!r}", ErrorKind.UNKNOWN_ELEMENT)
            noise[key] = _parse_float(value, lineno, vcol)
        elif section == "source":
            if key == "kind":
                source["kind"] = value
            elif key in _SOURCE_FLOAT_KEYS:
                source[key] = _parse_float(value, lineno, vcol)
            else:
                raise _err(lineno, col, f"unknown source key {key!r}", ErrorKind.UNKNOWN_ELEMENT)
        else:
            if key in _TOP_INT_KEYS:
                top[key] = _parse_int(value, lineno, vcol)
            elif key in _TOP_FLOAT_KEYS:
                top[key] = _parse_float(value, lineno, vcol)
            elif key in _TOP_STR_KEYS:
                top[key] = value
            else:
                raise _err(lineno, col, f"unknown key {key!r}", ErrorKind.UNKNOWN_ELEMENT)

        if key == "format_version" and top.get("format_version") != FORMAT_VERSION:
            raise _err(
                lineno, vcol,
                f"unsupported format_version {value} (expected {FORMAT_VERSION})",
                ErrorKind.BAD_PARAMETER,
            )
        if key == "half_mirror_r" and not 0.0 <= float(top["half_mirror_r"]) <= 1.0:
            raise _err(lineno, vcol, "half_mirror_r must be in [0, 1]", ErrorKind.BAD_PARAMETER)
        if key == "m" and int(top["m"]) < 2:
            raise _err(lineno, vcol, "m must be an integer >= 2", ErrorKind.BAD_PARAMETER)
        if key == "n" and int(top["n"]) < 1:
            raise _err(lineno, vcol, "n must be an integer >= 1", ErrorKind.BAD_PARAMETER)
        if key == "blocking" and value not in BLOCKING_MODELS:
            raise _err(
                lineno, vcol,
                f"blocking must be one of {', '.join(BLOCKING_MODELS)}",
                ErrorKind.BAD_PARAMETER,
            )
        if key == "scenario" and value not in ("nested", "custom"):
            raise _err(lineno, vcol, "scenario must be 'nested' or 'custom'", ErrorKind.BAD_PARAMETER)
        if key == "kind" and section == "source" and value not in SOURCE_KINDS:
            raise _err(
                lineno, vcol,
                f"source kind must be one of {', '.join(SOURCE_KINDS)}",
                ErrorKind.BAD_PARAMETER,
            )

    if "format_version" not in top:
        raise _err(1, 1, "missing format_version header", ErrorKind.SYNTAX)

    src = SourceModel(
        kind=str(source.get("kind", HERALDED)),
        pair_rate=float(source.get("pair_rate", 2.0e7)),
        coupling_efficiency=float(source.get("coupling_efficiency", 0.3)),
        herald_detector_efficiency=float(source.get("herald_detector_efficiency", 0.6)),
        mean_photon_number=float(source.get("mean_photon_number", 0.0)),
    )
    cfg = NoiseConfig(
        visibility=float(noise.get("visibility", 1.0)),
        phase_drift_sigma=float(noise.get("phase_drift_sigma", 0.0)),
        detector_efficiency=float(noise.get("detector_efficiency", 1.0)),
        dark_rate=float(noise.get("dark_rate", 0.0)),
        coincidence_window=float(noise.get("coincidence_window", 1.0e-9)),
        source=src,
    )
    scenario = Scenario(
        kind=str(top.get("scenario", "nested")),
        m=int(top.get("m", 4)),
        n=int(top.get("n", 2)),
        half_mirror_r=float(top.get("half_mirror_r", 0.5)),
        blocking=str(top.get("blocking", FULL_BREAK)),
        paths=tuple(paths),
        stages=tuple(stages),
        detectors=tuple(detectors),
        noise=cfg,
        seed=int(top.get("seed", 0)),
    )
    problem = _validate(scenario)
    if problem is not None:
        raise _err(max(last_line, 1), 1, problem, ErrorKind.WIRING_CONFLICT)
    return scenario


def _parse_stage(
    words: list[str], lineno: int, col: int, declared: list[str]
) -> StageSpec:
    if not words:
        raise _err(lineno, col, "stage requires an element kind", ErrorKind.SYNTAX)
    kind = words[0]
    if kind not in STAGE_KINDS:
        raise _err(lineno, col, f"unknown stage element {kind!r}", ErrorKind.UNKNOWN_ELEMENT)
    path_args: list[str] = []
    params: list[tuple[str, float]] = []
    sink = ""
    for word in words[1:]:
        if "=" in word:
            pname, _, pval = word.partition("=")
            if pname == "sink":
                sink = pval
            else:
                params.append((pname, _parse_float(pval, lineno, col)))
        else:
            path_args.append(word)

    expected_paths = {"bs": 2, "vis": 2, "phase": 1, "absorb": 1}[kind]
    if len(path_args) != expected_paths:
        raise _err(
            lineno, col,
            f"stage {kind} expects {expected_paths} path argument(s)",
            ErrorKind.SYNTAX,
        )
    for p in path_args:
        if p not in declared:
            raise _err(lineno, col, f"stage references undeclared path {p!r}", ErrorKind.WIRING_CONFLICT)
    if kind in ("bs", "vis") and path_args[0] == path_args[1]:
        raise _err(lineno, col, f"stage {kind} wires a path to itself", ErrorKind.WIRING_CONFLICT)
    if kind == "absorb":
        fraction = dict(params).get("fraction", 1.0)
        if not 0.0 <= fraction <= 1.0:
            raise _err(lineno, col, "absorb fraction must be in [0, 1]", ErrorKind.BAD_PARAMETER)
        if not sink:
            sink = "loss"
    return StageSpec(kind=kind, paths=tuple(path_args), params=tuple(params), sink=sink)


def _parse_detector(
    stripped: str,
    words: list[str],
    lineno: int,
    col: int,
    declared: list[str],
    existing: list[tuple[str, tuple[str, ...]]],
) -> tuple[str, tuple[str, ...]]:
    # detector NAME = path[, path...]
    rest = stripped[len("detector"):].strip()
    if "=" not in rest:
        raise _err(lineno, col, "usage: detector <name> = <path>[, <path>...]", ErrorKind.SYNTAX)
    name, _, plist = rest.partition("=")
    name = name.strip()
    if not name:
        raise _err(lineno, col, "detector needs a name", ErrorKind.SYNTAX)
    if any(name == n for n, _ in existing):
        raise _err(lineno, col, f"duplicate detector {name!r}", ErrorKind.WIRING_CONFLICT)
    ports = tuple(p.strip() for p in plist.split(",") if p.strip())
    if not ports:
        raise _err(lineno, col, f"detector {name!r} lists no paths", ErrorKind.SYNTAX)
    taken = {p for _, plist_ in existing for p in plist_}
    for p in ports:
        if p not in declared:
            raise _err(lineno, col, f"detector references undeclared path {p!r}", ErrorKind.WIRING_CONFLICT)
        if p in taken:
            raise _err(lineno, col, f"path {p!r} assigned to more than one detector", ErrorKind.WIRING_CONFLICT)
    return name, ports


# --------------------------------------------------------------------------
# serialization

def _fmt(value: object) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_scenario(s: Scenario) -> str:
    """Canonical text form; parse(serialize(s)) == s and re-serialization is
    byte-identical."""
    problem = _validate(s)
    if problem is not None:
        raise ValueError(f"cannot serialize invalid scenario: {problem}")
    lines = [f"format_version = {FORMAT_VERSION}", f"scenario = {s.kind}"]
    if s.kind == "nested":
        lines += [
            f"m = {s.m}",
            f"n = {s.n}",
            f"half_mirror_r = {_fmt(s.half_mirror_r)}",
            f"blocking = {s.blocking}",
        ]
    lines.append(f"seed = {s.seed}")
    if s.kind == "custom":
        lines += [f"path {p}" for p in s.paths]
        for st in s.stages:
            parts = [f"stage {st.kind}", *st.paths]
            parts += [f"{k}={_fmt(v)}" for k, v in st.params]
            if st.kind == "absorb":
                parts.append(f"sink={st.sink}")
            lines.append(" ".join(parts))
        for name, ports in s.detectors:
            lines.append(f"detector {name} = {', '.join(ports)}")
    n = s.noise
    lines += [
        "",
        "[noise]",
        f"visibility = {_fmt(n.visibility)}",
        f"phase_drift_sigma = {_fmt(n.phase_drift_sigma)}",
        f"detector_efficiency = {_fmt(n.detector_efficiency)}",
        f"dark_rate = {_fmt(n.dark_rate)}",
        f"coincidence_window = {_fmt(n.coincidence_window)}",
        "",
        "[source]",
        f"kind = {n.source.kind}",
        f"pair_rate = {_fmt(n.source.pair_rate)}",
        f"coupling_efficiency = {_fmt(n.source.coupling_efficiency)}",
        f"herald_detector_efficiency = {_fmt(n.source.herald_detector_efficiency)}",
        f"mean_photon_number = {_fmt(n.source.mean_photon_number)}",
    ]
    return "\n".join(lines) + "\n"


def scenario_hash(s: Scenario) -> str:
    """SHA-256 of the canonical serialization."""
    return hashlib.sha256(serialize_scenario(s).encode("utf-8")).hexdigest()


# --------------------------------------------------------------------------
# builtin scenarios

def slaz_ideal(
    m: int,
    n: int,
    half_mirror_r: float | None = None,
    blocking: str = FULL_BREAK,
    seed: int = 0,
) -> Scenario:
    """Ideal nested scenario for given cycle counts.

    The half-mirror reflectivity defaults to the loss-optimal (m-2)/m
    (0.5 at m=2, where the photon makes a single pass).
    """
    if m < 2:
        raise ValueError("m must be >= 2")
    if n < 1:
        raise ValueError("n must be >= 1")
    if half_mirror_r is None:
        half_mirror_r = (m - 2) / m if m > 2 else 0.5
    s = Scenario(kind="nested", m=m, n=n, half_mirror_r=half_mirror_r,
                 blocking=blocking, seed=seed)
    problem = _validate(s)
    if problem is not None:
        raise ValueError(problem)
    return s


def _plain_mz(phase_rad: float = 0.0) -> Scenario:
    bs = math.pi / 4
    return Scenario(
        kind="custom",
        paths=("a", "b"),
        stages=(
            StageSpec("bs", ("a", "b"), (("theta", bs),)),
            StageSpec("phase", ("b",), (("phi", phase_rad),)),
            StageSpec("vis", ("a", "b")),
            StageSpec("bs", ("a", "b"), (("theta", bs),)),
        ),
        detectors=(("D0", ("b",)), ("D1", ("a",))),
    )


def builtin_scenarios() -> dict[str, Scenario]:
    """Named ready-to-run scenarios."""
    return {
        "slaz_m4n2": slaz_ideal(4, 2, 0.5, FULL_BREAK),
        "slaz_m4n2_channelonly": slaz_ideal(4, 2, 0.5, CHANNEL_ONLY),
        "plain_mz": _plain_mz(0.0),
    }


def with_visibility(s: Scenario, v: float) -> Scenario:
    """Copy of a scenario with the interference visibility replaced."""
    return replace(s, noise=replace(s.noise, visibility=v))


def iter_detector_names(s: Scenario) -> Iterator[str]:
    if s.kind == "nested":
        yield from ("D0", "D1", "Df")
    else:
        for name, _ in s.detectors:
            yield name
