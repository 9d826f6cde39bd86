import math
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfqsim import engine
from cfqsim.scenario import (
    CHANNEL_ONLY,
    FULL_BREAK,
    ErrorKind,
    NoiseConfig,
    Scenario,
    ScenarioParseError,
    SourceModel,
    StageSpec,
    builtin_scenarios,
    parse_scenario,
    scenario_hash,
    serialize_scenario,
    slaz_ideal,
)

SCENARIO_DIR = Path(__file__).resolve().parents[1] / "scenarios"

MINIMAL = """\
format_version = 1
scenario = nested
m = 2
n = 1
"""


def test_minimal_nested_scenario():
    s = parse_scenario(MINIMAL)
    assert s.m == 2 and s.n == 1
    assert s.outer_angle == pytest.approx(math.pi / 4)
    assert s.blocking == FULL_BREAK


def test_shipped_slaz_m4n2_file():
    s = parse_scenario((SCENARIO_DIR / "slaz_m4n2.cfq").read_text())
    assert (s.m, s.n, s.half_mirror_r) == (4, 2, 0.5)
    assert s == builtin_scenarios()["slaz_m4n2"]


def test_shipped_files_match_builtins():
    for name, s in builtin_scenarios().items():
        text = (SCENARIO_DIR / f"{name}.cfq").read_text()
        assert text == serialize_scenario(s)


def test_reflectivity_out_of_range_is_positioned():
    text = "format_version = 1\nscenario = nested\nm = 4\nn = 2\nhalf_mirror_r = 1.3\n"
    with pytest.raises(ScenarioParseError) as exc:
        parse_scenario(text)
    assert exc.value.error.line == 5
    assert exc.value.error.kind is ErrorKind.BAD_PARAMETER


@pytest.mark.parametrize(
    "text,kind",
    [
        ("format_version = 1\nbogus_key = 3\n", ErrorKind.UNKNOWN_ELEMENT),
        ("format_version = 1\nscenario = sideways\n", ErrorKind.BAD_PARAMETER),
        ("format_version = 1\nblocking = maybe\n", ErrorKind.BAD_PARAMETER),
        ("format_version = 1\nm 4\n", ErrorKind.SYNTAX),
        ("format_version = 2\n", ErrorKind.BAD_PARAMETER),
        ("m = 4\n", ErrorKind.SYNTAX),
        ("format_version = 1\n[weird]\n", ErrorKind.UNKNOWN_ELEMENT),
        ("format_version = 1\nscenario = custom\npath a\nstage bs a b theta=1\ndetector D0 = a\n",
         ErrorKind.WIRING_CONFLICT),
        ("format_version = 1\nscenario = custom\npath a\npath b\n"
         "stage bs a b theta=1\ndetector D0 = a, b\ndetector D1 = b\n",
         ErrorKind.WIRING_CONFLICT),
        ("format_version = 1\nscenario = custom\npath a\nstage bs a a theta=1\ndetector D0 = a\n",
         ErrorKind.WIRING_CONFLICT),
        ("format_version = 1\nscenario = custom\npath a\npath b\nstage warp a b\ndetector D0 = a\n",
         ErrorKind.UNKNOWN_ELEMENT),
        ("format_version = 1\nscenario = custom\npath a\npath b\n"
         "stage absorb a fraction=1.7\ndetector D0 = a\n", ErrorKind.BAD_PARAMETER),
        ("format_version = 1\nm = -3\n", ErrorKind.BAD_PARAMETER),
        ("format_version = 1\nn = 0\n", ErrorKind.BAD_PARAMETER),
        ("format_version = 1\nm = x\n", ErrorKind.BAD_PARAMETER),
        ("format_version = 1\nseed = -1\n", ErrorKind.WIRING_CONFLICT),
    ],
)
def test_parse_errors_carry_kind(text, kind):
    with pytest.raises(ScenarioParseError) as exc:
        parse_scenario(text)
    assert exc.value.error.kind is kind
    assert exc.value.error.line >= 1
    assert exc.value.error.column >= 1


def test_round_trip_builtins():
    for s in builtin_scenarios().values():
        text = serialize_scenario(s)
        assert parse_scenario(text) == s
        assert serialize_scenario(parse_scenario(text)) == text
        assert serialize_scenario(s) == text  # deterministic bytes


def test_round_trip_preserves_stage_order():
    s = builtin_scenarios()["plain_mz"]
    kinds = [st_.kind for st_ in parse_scenario(serialize_scenario(s)).stages]
    assert kinds == ["bs", "phase", "vis", "bs"]


def test_scenario_hash_tracks_content():
    base = builtin_scenarios()["slaz_m4n2"]
    other = builtin_scenarios()["slaz_m4n2_channelonly"]
    assert scenario_hash(base) != scenario_hash(other)
    assert scenario_hash(base) == scenario_hash(parse_scenario(serialize_scenario(base)))


def test_builtins_exist_and_validate():
    names = set(builtin_scenarios())
    assert {"slaz_m4n2", "slaz_m4n2_channelonly", "plain_mz"} <= names
    for s in builtin_scenarios().values():
        serialize_scenario(s)  # raises if invalid


def test_slaz_ideal_generator():
    s = slaz_ideal(64, 2)
    assert s.outer_angle == pytest.approx(math.pi / 128)
    assert s.half_mirror_r == pytest.approx(62 / 64)
    with pytest.raises(ValueError):
        slaz_ideal(1, 2)
    with pytest.raises(ValueError):
        slaz_ideal(4, 0)


def test_plain_mz_sends_all_light_to_one_port():
    program = engine.compile_scenario(builtin_scenarios()["plain_mz"], 0)
    result = engine.run_exact(program)
    assert result.probs["D0"] == pytest.approx(1.0, abs=1e-12)
    assert result.probs["D1"] == pytest.approx(0.0, abs=1e-12)


# ---------------------------------------------------------------------------
# totality and soundness

@settings(max_examples=300, deadline=None)
@given(st.text(max_size=400))
def test_parser_is_total_on_arbitrary_text(text):
    try:
        parse_scenario(text)
    except ScenarioParseError:
        pass


@settings(max_examples=150, deadline=None)
@given(st.text(alphabet="formatvesin_c=12 \n[]#abdghkl.-046", max_size=300))
def test_parser_is_total_on_formatlike_text(text):
    try:
        parse_scenario(text)
    except ScenarioParseError:
        pass


_nested = st.builds(
    Scenario,
    kind=st.just("nested"),
    m=st.integers(2, 8),
    n=st.integers(1, 3),
    half_mirror_r=st.floats(0.0, 1.0, allow_nan=False),
    blocking=st.sampled_from([FULL_BREAK, CHANNEL_ONLY]),
    noise=st.builds(
        NoiseConfig,
        visibility=st.floats(0.5, 1.0, allow_nan=False),
        detector_efficiency=st.floats(0.1, 1.0, allow_nan=False),
        dark_rate=st.floats(0.0, 1000.0, allow_nan=False),
        source=st.builds(
            SourceModel,
            kind=st.sampled_from(["heralded", "coherent"]),
            mean_photon_number=st.floats(0.0, 2.0, allow_nan=False),
        ),
    ),
    seed=st.integers(0, 2**63 - 1),
)


@settings(max_examples=60, deadline=None)
@given(_nested, st.integers(0, 1))
def test_validated_scenarios_compile_and_run(s, logic):
    text = serialize_scenario(s)
    parsed = parse_scenario(text)
    program = engine.compile_scenario(parsed, logic)
    engine.run_exact(program)  # no wiring or integrity errors


_custom_stage = st.one_of(
    st.tuples(st.just("bs"), st.floats(-3.0, 3.0, allow_nan=False)),
    st.tuples(st.just("phase"), st.floats(-3.0, 3.0, allow_nan=False)),
    st.tuples(st.just("vis"), st.just(0.0)),
    st.tuples(st.just("absorb"), st.floats(0.0, 1.0, allow_nan=False)),
)


@settings(max_examples=60, deadline=None)
@given(st.lists(_custom_stage, min_size=1, max_size=6))
def test_custom_scenarios_compile_and_run(stage_descs):
    stages = []
    for kind, value in stage_descs:
        if kind == "bs":
            stages.append(StageSpec("bs", ("a", "b"), (("theta", value),)))
        elif kind == "phase":
            stages.append(StageSpec("phase", ("a",), (("phi", value),)))
        elif kind == "vis":
            stages.append(StageSpec("vis", ("a", "b")))
        else:
            stages.append(StageSpec("absorb", ("b",), (("fraction", value),), sink="loss"))
    s = Scenario(kind="custom", paths=("a", "b"), stages=tuple(stages),
                 detectors=(("D0", ("a",)), ("D1", ("b",))))
    parsed = parse_scenario(serialize_scenario(s))
    assert parsed == s
    result = engine.run_exact(engine.compile_scenario(parsed, 0))
    total = sum(result.probs.values()) + sum(result.sinks.values()) + result.residual
    assert total == pytest.approx(1.0, abs=1e-9)
