import json
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from cfqsim.cli import main
from cfqsim.protocol import MonoImage, decode_pbm, encode_pbm

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"
SCHEMAS = ROOT / "docs" / "schemas"


def _schema(name: str) -> dict:
    return json.loads((SCHEMAS / name).read_text())


def _run(capsys, *argv) -> tuple[int, str]:
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out


def test_simulate_exact_logic0(capsys):
    code, out = _run(capsys, "simulate", str(SCENARIOS / "slaz_m4n2.cfq"),
                     "--logic", "0", "--exact")
    assert code == 0
    payload = json.loads(out)
    jsonschema.validate(payload, _schema("run_report.schema.json"))
    assert payload["exact"]["conditional"]["D0"] == pytest.approx(0.853553, abs=1e-6)
    assert payload["wall_time_s"] is None
    assert len(payload["scenario_hash"]) == 64


def test_simulate_exact_logic1(capsys):
    code, out = _run(capsys, "simulate", str(SCENARIOS / "slaz_m4n2.cfq"),
                     "--logic", "1", "--exact")
    assert code == 0
    payload = json.loads(out)
    assert payload["exact"]["probabilities"]["D0"] == 0.0
    assert payload["exact"]["conditional"]["D1"] == pytest.approx(1.0, abs=1e-12)


def test_simulate_with_trials(capsys, tmp_path):
    out_file = tmp_path / "report.json"
    code, _ = _run(capsys, "simulate", str(SCENARIOS / "slaz_m4n2.cfq"),
                   "--logic", "0", "--trials", "10000", "--seed", "5",
                   "--out", str(out_file))
    assert code == 0
    payload = json.loads(out_file.read_text())
    jsonschema.validate(payload, _schema("run_report.schema.json"))
    counts = payload["monte_carlo"]["counts"]
    assert sum(counts.values()) == 10000


def test_simulate_malformed_file_exits_2(capsys, tmp_path):
    bad = tmp_path / "bad.cfq"
    bad.write_text("format_version = 1\nscenario = nested\nhalf_mirror_r = 9\n")
    code = main(["simulate", str(bad), "--logic", "0"])
    err = capsys.readouterr().err
    assert code == 2
    assert "3:" in err  # line of the offending value


def test_simulate_missing_file_exits_2(capsys):
    assert main(["simulate", "/no/such/file.cfq", "--logic", "0"]) == 2


def test_transmit_round_trip(capsys, tmp_path):
    rng = np.random.default_rng(4)
    img = MonoImage.from_array(rng.integers(0, 2, (12, 12)))
    src = tmp_path / "in.pbm"
    src.write_bytes(encode_pbm(img))
    out1, out2 = tmp_path / "a.pbm", tmp_path / "b.pbm"
    stats1, stats2 = tmp_path / "a.json", tmp_path / "b.json"
    for out, stats in ((out1, stats1), (out2, stats2)):
        code = main(["transmit", str(SCENARIOS / "slaz_m4n2.cfq"),
                     "--image", str(src), "--out", str(out),
                     "--stats", str(stats), "--seed", "9"])
        assert code == 0
    assert out1.read_bytes() == out2.read_bytes()  # determinism, byte level
    assert stats1.read_bytes() == stats2.read_bytes()
    payload = json.loads(stats1.read_text())
    jsonschema.validate(payload, _schema("image_stats.schema.json"))
    assert payload["bits_sent"] == 144
    received = decode_pbm(out1.read_bytes())
    assert received.width == 12 and received.height == 12


def test_transmit_all_white_is_identity(capsys, tmp_path):
    img = MonoImage(6, 6, tuple([1] * 36))
    src = tmp_path / "white.pbm"
    src.write_bytes(encode_pbm(img))
    out = tmp_path / "out.pbm"
    code = main(["transmit", str(SCENARIOS / "slaz_m4n2.cfq"),
                 "--image", str(src), "--out", str(out), "--seed", "1"])
    assert code == 0
    assert decode_pbm(out.read_bytes()) == img


def test_transmit_bad_image_exits_2(capsys, tmp_path):
    src = tmp_path / "broken.pbm"
    src.write_bytes(b"P4\n8 8\nxx")
    code = main(["transmit", str(SCENARIOS / "slaz_m4n2.cfq"),
                 "--image", str(src), "--out", str(tmp_path / "o.pbm")])
    assert code == 2


def test_audit_block_case(capsys):
    code, out = _run(capsys, "audit", str(SCENARIOS / "slaz_m4n2.cfq"),
                     "--logic", "1")
    assert code == 0
    payload = json.loads(out)
    jsonschema.validate(payload, _schema("audit_report.schema.json"))
    assert payload["detectors"]["D0"]["traversing_share"] == 0.0
    assert payload["detectors"]["D1"]["traversing_share"] == 0.0
    assert payload["joint_absorbed_and_conclusive"] == 0.0
    assert payload["violation"]["probability"] == 0.0


def test_audit_coherent_source_has_positive_violation(capsys):
    code, out = _run(capsys, "audit", str(SCENARIOS / "slaz_m4n2.cfq"),
                     "--logic", "0", "--source", "coherent",
                     "--mean-photon-number", "1.0")
    assert code == 0
    payload = json.loads(out)
    assert payload["violation"]["probability"] > 0.0
    assert payload["joint_absorbed_and_conclusive"] == 0.0


def test_audit_size_limit_exits_4(capsys, tmp_path):
    big = tmp_path / "big.cfq"
    big.write_text("format_version = 1\nscenario = nested\nm = 26\nn = 1\n")
    assert main(["audit", str(big), "--logic", "0"]) == 4


def test_optimize_mirror(capsys):
    code, out = _run(capsys, "optimize-mirror", "--M", "4")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "r merit"
    optimum = float(lines[-1].split()[1])
    assert abs(optimum - 0.5) <= 1e-5


def test_optimize_mirror_m2_exits_2(capsys):
    assert main(["optimize-mirror", "--M", "2"]) == 2


def test_lock_demo_csv(capsys, tmp_path):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (out1, out2):
        code = main(["lock-demo", "--locked", "--seed", "3", "--out", str(out)])
        assert code == 0
    assert out1.read_bytes() == out2.read_bytes()
    rows = out1.read_text().strip().splitlines()
    assert rows[0] == "step,visibility"
    values = [float(r.split(",")[1]) for r in rows[1:]]
    assert len(values) == 25 * 60
    assert sum(values) / len(values) >= 0.98


def test_lock_demo_unlocked_is_worse(capsys, tmp_path):
    locked, unlocked = tmp_path / "l.csv", tmp_path / "u.csv"
    main(["lock-demo", "--locked", "--seed", "3", "--out", str(locked)])
    main(["lock-demo", "--unlocked", "--seed", "3", "--out", str(unlocked)])

    def mean(path):
        rows = path.read_text().strip().splitlines()[1:]
        vals = [float(r.split(",")[1]) for r in rows]
        return sum(vals) / len(vals)

    assert mean(unlocked) < mean(locked)


def test_lock_demo_zero_sigma_constant(capsys, tmp_path):
    out = tmp_path / "flat.csv"
    main(["lock-demo", "--sigma", "0", "--duration", "40", "--out", str(out)])
    values = {r.split(",")[1] for r in out.read_text().strip().splitlines()[1:]}
    assert len(values) == 1


def test_calibrate_report(capsys):
    code, out = _run(capsys, "calibrate")
    assert code == 0
    payload = json.loads(out)
    jsonschema.validate(payload, _schema("calibration_report.schema.json"))
    assert payload["within_tolerance"] is True
    assert 0.90 <= payload["visibility"] <= 1.0


def test_simulate_rerun_byte_identical(capsys, tmp_path):
    out1, out2 = tmp_path / "r1.json", tmp_path / "r2.json"
    for out in (out1, out2):
        main(["simulate", str(SCENARIOS / "slaz_m4n2.cfq"), "--logic", "0",
              "--trials", "50000", "--seed", "21", "--out", str(out)])
    assert out1.read_bytes() == out2.read_bytes()
