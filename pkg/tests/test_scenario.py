import json
from pathlib import Path

import pytest

from cantp_sim import attacks
from cantp_sim.scenario import (
    InvalidScenario,
    OutcomeClass,
    Scenario,
    TraceRecord,
    check_expectations,
    export_trace,
    format_trace,
    init_byte_ranges,
    load_scenario,
    parse_mitigations,
    report,
    run_matrix,
    run_scenario,
)

ROOT = Path(__file__).resolve().parent.parent
GOLDEN = Path(__file__).resolve().parent / "golden"
SCENARIOS = ROOT / "scenarios"


class TestTraceFormat:
    def test_single_frame_line(self):
        rec = TraceRecord(1_000_000, 0x7E0, bytes.fromhex("023E00CCCCCCCCCC"), 1)
        assert rec.candump() == "(1.000000) vcan0 7E0#023E00CCCCCCCCCC ; benign"

    def test_attack_annotation(self):
        trace = run_scenario(load_scenario(SCENARIOS / "strict_a3_overflow.ini")).trace
        lines = [r.candump() for r in trace if r.sender == 0]
        assert lines and all(l.endswith("; attack:A3") and " 7E0#32" in l for l in lines)

    def test_empty_trace_writes_nothing(self, tmp_path):
        target = tmp_path / "t.log"
        with pytest.raises(ValueError):
            export_trace([], target)
        assert not target.exists()

    def test_benign_golden(self, tmp_path):
        trace = run_scenario(load_scenario(SCENARIOS / "benign_identifiers.ini")).trace
        out = export_trace(trace, tmp_path / "b.log")
        assert out.read_text() == (GOLDEN / "benign_identifiers.log").read_text()

    def test_hardened_golden(self):
        sc = load_scenario(SCENARIOS / "strict_a3_overflow.ini").with_(profile="hardened")
        assert format_trace(run_scenario(sc).trace) == (GOLDEN / "hardened_a3.log").read_text()

    def test_timestamps_non_decreasing(self):
        trace = run_scenario(Scenario(attack=attacks.default_spec("A2"))).trace
        stamps = [r.timestamp_us for r in trace]
        assert stamps == sorted(stamps)

    def test_every_delivery_traced_once(self):
        result = run_scenario(Scenario(attack=attacks.default_spec("A6")))
        assert len(result.trace) == result.outcome.frames_total


class TestClassification:
    def test_init_ranges(self):
        assert init_byte_ranges(b"\0\0ab\0c", b"xyabzc", 0) == [(0, 2), (4, 5)]

    def test_init_bytes_that_belong_are_not_ranges(self):
        assert init_byte_ranges(b"a\0b", b"a\0b", 0) == []

    def test_sprayed_has_ranges_and_correct_tail(self):
        sc = Scenario(profile="vehicle", attack=attacks.default_spec("A6"))
        out = run_scenario(sc).outcome
        expected = sc.expected_payload()
        assert out.cls is OutcomeClass.SPRAYED and out.corrupted_ranges
        end = out.corrupted_ranges[-1][1]
        assert out.payload[end:] == expected[end:]

    def test_single_frame_override_corrupts(self):
        spec = attacks.default_spec("A6", frame_kind="SF")
        out = run_scenario(Scenario(profile="vehicle", attack=spec)).outcome
        assert out.cls is OutcomeClass.CORRUPTED

    def test_horizon_reached(self):
        out = run_scenario(Scenario(horizon_us=1000)).outcome
        assert out.cls is OutcomeClass.TIMED_OUT and out.reason == "horizon"

    def test_trigger_never_fired_noted(self):
        spec = attacks.default_spec("A4", trigger=attacks.OnConsecutiveFrameObserved(nth=50))
        out = run_scenario(Scenario(attack=spec)).outcome
        assert out.cls is OutcomeClass.COMPLETED
        assert out.notes == ["TriggerNeverFired: A4"]

    def test_amplified_when_retry_succeeds(self):
        # A one-shot flood kills the first attempt; the retry gets through.
        spec = attacks.default_spec("A8", trigger=attacks.AtTime(1600))
        out = run_scenario(Scenario(attack=spec)).outcome
        assert out.cls is OutcomeClass.AMPLIFIED and out.attempts == 2
        assert out.factor > 2


class TestReport:
    def test_single_entry(self):
        doc = json.loads(report([run_scenario(Scenario()).outcome]))
        (entry,) = doc["scenarios"]
        assert entry["class"] == "Completed"
        assert {"name", "class", "attempts", "elapsed_us", "factor", "alerts"} <= set(entry)

    def test_matrix_has_27_entries(self):
        assert len(json.loads(report(run_matrix(Scenario())))["scenarios"]) == 27

    def test_empty_report_rejected(self):
        with pytest.raises(ValueError):
            report([])

    def test_identical_seeds_identical_reports(self):
        sc = Scenario(seed=11, attack=attacks.default_spec("A5"), profile="vehicle")
        assert report([run_scenario(sc).outcome]) == report([run_scenario(sc).outcome])


class TestScenarioFiles:
    @pytest.mark.parametrize("path", sorted(SCENARIOS.glob("*.ini")), ids=lambda p: p.stem)
    def test_shipped_scenarios_meet_expectations(self, path):
        sc = load_scenario(path)
        assert check_expectations(run_scenario(sc).outcome, sc.expect) == []

    def test_unknown_key_rejected(self, tmp_path):
        p = tmp_path / "bad.ini"
        p.write_text("[transport]\nbogus = 1\n")
        with pytest.raises(InvalidScenario):
            load_scenario(p)

    def test_bad_profile(self, tmp_path):
        p = tmp_path / "bad.ini"
        p.write_text("[scenario]\nprofile = lenient\n")
        with pytest.raises(InvalidScenario):
            load_scenario(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(InvalidScenario):
            load_scenario(tmp_path / "nope.ini")

    def test_non_positive_horizon(self):
        with pytest.raises(InvalidScenario):
            Scenario(horizon_us=0)

    def test_attack_section(self, tmp_path):
        p = tmp_path / "a.ini"
        p.write_text("[attack]\nid = A6\nframe_kind = SF\npayload = 7f2278\ntrigger = cf:3\n")
        spec = load_scenario(p).attack
        assert spec.frame_kind == "SF" and spec.payload == b"\x7f\x22\x78" and spec.trigger.nth == 3

    def test_mitigation_syntax(self):
        assert parse_mitigations("all-m4").enabled() == ["m1", "m2", "m3", "m5", "m6", "m7", "m8"]
        assert parse_mitigations("m1, m5").enabled() == ["m1", "m5"]
        assert parse_mitigations("none").enabled() == []
        with pytest.raises(InvalidScenario):
            parse_mitigations("m0")

    def test_expectation_failures_reported(self):
        out = run_scenario(Scenario()).outcome
        assert check_expectations(out, {"class": "Sprayed"}) == ["class: expected Sprayed, got Completed"]
        assert check_expectations(out, {"class": "Sprayed|Completed"}) == []
        assert check_expectations(out, {"frobnicate": "1"})
