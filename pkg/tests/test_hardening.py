import pytest
from hypothesis import given
from hypothesis import strategies as st

from cantp_sim import attacks
from cantp_sim.codec import ConsecutiveFrame, FirstFrame, FlowControl, SingleFrame
from cantp_sim.hardening import (
    Action,
    FcContext,
    MitigationSet,
    RxContext,
    admit_session,
    check_ff_dl,
    dynamic_timeout,
    validate_cf,
    validate_fc,
)
from cantp_sim.scenario import OutcomeClass, Scenario, format_trace, run_scenario
from cantp_sim.transport import (
    MitigationAlert,
    ReceiverState,
    TransportConfig,
    hardened,
    receiver_on_frame,
)

ALL = MitigationSet.all()
NONE = MitigationSet()
MID_BLOCK = FcContext(fc_due=False, fcs_since_ff=1, ff_dl=64)
FIRST_FC = FcContext(fc_due=True, fcs_since_ff=0, ff_dl=64)


class TestMitigationSet:
    def test_only_and_without(self):
        assert MitigationSet.only("m3").enabled() == ["m3"]
        assert "m5" not in ALL.without("m5").enabled() and len(ALL.without("m5").enabled()) == 7

    def test_unknown_name(self):
        with pytest.raises(ValueError):
            MitigationSet.only("m9")


class TestValidateFc:
    def test_unsolicited_cts_rejected_with_m1(self):
        v = validate_fc(MID_BLOCK, FlowControl(0, 1, 0), ALL)
        assert v.action is Action.REJECT and v.alert.attack == "A1"

    def test_legitimate_cts_accepted(self):
        assert validate_fc(FIRST_FC, FlowControl(0), ALL).passes

    def test_extra_wait_rejected_with_m2(self):
        assert validate_fc(MID_BLOCK, FlowControl(1), ALL).alert.attack == "A2"

    def test_overflow_only_as_first_fc_with_m3(self):
        assert validate_fc(FIRST_FC, FlowControl(2), ALL).passes
        assert validate_fc(MID_BLOCK, FlowControl(2), ALL).alert.attack == "A3"
        late_but_due = FcContext(fc_due=True, fcs_since_ff=2, ff_dl=64)
        assert not validate_fc(late_but_due, FlowControl(2), ALL).passes

    def test_reserved_rejected_with_m7(self):
        v = validate_fc(FIRST_FC, FlowControl(0xF), ALL)
        assert v.action is Action.REJECT and v.alert.attack == "A7"

    @given(st.integers(0, 15), st.booleans(), st.integers(0, 3))
    def test_no_mitigations_accept_everything(self, fs, due, seen):
        assert validate_fc(FcContext(due, seen, 64), FlowControl(fs), NONE).passes


class TestValidateCf:
    def test_discard_with_m5(self):
        v = validate_cf(RxContext(True, expected_sn=3), ConsecutiveFrame(9, bytes(7)), ALL)
        assert v.action is Action.DISCARD and v.alert.attack == "A5"

    def test_matching_sn_accepted(self):
        assert validate_cf(RxContext(True, expected_sn=3), ConsecutiveFrame(3, bytes(7)), ALL).passes

    def test_discard_then_continue(self):
        cfg = TransportConfig(profile=hardened(ALL))
        rx = ReceiverState(fc_id=0x7E0)
        receiver_on_frame(rx, FirstFrame(20, bytes(6)), cfg, 0)
        receiver_on_frame(rx, ConsecutiveFrame(1, bytes(7)), cfg, 1)
        _, ev = receiver_on_frame(rx, ConsecutiveFrame(9, bytes(7)), cfg, 2)
        assert isinstance(ev[0], MitigationAlert)
        _, ev = receiver_on_frame(rx, ConsecutiveFrame(2, bytes(7)), cfg, 3)
        assert ev[-1].payload == bytes(20)


class TestAdmitSession:
    def test_enqueue_during_reception(self):
        v = admit_session(RxContext(True), FirstFrame(64, bytes(6)), ALL)
        assert v.action is Action.ENQUEUE and v.alert.attack == "A6"

    def test_queue_full_rejects(self):
        v = admit_session(RxContext(True, queued=1), SingleFrame(b"\x01"), ALL)
        assert v.action is Action.REJECT

    def test_idle_admits(self):
        assert admit_session(RxContext(False), FirstFrame(64, bytes(6)), ALL).passes

    def test_without_m6_admits_override(self):
        assert admit_session(RxContext(True), FirstFrame(64, bytes(6)), NONE).passes


class TestCheckFfDl:
    def test_escape_rejected_for_identifiers(self):
        v = check_ff_dl(RxContext(True, service_id=0x22), FirstFrame(0xFFFFFFFF, bytes(2)), ALL)
        assert v.alert.attack == "A4"

    def test_small_length_accepted(self):
        assert check_ff_dl(RxContext(False, service_id=0x22), FirstFrame(64, bytes(6)), ALL).passes

    def test_above_ceiling_rejected(self):
        assert not check_ff_dl(RxContext(False, service_id=0x22), FirstFrame(4095, bytes(6)), ALL).passes

    def test_allow_listed_service_passes(self):
        assert check_ff_dl(RxContext(False, service_id=0x36), FirstFrame(0xFFFFFFFF, bytes(2)), ALL).passes


class TestDynamicTimeout:
    def test_zero_load_is_base(self):
        assert dynamic_timeout(1_000_000, 0.0, ALL) == 1_000_000

    def test_full_load_five_times(self):
        assert dynamic_timeout(1_000_000, 1.0, ALL) == 5_000_000

    def test_cap(self):
        assert dynamic_timeout(1_000_000, 1.0, MitigationSet.all(m8_gain=20)) == 10_000_000

    def test_disabled(self):
        assert dynamic_timeout(1_000_000, 1.0, NONE) == 1_000_000

    @given(st.floats(0, 1), st.floats(0, 1))
    def test_monotone_in_load(self, a, b):
        lo, hi = sorted((a, b))
        assert dynamic_timeout(10**6, lo, ALL) <= dynamic_timeout(10**6, hi, ALL)


def hardened_run(attack, ms, seed=0):
    return run_scenario(Scenario(profile="hardened", mitigations=ms, attack=attacks.default_spec(attack), seed=seed)).outcome


class TestScenarios:
    @pytest.mark.parametrize("k", range(1, 9))
    def test_only_mk_defeats_ak(self, k):
        out = hardened_run(f"A{k}", MitigationSet.only(f"m{k}"))
        assert out.cls is OutcomeClass.COMPLETED
        assert f"A{k}" in out.alert_classes

    @pytest.mark.parametrize("k", range(1, 9))
    def test_all_but_mk_re_exposes_ak(self, k):
        out = hardened_run(f"A{k}", ALL.without(f"m{k}"))
        assert out.cls is not OutcomeClass.COMPLETED

    @pytest.mark.parametrize("seed", range(3))
    def test_full_set_is_sound_for_benign_traffic(self, seed):
        strict = run_scenario(Scenario(seed=seed))
        full = run_scenario(Scenario(seed=seed, profile="hardened", mitigations=ALL))
        assert full.outcome.alerts == []
        assert format_trace(full.trace) == format_trace(strict.trace)
