import pytest

from cantp_sim.diag import (
    DTC_REQUEST,
    IDENTIFIERS_REQUEST,
    DiagRequest,
    EcuDataStore,
    RetryPolicy,
    addressing_plan,
    default_identifier_blob,
    ecu_serve,
    render_dtc_count,
)
from cantp_sim.scenario import OutcomeClass, Scenario, run_scenario
from cantp_sim import attacks


class TestAddressing:
    def test_tool_requests_on_7e0(self):
        assert addressing_plan("tool") == (0x7E0, 0x7E8)

    def test_ecu_responds_on_7e8(self):
        assert addressing_plan("ecu") == (0x7E8, 0x7E0)

    def test_ids_in_diagnostic_range(self):
        for role in ("tool", "ecu"):
            assert all(0x700 <= i <= 0x7FF for i in addressing_plan(role))

    def test_unknown_role(self):
        with pytest.raises(ValueError):
            addressing_plan("gateway")


class TestEcuServe:
    def test_identifiers_blob(self):
        store = EcuDataStore()
        assert ecu_serve(IDENTIFIERS_REQUEST, store) == store.identifiers
        assert len(store.identifiers) == 64 and 0 not in store.identifiers

    def test_dtc_count_round_trip(self):
        payload = ecu_serve(DTC_REQUEST, EcuDataStore(dtc_count=4))
        assert payload[:3] == bytes.fromhex("5902ff")
        assert render_dtc_count(payload) == (4, False)

    def test_unknown_service_negative_response(self):
        assert ecu_serve(DiagRequest(0x31, b"\x01"), EcuDataStore()) == bytes([0x7F, 0x31, 0x11])

    def test_blob_must_force_segmentation(self):
        with pytest.raises(ValueError):
            EcuDataStore(identifiers=b"1234567")

    def test_blob_length_configurable(self):
        assert len(default_identifier_blob(300)) == 300

    def test_request_encoding(self):
        assert DiagRequest.decode(bytes.fromhex("22f190")) == IDENTIFIERS_REQUEST
        with pytest.raises(ValueError):
            DiagRequest.decode(b"")


class TestDtcRendering:
    def test_unparseable_defaults_to_zero(self):
        assert render_dtc_count(bytes(35)) == (0, True)
        assert render_dtc_count(None) == (0, True)


class TestToolExchange:
    def test_benign_completes_first_attempt(self):
        out = run_scenario(Scenario()).outcome
        assert out.cls is OutcomeClass.COMPLETED and out.attempts == 1
        assert out.payload == EcuDataStore().identifiers

    def test_retries_bounded_and_elapsed_covers_every_timeout(self):
        sc = Scenario(profile="vehicle", attack=attacks.default_spec("A5"), retry=RetryPolicy(3, 1_000_000))
        result = run_scenario(sc)
        assert result.outcome.attempts == 4
        assert result.outcome.elapsed_us >= 4 * 1_000_000
        starts = [a.started_at for a in result.exchange.history]
        assert starts == sorted(starts)

    def test_zero_retries(self):
        sc = Scenario(profile="vehicle", attack=attacks.default_spec("A5"), retry=RetryPolicy(0, 500_000))
        out = run_scenario(sc).outcome
        assert out.attempts == 1 and out.elapsed_us >= 500_000

    def test_dtc_under_a4_defaults(self):
        sc = Scenario(profile="vehicle", request=DTC_REQUEST, dtc_count=8, attack=attacks.default_spec("A4"))
        out = run_scenario(sc).outcome
        assert out.cls is OutcomeClass.DEFAULTED and out.dtc_count == 0

    def test_silent_ecu_times_out(self):
        sc = Scenario(request=DiagRequest(0x22, b"\xf1\x90"), response_delay_us=5_000_000, retry=RetryPolicy(1, 1_000_000))
        out = run_scenario(sc).outcome
        assert out.cls is OutcomeClass.TIMED_OUT and out.attempts == 2

    def test_retry_policy_validation(self):
        with pytest.raises(ValueError):
            RetryPolicy(-1)
