import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cantp_sim.bus import BusConfig, VirtualBus
from cantp_sim.codec import RawCanFrame


def frame(can_id, tag=0):
    return RawCanFrame(can_id, bytes([tag]) * 8)


def bus_with(*nodes, **cfg):
    b = VirtualBus(BusConfig(**cfg))
    for n in nodes:
        b.attach(n)
    return b


class TestTiming:
    def test_frame_time_at_500k(self):
        assert BusConfig(500_000, 128).frame_time_us == 256

    def test_bitrate_must_be_positive(self):
        with pytest.raises(ValueError):
            BusConfig(bitrate_bps=0)

    def test_single_frame_takes_one_frame_time(self):
        b = bus_with(1, 2)
        b.submit(1, frame(0x7E0), 0)
        log = b.step(1000)
        assert [(d.timestamp, d.sender) for d in log] == [(256, 1)]
        assert log[0].frame.timestamp == 256

    def test_empty_bus_advances_clock(self):
        b = bus_with(1)
        assert b.step(5000) == [] and b.now == 5000

    def test_step_stops_at_until(self):
        b = bus_with(1, 2)
        b.submit(1, frame(0x100), 0)
        b.submit(1, frame(0x101), 0)
        assert len(b.step(300)) == 1
        assert len(b.step(600)) == 1

    def test_cannot_step_backwards(self):
        b = bus_with(1)
        b.step(10)
        with pytest.raises(ValueError):
            b.step(5)


class TestArbitration:
    def test_lower_identifier_first(self):
        b = bus_with(1, 2)
        b.submit(2, frame(0x7E8), 0)
        b.submit(1, frame(0x100), 0)
        assert [d.frame.can_id for d in b.step(10_000)] == [0x100, 0x7E8]

    def test_same_identifier_breaks_on_node_then_order(self):
        b = bus_with(1, 2, 3)
        b.submit(3, frame(0x7E0, 1), 0)
        b.submit(2, frame(0x7E0, 2), 0)
        b.submit(2, frame(0x7E0, 3), 0)
        assert [d.frame.data[0] for d in b.step(10_000)] == [2, 3, 1]

    def test_flood_blocks_diagnostic_frame(self):
        b = bus_with(1, 2, 3)
        b.flood(3, 0x100, 100, 0, 0)
        b.submit(2, frame(0x7E8), 0)
        log = b.step(10**6)
        assert [d.frame.can_id for d in log][-1] == 0x7E8
        assert log[-1].timestamp == 101 * 256

    def test_low_priority_flood_does_not_block(self):
        b = bus_with(1, 2, 3)
        b.flood(3, 0x7FF, 100, 0, 0)
        b.submit(2, frame(0x7E8), 0)
        log = b.step(10**6)
        assert log[0].frame.can_id == 0x7E8

    def test_flood_of_one_equals_submit(self):
        a, c = bus_with(1, 3), bus_with(1, 3)
        a.flood(3, 0x123, 1, 200, 50)
        c.submit(3, RawCanFrame(0x123, bytes(8), 50), 50)
        assert a.step(10_000) == c.step(10_000)

    def test_flood_count_must_be_positive(self):
        with pytest.raises(ValueError):
            bus_with(3).flood(3, 0x0, 0, 100, 0)

    def test_frames_submitted_at_same_instant_compete(self):
        b = bus_with(1, 2)
        assert b.complete(0) == []
        b.submit(2, frame(0x7E8), 0)
        b.submit(1, frame(0x7E0), 0)
        assert b.arbitrate(0).frame.can_id == 0x7E0


class TestLoad:
    def test_saturated_bus_reports_full_load(self):
        b = bus_with(3)
        b.flood(3, 0x0, 2000, 200, 0)
        b.step(200_000)
        assert b.load(100_000) == pytest.approx(1.0)

    def test_idle_bus_reports_zero(self):
        b = bus_with(1)
        b.step(100_000)
        assert b.load(100_000) == 0.0

    def test_partial_load(self):
        b = bus_with(1, 2)
        for i in range(10):
            b.submit(1, frame(0x100), i * 1000)
        b.step(10_000)
        assert b.load(10_000) == pytest.approx(0.256)


submissions = st.lists(
    st.tuples(st.integers(1, 4), st.integers(0, 0x7FF), st.integers(0, 5000)), min_size=1, max_size=40
)


def run(subs):
    b = bus_with(1, 2, 3, 4)
    for node, can_id, at in subs:
        b.submit(node, RawCanFrame(can_id, bytes(8), at), at)
    return b.run_all()


class TestProperties:
    @settings(max_examples=100)
    @given(submissions)
    def test_conservation(self, subs):
        log = run(subs)
        assert sorted((d.sender, d.frame.can_id) for d in log) == sorted((n, c) for n, c, _ in subs)

    @settings(max_examples=100)
    @given(submissions)
    def test_deterministic(self, subs):
        assert run(subs) == run(subs)

    @settings(max_examples=100)
    @given(submissions)
    def test_arbitration_order(self, subs):
        b = bus_with(1, 2, 3, 4)
        for i, (node, can_id, at) in enumerate(subs):
            b.submit(node, RawCanFrame(can_id, i.to_bytes(2, "big"), at), at)
        log = b.run_all()
        submitted = {int.from_bytes(d.frame.data, "big"): subs[int.from_bytes(d.frame.data, "big")][2] for d in log}
        for d in log:
            for other in log:
                tag = int.from_bytes(other.frame.data, "big")
                pending_when_d_won = submitted[tag] <= d.started_at < other.started_at
                if pending_when_d_won:
                    assert other.frame.can_id >= d.frame.can_id

    @settings(max_examples=100)
    @given(submissions)
    def test_bus_never_overlaps(self, subs):
        log = run(subs)
        for a, b in zip(log, log[1:]):
            assert b.started_at >= a.timestamp
