"""Sender and receiver state machines for ISO 15765-2 segmented transfer.

The machines are step functions ``(state, input, cfg, now) -> (state, events)``.
They own no clock and no timers; the caller asks ``*_next_timer`` when to
call back and feeds bus deliveries in. State objects are updated in place and
returned for convenience.

Three endpoint profiles select error-handling behaviour:

* ``STRICT``   applies every FC it receives during a transfer (the most
  recent FC governs), aborts on reserved flow status, and enforces the
  Wait budget.
* ``VEHICLE``  only honours the first FC of each wait window, silently drops
  reserved flow status, and uses a wide timeout margin. An oversize FF during
  reception wipes the buffer instead of aborting.
* ``HARDENED`` is ``STRICT`` with a ``MitigationSet`` screening each frame.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

from . import hardening
from .codec import (
    CF_MAX_PAYLOAD,
    DEFAULT_PADDING,
    FF_DL_12BIT_MAX,
    FF_ESC_PAYLOAD,
    FF_PAYLOAD,
    SF_MAX_PAYLOAD,
    ConsecutiveFrame,
    FirstFrame,
    FlowControl,
    FlowStatus,
    PaddingPolicy,
    RawCanFrame,
    SingleFrame,
    TpFrame,
    decode_tp_frame,
    encode_tp_frame,
    stmin_to_duration,
)
from .hardening import Alert, MitigationSet

VEHICLE_TIMEOUT_MARGIN = 4.0


class EmptyPayload(ValueError):
    pass


class ProfileKind(enum.Enum):
    STRICT = "strict"
    VEHICLE = "vehicle"
    HARDENED = "hardened"


@dataclass(frozen=True)
class EndpointProfile:
    kind: ProfileKind
    mitigations: MitigationSet = field(default_factory=MitigationSet)

    @property
    def timeout_margin(self) -> float:
        return VEHICLE_TIMEOUT_MARGIN if self.kind is ProfileKind.VEHICLE else 1.0

    @property
    def hardened(self) -> bool:
        return self.kind is ProfileKind.HARDENED

    def __str__(self) -> str:
        if self.hardened:
            return f"hardened[{','.join(self.mitigations.enabled())}]"
        return self.kind.value


STRICT = EndpointProfile(ProfileKind.STRICT)
VEHICLE = EndpointProfile(ProfileKind.VEHICLE)


def hardened(mitigations: Optional[MitigationSet] = None) -> EndpointProfile:
    return EndpointProfile(ProfileKind.HARDENED, mitigations or MitigationSet.all())


@dataclass(frozen=True)
class TransportConfig:
    bs: int = 0
    stmin_raw: int = 0
    wft_max: int = 3
    timeout_fc_us: int = 1_000_000
    timeout_cf_us: int = 1_000_000
    timeout_tolerance: float = 0.5
    rx_buffer_capacity: int = 1024
    padding: PaddingPolicy = DEFAULT_PADDING
    profile: EndpointProfile = STRICT
    init_byte: int = 0x00

    def __post_init__(self) -> None:
        if not 0 <= self.bs <= 0xFF or not 0 <= self.stmin_raw <= 0xFF:
            raise ValueError("bs and stmin_raw must be bytes")
        if self.wft_max < 0:
            raise ValueError("wft_max must be >= 0")
        if not 0.0 <= self.timeout_tolerance <= 0.5:
            raise ValueError("timeout_tolerance must lie in 0.0..0.5")
        if self.rx_buffer_capacity < 8:
            raise ValueError("rx_buffer_capacity must be >= 8")
        if self.timeout_fc_us <= 0 or self.timeout_cf_us <= 0:
            raise ValueError("timeouts must be positive")

    def allowed_us(self, base_us: int, bus_load: float = 0.0) -> int:
        """Time allowed before a timeout fires, tolerance and margin included."""
        if self.profile.hardened:
            base_us = hardening.dynamic_timeout(base_us, bus_load, self.profile.mitigations)
        return int(base_us * (1.0 + self.timeout_tolerance) * self.profile.timeout_margin)


class AbortReason(enum.Enum):
    FC_TIMEOUT = "FcTimeout"
    CF_TIMEOUT = "CfTimeout"
    WFT_EXCEEDED = "WftExceeded"
    OVERFLOW_REPORTED = "OverflowReported"
    RESERVED_FS = "ReservedFs"
    BUFFER_OVERFLOW = "BufferOverflow"
    SN_VIOLATION = "SnViolation"

    @property
    def is_timeout(self) -> bool:
        return self in (AbortReason.FC_TIMEOUT, AbortReason.CF_TIMEOUT)

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class FrameOut:
    frame: RawCanFrame
    at: int


@dataclass(frozen=True)
class MessageComplete:
    payload: bytes


@dataclass(frozen=True)
class MessageAborted:
    reason: AbortReason
    side: str  # "tx" or "rx"
    at: int = 0


@dataclass(frozen=True)
class MitigationAlert:
    alert: Alert
    at: int = 0

    @property
    def attack_class(self) -> str:
        return self.alert.attack


TpEvent = Union[FrameOut, MessageComplete, MessageAborted, MitigationAlert]


# --------------------------------------------------------------------------
# sender


class SenderPhase(enum.Enum):
    IDLE = "idle"
    AWAITING_FC = "awaiting_fc"
    SENDING_BLOCK = "sending_block"
    PAUSED = "paused"
    DONE = "done"
    ABORTED = "aborted"


_TX_ACTIVE = (SenderPhase.AWAITING_FC, SenderPhase.SENDING_BLOCK, SenderPhase.PAUSED)


@dataclass
class SenderState:
    can_id: int
    phase: SenderPhase = SenderPhase.IDLE
    payload: bytes = b""
    offset: int = 0
    next_sn: int = 1
    cfs_left_in_block: Optional[int] = None  # None: no FC needed until the end
    wait_frames_seen: int = 0
    deadline: Optional[int] = None
    wait_started: int = 0
    stmin_us: int = 0
    next_cf_at: Optional[int] = None
    last_cf_at: Optional[int] = None
    in_flight: bool = False
    fcs_applied: int = 0
    abort_reason: Optional[AbortReason] = None


def _out(can_id: int, frame: TpFrame, cfg: TransportConfig, now: int) -> FrameOut:
    return FrameOut(RawCanFrame(can_id, encode_tp_frame(frame, cfg.padding), now), now)


def segment_payload(payload: bytes, cfg: TransportConfig = TransportConfig()) -> List[TpFrame]:
    """Split a multi-frame payload into its FF and CF sequence."""
    if len(payload) <= SF_MAX_PAYLOAD:
        raise ValueError("payload fits a single frame")
    head = FF_ESC_PAYLOAD if len(payload) > FF_DL_12BIT_MAX else FF_PAYLOAD
    frames: List[TpFrame] = [FirstFrame(len(payload), payload[:head])]
    sn = 1
    for i in range(head, len(payload), CF_MAX_PAYLOAD):
        frames.append(ConsecutiveFrame(sn, payload[i:i + CF_MAX_PAYLOAD]))
        sn = (sn + 1) & 0xF
    return frames


def sender_start(
    payload: bytes, cfg: TransportConfig, now: int, can_id: int = 0x7E8
) -> Tuple[SenderState, List[TpEvent]]:
    if not payload:
        raise EmptyPayload("nothing to send")
    payload = bytes(payload)
    st = SenderState(can_id=can_id, payload=payload, in_flight=True)
    if len(payload) <= SF_MAX_PAYLOAD:
        st.phase = SenderPhase.DONE
        st.offset = len(payload)
        return st, [_out(can_id, SingleFrame(payload), cfg, now)]
    head = FF_ESC_PAYLOAD if len(payload) > FF_DL_12BIT_MAX else FF_PAYLOAD
    ff = FirstFrame(len(payload), payload[:head])
    st.offset = head
    st.phase = SenderPhase.AWAITING_FC
    st.wait_started = now
    st.deadline = now + cfg.allowed_us(cfg.timeout_fc_us)
    return st, [_out(can_id, ff, cfg, now)]


def _abort_tx(st: SenderState, reason: AbortReason, now: int) -> List[TpEvent]:
    st.phase = SenderPhase.ABORTED
    st.abort_reason = reason
    st.deadline = None
    st.next_cf_at = None
    return [MessageAborted(reason, "tx", now)]


def _emit_cf(st: SenderState, cfg: TransportConfig, now: int) -> List[TpEvent]:
    chunk = st.payload[st.offset: st.offset + CF_MAX_PAYLOAD]
    ev = _out(st.can_id, ConsecutiveFrame(st.next_sn, chunk), cfg, now)
    st.offset += len(chunk)
    st.next_sn = (st.next_sn + 1) & 0xF
    st.in_flight = True
    st.last_cf_at = now
    st.next_cf_at = None
    if st.cfs_left_in_block is not None:
        st.cfs_left_in_block -= 1
    if st.offset >= len(st.payload):
        st.phase = SenderPhase.DONE
    elif st.cfs_left_in_block == 0:
        st.phase = SenderPhase.AWAITING_FC
        st.wait_started = now
        st.deadline = now + cfg.allowed_us(cfg.timeout_fc_us)
    return [ev]


def sender_on_frame(
    st: SenderState, frame: TpFrame, cfg: TransportConfig, now: int
) -> Tuple[SenderState, List[TpEvent]]:
    if not isinstance(frame, FlowControl) or st.phase not in _TX_ACTIVE:
        return st, []
    fc_due = st.phase is not SenderPhase.SENDING_BLOCK
    profile = cfg.profile
    if profile.hardened:
        ctx = hardening.FcContext(fc_due, st.fcs_applied, len(st.payload))
        verdict = hardening.validate_fc(ctx, frame, profile.mitigations)
        if not verdict.passes:
            return st, [MitigationAlert(verdict.alert, now)]
    elif profile.kind is ProfileKind.VEHICLE:
        if not fc_due or frame.status is FlowStatus.RESERVED:
            return st, []

    status = frame.status
    if status is FlowStatus.RESERVED:
        return st, _abort_tx(st, AbortReason.RESERVED_FS, now)
    if status is FlowStatus.OVERFLOW:
        return st, _abort_tx(st, AbortReason.OVERFLOW_REPORTED, now)
    st.fcs_applied += 1
    if status is FlowStatus.WAIT:
        st.wait_frames_seen += 1
        if st.wait_frames_seen > cfg.wft_max:
            return st, _abort_tx(st, AbortReason.WFT_EXCEEDED, now)
        st.phase = SenderPhase.PAUSED
        st.next_cf_at = None
        st.wait_started = now
        st.deadline = now + cfg.allowed_us(cfg.timeout_fc_us)
        return st, []

    # ContinueToSend. Resuming once the Wait budget is used up counts as a
    # performance failure for the literal profiles.
    if profile.kind is not ProfileKind.VEHICLE and 0 < st.wait_frames_seen >= cfg.wft_max:
        return st, _abort_tx(st, AbortReason.WFT_EXCEEDED, now)
    was_sending = st.phase is SenderPhase.SENDING_BLOCK
    st.wait_frames_seen = 0
    st.cfs_left_in_block = frame.bs or None
    st.stmin_us = stmin_to_duration(frame.stmin_raw)
    st.phase = SenderPhase.SENDING_BLOCK
    st.deadline = None
    if st.in_flight:
        st.next_cf_at = None
        return st, []
    if was_sending and st.last_cf_at is not None:
        st.next_cf_at = max(now, st.last_cf_at + st.stmin_us)
    else:
        st.next_cf_at = now
    if st.next_cf_at <= now:
        return st, _emit_cf(st, cfg, now)
    return st, []


def sender_on_tx_confirm(
    st: SenderState, cfg: TransportConfig, now: int
) -> Tuple[SenderState, List[TpEvent]]:
    """The last frame handed to the bus has been transmitted."""
    st.in_flight = False
    if st.phase is SenderPhase.SENDING_BLOCK:
        last = st.last_cf_at if st.last_cf_at is not None else now
        st.next_cf_at = max(now, last + st.stmin_us)
        if st.next_cf_at <= now:
            return st, _emit_cf(st, cfg, now)
    return st, []


def sender_on_timer(
    st: SenderState, cfg: TransportConfig, now: int, bus_load: float = 0.0
) -> Tuple[SenderState, List[TpEvent]]:
    if st.phase in (SenderPhase.AWAITING_FC, SenderPhase.PAUSED):
        if st.deadline is None or now <= st.deadline:
            return st, []
        events: List[TpEvent] = []
        if _stretch(st, cfg, cfg.timeout_fc_us, now, bus_load, events):
            return st, events
        return st, _abort_tx(st, AbortReason.FC_TIMEOUT, now)
    if (
        st.phase is SenderPhase.SENDING_BLOCK
        and not st.in_flight
        and st.next_cf_at is not None
        and now >= st.next_cf_at
    ):
        return st, _emit_cf(st, cfg, now)
    return st, []


def sender_next_timer(st: SenderState) -> Optional[int]:
    if st.phase in (SenderPhase.AWAITING_FC, SenderPhase.PAUSED) and st.deadline is not None:
        return st.deadline + 1
    if st.phase is SenderPhase.SENDING_BLOCK and not st.in_flight:
        return st.next_cf_at
    return None


def _stretch(st, cfg: TransportConfig, base_us: int, now: int, bus_load: float, events) -> bool:
    """M8: push the deadline out when bus load explains the delay."""
    ms = cfg.profile.mitigations
    if not (cfg.profile.hardened and ms.m8):
        return False
    stretched = st.wait_started + cfg.allowed_us(base_us, bus_load)
    if stretched < now:
        return False
    st.deadline = stretched
    events.append(
        MitigationAlert(
            Alert("A8", f"bus load {bus_load:.2f}: timeout stretched to {stretched - st.wait_started} us"),
            now,
        )
    )
    return True


# --------------------------------------------------------------------------
# receiver


class ReceiverPhase(enum.Enum):
    IDLE = "idle"
    RECEIVING = "receiving"
    DONE = "done"
    ABORTED = "aborted"


@dataclass
class ReceiverState:
    fc_id: int  # identifier the receiver sends flow control on
    phase: ReceiverPhase = ReceiverPhase.IDLE
    expected_sn: int = 1
    expected_total: int = 0
    assembled: bytearray = field(default_factory=bytearray)
    cursor: int = 0
    block_count: int = 0
    first_fc_sent: bool = False
    deadline: Optional[int] = None
    wait_started: int = 0
    cfs_received: int = 0
    service_id: Optional[int] = None  # pending request, consulted by M4
    queue: list = field(default_factory=list)
    abort_reason: Optional[AbortReason] = None


def _fc(st: ReceiverState, cfg: TransportConfig, status: FlowStatus, now: int) -> FrameOut:
    if status is FlowStatus.CONTINUE_TO_SEND:
        fc = FlowControl(int(status), cfg.bs, cfg.stmin_raw)
    else:
        fc = FlowControl(int(status))
    return _out(st.fc_id, fc, cfg, now)


def _abort_rx(st: ReceiverState, reason: AbortReason, now: int) -> List[TpEvent]:
    st.phase = ReceiverPhase.ABORTED
    st.abort_reason = reason
    st.deadline = None
    return [MessageAborted(reason, "rx", now)]


def _arm_cf_timer(st: ReceiverState, cfg: TransportConfig, now: int) -> None:
    st.wait_started = now
    st.deadline = now + cfg.allowed_us(cfg.timeout_cf_us)


def _rx_ctx(st: ReceiverState) -> hardening.RxContext:
    return hardening.RxContext(
        receiving=st.phase is ReceiverPhase.RECEIVING,
        expected_sn=st.expected_sn,
        queued=len(st.queue),
        service_id=st.service_id,
    )


def _complete(st: ReceiverState, cfg: TransportConfig, now: int) -> List[TpEvent]:
    st.phase = ReceiverPhase.DONE
    st.deadline = None
    events: List[TpEvent] = [MessageComplete(bytes(st.assembled[: st.expected_total]))]
    while st.queue and st.phase is not ReceiverPhase.RECEIVING:
        _, more = receiver_on_frame(st, st.queue.pop(0), cfg, now)
        events.extend(more)
    return events


def receiver_on_frame(
    st: ReceiverState, frame: TpFrame, cfg: TransportConfig, now: int
) -> Tuple[ReceiverState, List[TpEvent]]:
    if isinstance(frame, FlowControl):
        return st, []
    events: List[TpEvent] = []
    if st.phase is ReceiverPhase.RECEIVING and st.deadline is not None and now > st.deadline:
        _, events = receiver_on_timer(st, cfg, now)
    profile = cfg.profile
    receiving = st.phase is ReceiverPhase.RECEIVING

    if isinstance(frame, SingleFrame):
        if receiving and profile.hardened:
            verdict = hardening.admit_session(_rx_ctx(st), frame, profile.mitigations)
            if verdict.alert is not None:
                events.append(MitigationAlert(verdict.alert, now))
            if verdict.action is hardening.Action.ENQUEUE:
                st.queue.append(frame)
            if not verdict.passes:
                return st, events
        st.phase = ReceiverPhase.DONE
        st.deadline = None
        events.append(MessageComplete(frame.payload))
        return st, events

    if isinstance(frame, FirstFrame):
        return st, events + _on_ff(st, frame, cfg, now)

    if isinstance(frame, ConsecutiveFrame):
        if not receiving:
            return st, events
        return st, events + _on_cf(st, frame, cfg, now)
    return st, events


def _on_ff(st: ReceiverState, ff: FirstFrame, cfg: TransportConfig, now: int) -> List[TpEvent]:
    profile = cfg.profile
    receiving = st.phase is ReceiverPhase.RECEIVING
    if profile.hardened:
        verdict = hardening.check_ff_dl(_rx_ctx(st), ff, profile.mitigations)
        if not verdict.passes:
            return [MitigationAlert(verdict.alert, now)]

    if ff.ff_dl > cfg.rx_buffer_capacity:
        if receiving and profile.kind is ProfileKind.VEHICLE:
            # The static buffer is re-initialised but the length it cannot
            # hold is dropped, so the running transfer completes over zeros.
            st.assembled[:] = bytes([cfg.init_byte]) * len(st.assembled)
            _arm_cf_timer(st, cfg, now)
            return []
        events: List[TpEvent] = [_fc(st, cfg, FlowStatus.OVERFLOW, now)]
        st.first_fc_sent = True
        return events + _abort_rx(st, AbortReason.BUFFER_OVERFLOW, now)

    events = []
    if receiving:
        if profile.hardened:
            verdict = hardening.admit_session(_rx_ctx(st), ff, profile.mitigations)
            if verdict.alert is not None:
                events.append(MitigationAlert(verdict.alert, now))
            if verdict.action is hardening.Action.ENQUEUE:
                st.queue.append(ff)
            if not verdict.passes:
                return events
        # Session override: fresh buffer and length, sequencing carries on.
        st.assembled = bytearray([cfg.init_byte]) * ff.ff_dl
        st.expected_total = ff.ff_dl
        st.block_count = 0
        _arm_cf_timer(st, cfg, now)
        events.append(_fc(st, cfg, FlowStatus.CONTINUE_TO_SEND, now))
        if st.cursor >= st.expected_total:
            events.extend(_complete(st, cfg, now))
        return events

    st.assembled = bytearray([cfg.init_byte]) * ff.ff_dl
    head = ff.payload[: ff.ff_dl]
    st.assembled[: len(head)] = head
    st.cursor = len(head)
    st.expected_total = ff.ff_dl
    st.expected_sn = 1
    st.block_count = 0
    st.cfs_received = 0
    st.abort_reason = None
    st.phase = ReceiverPhase.RECEIVING
    st.first_fc_sent = True
    _arm_cf_timer(st, cfg, now)
    return [_fc(st, cfg, FlowStatus.CONTINUE_TO_SEND, now)]


def _on_cf(st: ReceiverState, cf: ConsecutiveFrame, cfg: TransportConfig, now: int) -> List[TpEvent]:
    if cf.sn != st.expected_sn:
        if cfg.profile.hardened:
            verdict = hardening.validate_cf(_rx_ctx(st), cf, cfg.profile.mitigations)
            if verdict.action is hardening.Action.DISCARD:
                return [MitigationAlert(verdict.alert, now)]
        return _abort_rx(st, AbortReason.SN_VIOLATION, now)
    take = min(len(cf.payload), st.expected_total - st.cursor)
    st.assembled[st.cursor: st.cursor + take] = cf.payload[:take]
    st.cursor += take
    st.expected_sn = (cf.sn + 1) & 0xF
    st.cfs_received += 1
    _arm_cf_timer(st, cfg, now)
    if st.cursor >= st.expected_total:
        return _complete(st, cfg, now)
    if cfg.bs:
        st.block_count += 1
        if st.block_count == cfg.bs:
            st.block_count = 0
            return [_fc(st, cfg, FlowStatus.CONTINUE_TO_SEND, now)]
    return []


def receiver_on_timer(
    st: ReceiverState, cfg: TransportConfig, now: int, bus_load: float = 0.0
) -> Tuple[ReceiverState, List[TpEvent]]:
    if st.phase is not ReceiverPhase.RECEIVING or st.deadline is None or now <= st.deadline:
        return st, []
    events: List[TpEvent] = []
    if _stretch(st, cfg, cfg.timeout_cf_us, now, bus_load, events):
        return st, events
    return st, _abort_rx(st, AbortReason.CF_TIMEOUT, now)


def receiver_next_timer(st: ReceiverState) -> Optional[int]:
    if st.phase is ReceiverPhase.RECEIVING and st.deadline is not None:
        return st.deadline + 1
    return None


# --------------------------------------------------------------------------


class Endpoint:
    """One transport endpoint: a sender and a receiver sharing a config.

    Frames arriving on ``rx_id`` are decoded; FC goes to the sender, the rest
    to the receiver. Undecodable or ignorable frames are dropped.
    """

    def __init__(self, tx_id: int, rx_id: int, cfg: TransportConfig):
        self.tx_id = tx_id
        self.rx_id = rx_id
        self.cfg = cfg
        self.sender: Optional[SenderState] = None
        self.receiver = ReceiverState(fc_id=tx_id)

    def send(self, payload: bytes, now: int) -> List[TpEvent]:
        self.sender, events = sender_start(payload, self.cfg, now, self.tx_id)
        return events

    def reset_receiver(self, service_id: Optional[int] = None) -> None:
        self.receiver = ReceiverState(fc_id=self.tx_id, service_id=service_id)

    def on_can_frame(self, raw: RawCanFrame, now: int) -> List[TpEvent]:
        if raw.can_id != self.rx_id:
            return []
        result = decode_tp_frame(raw.data)
        if not result.ok:
            return []
        frame = result.frame
        if isinstance(frame, FlowControl):
            if self.sender is None:
                return []
            _, events = sender_on_frame(self.sender, frame, self.cfg, now)
            return events
        _, events = receiver_on_frame(self.receiver, frame, self.cfg, now)
        return events

    def on_tx_confirm(self, raw: RawCanFrame, now: int) -> List[TpEvent]:
        if self.sender is None or raw.can_id != self.tx_id or raw.data[0] >> 4 == 0x3:
            return []
        _, events = sender_on_tx_confirm(self.sender, self.cfg, now)
        return events

    def next_timer(self) -> Optional[int]:
        t = receiver_next_timer(self.receiver)
        if self.sender is not None:
            ts = sender_next_timer(self.sender)
            if ts is not None and (t is None or ts < t):
                t = ts
        return t

    def on_timer(self, now: int, bus_load: float = 0.0) -> List[TpEvent]:
        events: List[TpEvent] = []
        if self.sender is not None:
            events += sender_on_timer(self.sender, self.cfg, now, bus_load)[1]
        events += receiver_on_timer(self.receiver, self.cfg, now, bus_load)[1]
        return events
