"""Diagnostic tool and ECU applications running over the transport.

Service encoding is deliberately thin: one service byte followed by its
parameters. The ECU answers from a lookup table; the tool sends a request,
waits for the response, and retries after a fixed timeout when the transfer
fails. Tool-side DTC rendering falls back to a count of zero when the
response cannot be parsed, which is what a scan tool shows on screen.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .transport import (
    AbortReason,
    Endpoint,
    MessageAborted,
    MessageComplete,
    ReceiverPhase,
    TpEvent,
)

TOOL_REQUEST_ID = 0x7E0
ECU_RESPONSE_ID = 0x7E8
FUNCTIONAL_REQUEST_ID = 0x7DF

SID_READ_DATA_BY_ID = 0x22
SID_READ_DTC = 0x19
SID_TESTER_PRESENT = 0x3E
NEGATIVE_RESPONSE = 0x7F
NRC_SERVICE_NOT_SUPPORTED = 0x11

IDENTIFIERS_PARAM = bytes([0xF1, 0x90])
DTC_PARAM = bytes([0x02, 0xFF])


def addressing_plan(role: str) -> Tuple[int, int]:
    """(transmit id, receive id) for a physically addressed tool or ECU."""
    if role == "tool":
        return TOOL_REQUEST_ID, ECU_RESPONSE_ID
    if role == "ecu":
        return ECU_RESPONSE_ID, TOOL_REQUEST_ID
    raise ValueError(f"unknown role {role!r}")


@dataclass(frozen=True)
class DiagRequest:
    service_id: int
    parameter: bytes = b""

    def encode(self) -> bytes:
        return bytes([self.service_id]) + bytes(self.parameter)

    @classmethod
    def decode(cls, data: bytes) -> "DiagRequest":
        if not data:
            raise ValueError("empty diagnostic request")
        return cls(data[0], bytes(data[1:]))


IDENTIFIERS_REQUEST = DiagRequest(SID_READ_DATA_BY_ID, IDENTIFIERS_PARAM)
DTC_REQUEST = DiagRequest(SID_READ_DTC, DTC_PARAM)


def default_identifier_blob(length: int = 64) -> bytes:
    """Printable, zero-free identification data (VIN, part and software numbers)."""
    text = b"KMHxx41DBHU000001|SW 1.04.22|HW B3|PN 39110-2B800|CAL 7Z1"
    out = (text * (length // len(text) + 1))[:length]
    return out


@dataclass
class EcuDataStore:
    identifiers: bytes = field(default_factory=default_identifier_blob)
    dtc_count: int = 4
    extra: Dict[Tuple[int, bytes], bytes] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.identifiers) <= 7:
            raise ValueError("identifier blob must exceed 7 bytes so the response is segmented")

    def dtc_records(self) -> bytes:
        out = bytearray()
        for i in range(self.dtc_count):
            out += bytes([0x04, 0x55 + i, 0x00, 0x2F])  # 3-byte DTC + status mask
        return bytes(out)

    def lookup(self, req: DiagRequest) -> Optional[bytes]:
        key = (req.service_id, bytes(req.parameter))
        if key in self.extra:
            return self.extra[key]
        if key == (SID_READ_DATA_BY_ID, IDENTIFIERS_PARAM):
            return self.identifiers
        if key == (SID_READ_DTC, DTC_PARAM):
            return bytes([SID_READ_DTC + 0x40]) + DTC_PARAM + self.dtc_records()
        if req.service_id == SID_TESTER_PRESENT:
            return bytes([SID_TESTER_PRESENT + 0x40, 0x00])
        return None


def ecu_serve(req: DiagRequest, store: EcuDataStore) -> bytes:
    payload = store.lookup(req)
    if payload is None:
        return bytes([NEGATIVE_RESPONSE, req.service_id, NRC_SERVICE_NOT_SUPPORTED])
    return payload


def render_dtc_count(payload: Optional[bytes]) -> Tuple[int, bool]:
    """Number of DTCs the tool shows, and whether it fell back to a default."""
    if (
        payload is None
        or len(payload) < 3
        or payload[0] != SID_READ_DTC + 0x40
        or payload[1:3] != DTC_PARAM
        or (len(payload) - 3) % 4
    ):
        return 0, True
    return (len(payload) - 3) // 4, False


@dataclass(frozen=True)
class RetryPolicy:
    max_retries: int = 3
    retry_timeout_us: int = 1_000_000

    def __post_init__(self) -> None:
        if self.max_retries < 0 or self.retry_timeout_us <= 0:
            raise ValueError("max_retries must be >= 0 and retry_timeout_us > 0")


@dataclass
class AttemptRecord:
    started_at: int
    ended_at: Optional[int] = None
    aborts: List[Tuple[int, AbortReason]] = field(default_factory=list)
    cfs_received: int = 0
    response_started: bool = False
    completed: bool = False


@dataclass
class ExchangeResult:
    request: DiagRequest
    payload: Optional[bytes]
    attempts: int
    elapsed_us: int
    history: List[AttemptRecord]
    dtc_count: Optional[int] = None
    defaulted: bool = False

    @property
    def failed(self) -> bool:
        return self.payload is None


class ExchangeFailed(RuntimeError):
    pass


class ToolApp:
    """One outstanding request; retries on transfer failure or silence."""

    def __init__(self, endpoint: Endpoint, request: DiagRequest, policy: RetryPolicy):
        self.endpoint = endpoint
        self.request = request
        self.policy = policy
        self.history: List[AttemptRecord] = []
        self.result: Optional[ExchangeResult] = None
        self._retry_at: Optional[int] = None
        self._failed = False
        self._start_time = 0

    @property
    def done(self) -> bool:
        return self.result is not None

    @property
    def current(self) -> AttemptRecord:
        return self.history[-1]

    def start(self, now: int) -> List[TpEvent]:
        self._start_time = now
        return self._attempt(now)

    def _attempt(self, now: int) -> List[TpEvent]:
        self.history.append(AttemptRecord(started_at=now))
        self._retry_at = None
        self._failed = False
        self.endpoint.reset_receiver(self.request.service_id)
        return self.endpoint.send(self.request.encode(), now)

    def _finish(self, payload: Optional[bytes], now: int) -> None:
        self.current.ended_at = now
        res = ExchangeResult(
            self.request, payload, len(self.history), now - self._start_time, self.history
        )
        if self.request.service_id == SID_READ_DTC:
            res.dtc_count, res.defaulted = render_dtc_count(payload)
        self.result = res

    def _attempt_failed(self, now: int) -> None:
        if self._failed:
            return
        self._failed = True
        self.current.ended_at = now
        self._retry_at = max(now, self.current.started_at + self.policy.retry_timeout_us)

    def on_events(self, events: List[TpEvent], now: int) -> List[TpEvent]:
        if self.done:
            return []
        rx = self.endpoint.receiver
        self.current.cfs_received = max(self.current.cfs_received, rx.cfs_received)
        if rx.phase is not ReceiverPhase.IDLE:
            self.current.response_started = True
        for ev in events:
            if self._failed:
                break
            if isinstance(ev, MessageComplete):
                self.current.completed = True
                self._finish(ev.payload, now)
                return []
            if isinstance(ev, MessageAborted) and ev.side == "rx":
                self.current.aborts.append((ev.at, ev.reason))
                self._attempt_failed(now)
        return []

    def next_timer(self) -> Optional[int]:
        if self.done:
            return None
        if self._failed:
            return self._retry_at
        if not self.current.response_started:
            return self.current.started_at + self.policy.retry_timeout_us
        return None

    def on_timer(self, now: int) -> List[TpEvent]:
        if self.done:
            return []
        if not self._failed:
            if self.current.response_started or now < self.current.started_at + self.policy.retry_timeout_us:
                return []
            self._attempt_failed(now)
        if self._retry_at is None or now < self._retry_at:
            return []
        if len(self.history) > self.policy.max_retries:
            self._finish(None, now)
            return []
        return self._attempt(now)


class EcuApp:
    """Serves each complete request after a processing delay."""

    def __init__(
        self,
        endpoint: Endpoint,
        store: EcuDataStore,
        response_delay_us: int = 1000,
        jitter_us: int = 200,
        rng: Optional[random.Random] = None,
    ):
        self.endpoint = endpoint
        self.store = store
        self.response_delay_us = response_delay_us
        self.jitter_us = jitter_us
        self.rng = rng or random.Random(0)
        self._pending: Optional[Tuple[int, bytes]] = None
        self.served = 0

    def on_events(self, events: List[TpEvent], now: int) -> List[TpEvent]:
        for ev in events:
            if isinstance(ev, MessageComplete):
                try:
                    req = DiagRequest.decode(ev.payload)
                except ValueError:
                    continue
                delay = self.response_delay_us + self.rng.randint(0, self.jitter_us)
                self._pending = (now + delay, ecu_serve(req, self.store))
        return []

    def next_timer(self) -> Optional[int]:
        return self._pending[0] if self._pending else None

    def on_timer(self, now: int) -> List[TpEvent]:
        if self._pending is None or now < self._pending[0]:
            return []
        _, payload = self._pending
        self._pending = None
        self.served += 1
        return self.endpoint.send(payload, now)
