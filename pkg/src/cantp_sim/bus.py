"""Discrete-event classical CAN bus with identifier-priority arbitration.

Time is integer microseconds. A transmission occupies the bus for a fixed
frame-time; when the bus goes idle, the pending frame with the lowest
identifier wins, ties going to the lower node id and then to the earlier
submission. Delivery reaches every attached node except the sender.

``step(until)`` runs the bus on its own. A scenario loop that interleaves
node reactions uses the lower-level pair ``complete(t)`` / ``arbitrate(t)``
so that frames submitted in reaction to a delivery at ``t`` still compete
in the arbitration round at ``t``.
"""
from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass
from typing import Deque, Iterable, List, Optional, Tuple

from .codec import RawCanFrame

LOAD_HISTORY_US = 2_000_000


@dataclass(frozen=True)
class BusConfig:
    bitrate_bps: int = 500_000
    bits_per_frame: int = 128
    seed: int = 0

    def __post_init__(self) -> None:
        if self.bitrate_bps <= 0 or self.bits_per_frame <= 0:
            raise ValueError("bitrate_bps and bits_per_frame must be positive")

    @property
    def frame_time_us(self) -> int:
        return math.ceil(self.bits_per_frame * 1_000_000 / self.bitrate_bps)


@dataclass(frozen=True)
class PendingFrame:
    frame: RawCanFrame
    submitted_at: int
    node_id: int
    seq: int = 0


@dataclass(frozen=True)
class Delivery:
    timestamp: int  # end of transmission
    frame: RawCanFrame  # stamped with the delivery time
    sender: int
    started_at: int

    def __iter__(self):
        return iter((self.timestamp, self.frame, self.sender))


class VirtualBus:
    def __init__(self, config: BusConfig = BusConfig()):
        self.config = config
        self.frame_time = config.frame_time_us
        self.now = 0
        self.nodes: List[int] = []
        self._seq = 0
        self._future: List[Tuple[int, int, PendingFrame]] = []  # (submitted_at, seq, p)
        self._ready: List[Tuple[int, int, int, PendingFrame]] = []  # (id, node, seq, p)
        self._current: Optional[Tuple[int, PendingFrame]] = None  # (start, p)
        self._busy: Deque[Tuple[int, int]] = deque()
        self.delivered_count = 0

    def attach(self, node_id: int) -> None:
        if node_id not in self.nodes:
            self.nodes.append(node_id)

    # -- submission

    def submit(self, node_id: int, frame: RawCanFrame, now: Optional[int] = None) -> None:
        at = self.now if now is None else now
        self._seq += 1
        p = PendingFrame(frame, at, node_id, self._seq)
        if at <= self.now:
            heapq.heappush(self._ready, (frame.can_id, node_id, p.seq, p))
        else:
            heapq.heappush(self._future, (at, p.seq, p))

    def flood(
        self,
        node_id: int,
        can_id: int,
        count: int,
        spacing_us: int,
        start: int,
        data: bytes = bytes(8),
    ) -> None:
        if count < 1:
            raise ValueError("flood count must be >= 1")
        for i in range(count):
            at = start + i * spacing_us
            self.submit(node_id, RawCanFrame(can_id, data, at), at)

    @property
    def pending(self) -> int:
        return len(self._future) + len(self._ready) + (self._current is not None)

    # -- event primitives

    def next_event_time(self) -> Optional[int]:
        if self._current is not None:
            return self._current[0] + self.frame_time
        if self._ready:
            return self.now
        if self._future:
            return max(self.now, self._future[0][0])
        return None

    def _promote(self, t: int) -> None:
        while self._future and self._future[0][0] <= t:
            _, _, p = heapq.heappop(self._future)
            heapq.heappush(self._ready, (p.frame.can_id, p.node_id, p.seq, p))

    def complete(self, t: int) -> List[Delivery]:
        """Finish the transmission in progress if it ends by ``t``."""
        out: List[Delivery] = []
        if self._current is not None:
            start, p = self._current
            end = start + self.frame_time
            if end <= t:
                self._current = None
                self.now = max(self.now, end)
                self.delivered_count += 1
                out.append(Delivery(end, p.frame.stamped(end), p.node_id, start))
        self.now = max(self.now, t)
        return out

    def arbitrate(self, t: int) -> Optional[PendingFrame]:
        """Start the highest-priority pending frame if the bus is idle at ``t``."""
        self.now = max(self.now, t)
        if self._current is not None:
            return None
        self._promote(self.now)
        if not self._ready:
            return None
        p = heapq.heappop(self._ready)[3]
        self._current = (self.now, p)
        self._busy.append((self.now, self.now + self.frame_time))
        while self._busy and self._busy[0][1] < self.now - LOAD_HISTORY_US:
            self._busy.popleft()
        return p

    def step(self, until: int) -> List[Delivery]:
        if until < self.now:
            raise ValueError("cannot step backwards")
        log: List[Delivery] = []
        while True:
            t = self.next_event_time()
            if t is None or t > until:
                break
            log.extend(self.complete(t))
            self.arbitrate(t)
            if self._current is None and not self._ready and (
                not self._future or self._future[0][0] > until
            ):
                break
        self.now = until
        return log

    def run_all(self) -> List[Delivery]:
        log: List[Delivery] = []
        while (t := self.next_event_time()) is not None:
            log.extend(self.complete(t))
            self.arbitrate(t)
        return log

    # -- observation

    def load(self, window_us: int, now: Optional[int] = None) -> float:
        """Fraction of the last ``window_us`` during which the bus was busy."""
        now = self.now if now is None else now
        lo = now - window_us
        busy = 0
        for s, e in self._busy:
            busy += max(0, min(e, now) - max(s, lo))
        return min(1.0, busy / window_us) if window_us > 0 else 0.0


def receivers(nodes: Iterable[int], sender: int) -> List[int]:
    return [n for n in nodes if n != sender]
