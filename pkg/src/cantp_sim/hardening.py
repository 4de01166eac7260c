"""Mitigation policies M1-M8 for the hardened endpoint profile.

Each policy is a decision function the transport state machines call before
applying a frame. A rejection never raises; it comes back as a ``Verdict``
carrying an ``Alert`` that names the attack class it most likely belongs to.
The alerts are the hook point for an external IDS.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import FrozenSet, Optional

from .codec import ConsecutiveFrame, FirstFrame, FlowControl, FlowStatus

MITIGATIONS = tuple(f"m{i}" for i in range(1, 9))


@dataclass(frozen=True)
class MitigationSet:
    m1: bool = False
    m2: bool = False
    m3: bool = False
    m4: bool = False
    m5: bool = False
    m6: bool = False
    m7: bool = False
    m8: bool = False
    m6_queue_depth: int = 1
    m4_ff_dl_ceiling: int = 256
    m4_allow_listed: FrozenSet[int] = frozenset({0x36})  # TransferData
    m8_window_us: int = 100_000
    m8_gain: float = 4.0
    m8_cap: float = 10.0

    @classmethod
    def all(cls, **params) -> "MitigationSet":
        return cls(**{m: True for m in MITIGATIONS}, **params)

    @classmethod
    def only(cls, *names: str, **params) -> "MitigationSet":
        return cls(**{_name(m): True for m in names}, **params)

    def without(self, *names: str) -> "MitigationSet":
        return replace(self, **{_name(m): False for m in names})

    def enabled(self) -> list[str]:
        return [m for m in MITIGATIONS if getattr(self, m)]


def _name(m) -> str:
    name = f"m{m}" if isinstance(m, int) else str(m).lower()
    if name not in MITIGATIONS:
        raise ValueError(f"unknown mitigation {m!r}")
    return name


@dataclass(frozen=True)
class Alert:
    attack: str  # "A1".."A8"
    detail: str

    def __str__(self) -> str:
        return f"{self.attack}-suspect: {self.detail}"


class Action(enum.Enum):
    ACCEPT = "accept"
    REJECT = "reject"
    DISCARD = "discard"
    ADMIT = "admit"
    ENQUEUE = "enqueue"


@dataclass(frozen=True)
class Verdict:
    action: Action
    alert: Optional[Alert] = None

    @property
    def passes(self) -> bool:
        return self.action in (Action.ACCEPT, Action.ADMIT)


ACCEPT = Verdict(Action.ACCEPT)
ADMIT = Verdict(Action.ADMIT)


@dataclass(frozen=True)
class FcContext:
    """What the sender knows when an FC arrives."""

    fc_due: bool  # sender is AwaitingFc or Paused
    fcs_since_ff: int  # FCs already applied in this transfer
    ff_dl: int


@dataclass(frozen=True)
class RxContext:
    receiving: bool
    expected_sn: int = 0
    queued: int = 0
    service_id: Optional[int] = None


def validate_fc(ctx: FcContext, fc: FlowControl, ms: MitigationSet) -> Verdict:
    status = fc.status
    if status is FlowStatus.RESERVED:
        if ms.m7:
            return Verdict(Action.REJECT, Alert("A7", f"undefined FC_FS 0x{fc.fs:X} discarded"))
        return ACCEPT
    if status is FlowStatus.OVERFLOW:
        if ms.m3 and (not ctx.fc_due or ctx.fcs_since_ff > 0):
            return Verdict(Action.REJECT, Alert("A3", "FS_Overflow outside the first FC after FF"))
        return ACCEPT
    if status is FlowStatus.WAIT:
        if ms.m2 and not ctx.fc_due:
            return Verdict(Action.REJECT, Alert("A2", "FS_Wait beyond the expected FC count for this block"))
        return ACCEPT
    if ms.m1 and not ctx.fc_due:
        return Verdict(
            Action.REJECT,
            Alert("A1", f"unsolicited CTS (bs={fc.bs}) while a block for FF_DL={ctx.ff_dl} is in progress"),
        )
    return ACCEPT


def validate_cf(ctx: RxContext, cf: ConsecutiveFrame, ms: MitigationSet) -> Verdict:
    """With M5, a discontinuous SN is dropped rather than aborting reception."""
    if cf.sn == ctx.expected_sn:
        return ACCEPT
    if ms.m5:
        return Verdict(Action.DISCARD, Alert("A5", f"CF SN {cf.sn} while expecting {ctx.expected_sn}"))
    return ACCEPT


def admit_session(ctx: RxContext, frame, ms: MitigationSet) -> Verdict:
    if not ctx.receiving or not ms.m6:
        return ADMIT
    kind = "FF" if isinstance(frame, FirstFrame) else "SF"
    if ctx.queued < ms.m6_queue_depth:
        return Verdict(Action.ENQUEUE, Alert("A6", f"{kind} during active reception queued"))
    return Verdict(Action.REJECT, Alert("A6", f"{kind} during active reception dropped, queue full"))


def check_ff_dl(ctx: RxContext, ff: FirstFrame, ms: MitigationSet) -> Verdict:
    if not ms.m4 or ctx.service_id in ms.m4_allow_listed:
        return ACCEPT
    if ff.escape_used:
        return Verdict(Action.REJECT, Alert("A4", f"escape FF_DL={ff.ff_dl} for a non-bulk service"))
    if ff.ff_dl > ms.m4_ff_dl_ceiling:
        return Verdict(
            Action.REJECT, Alert("A4", f"FF_DL={ff.ff_dl} above ceiling {ms.m4_ff_dl_ceiling}")
        )
    return ACCEPT


def dynamic_timeout(base_us: int, bus_load: float, ms: MitigationSet) -> int:
    """Stretch a timeout with bus load: base * (1 + gain*load), capped."""
    if not ms.m8:
        return base_us
    load = min(max(bus_load, 0.0), 1.0)
    return int(base_us * min(1.0 + ms.m8_gain * load, ms.m8_cap))
