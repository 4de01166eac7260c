"""Encoding and decoding of ISO 15765-2 transport frames in classical CAN.

Byte 0 of every data field carries the protocol control information (PCI):
the high nibble selects the frame type, the low nibble carries SF_DL,
the upper bits of FF_DL, the CF sequence number or the FC flow status.

    SF  0L dd dd dd dd dd dd dd        L = SF_DL (1..7)
    FF  1L LL dd dd dd dd dd dd        12-bit FF_DL (8..4095)
    FF  10 00 LL LL LL LL dd dd        escape form, 32-bit FF_DL (> 4095)
    CF  2N dd dd dd dd dd dd dd        N = sequence number
    FC  3S BS ST                       S = flow status, BS, STmin
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Union

CAN_MAX_DLEN = 8
MAX_CAN_ID = 0x7FF
FF_DL_12BIT_MAX = 0xFFF
FF_DL_32BIT_MAX = 0xFFFFFFFF

SF_MAX_PAYLOAD = 7
FF_PAYLOAD = 6
FF_ESC_PAYLOAD = 2
CF_MAX_PAYLOAD = 7

PCI_SF = 0x0
PCI_FF = 0x1
PCI_CF = 0x2
PCI_FC = 0x3

STMIN_MAX_MS = 127


class CodecError(ValueError):
    pass


class PayloadTooLarge(CodecError):
    pass


class InvalidField(CodecError):
    pass


@dataclass(frozen=True)
class RawCanFrame:
    """A classical CAN frame with an 11-bit identifier."""

    can_id: int
    data: bytes
    timestamp: int = 0  # simulated microseconds

    def __post_init__(self) -> None:
        if not 0 <= self.can_id <= MAX_CAN_ID:
            raise InvalidField(f"can_id 0x{self.can_id:X} is not an 11-bit identifier")
        if len(self.data) > CAN_MAX_DLEN:
            raise PayloadTooLarge(f"CAN data field of {len(self.data)} bytes exceeds 8")
        object.__setattr__(self, "data", bytes(self.data))

    def stamped(self, timestamp: int) -> "RawCanFrame":
        """Copy with a new timestamp, skipping re-validation."""
        f = object.__new__(RawCanFrame)
        object.__setattr__(f, "can_id", self.can_id)
        object.__setattr__(f, "data", self.data)
        object.__setattr__(f, "timestamp", timestamp)
        return f


class FlowStatus(enum.IntEnum):
    CONTINUE_TO_SEND = 0
    WAIT = 1
    OVERFLOW = 2
    RESERVED = 3  # stands for every raw nibble 0x3..0xF

    @classmethod
    def from_nibble(cls, nibble: int) -> "FlowStatus":
        return cls(nibble) if nibble < 3 else cls.RESERVED


@dataclass(frozen=True)
class PaddingPolicy:
    enabled: bool = True
    pad_byte: int = 0xCC


DEFAULT_PADDING = PaddingPolicy()
NO_PADDING = PaddingPolicy(enabled=False)


@dataclass(frozen=True)
class SingleFrame:
    payload: bytes

    @property
    def sf_dl(self) -> int:
        return len(self.payload)


@dataclass(frozen=True)
class FirstFrame:
    ff_dl: int
    payload: bytes = b""
    escape_used: Optional[bool] = None

    def __post_init__(self) -> None:
        if self.escape_used is None:
            object.__setattr__(self, "escape_used", self.ff_dl > FF_DL_12BIT_MAX)


@dataclass(frozen=True)
class ConsecutiveFrame:
    sn: int
    payload: bytes


@dataclass(frozen=True)
class FlowControl:
    fs: int  # raw 4-bit flow status nibble
    bs: int = 0
    stmin_raw: int = 0

    @property
    def status(self) -> FlowStatus:
        return FlowStatus.from_nibble(self.fs)


TpFrame = Union[SingleFrame, FirstFrame, ConsecutiveFrame, FlowControl]


class DecodeStatus(enum.Enum):
    VALID = "valid"
    IGNORE = "ignore"
    MALFORMED = "malformed"


@dataclass(frozen=True)
class DecodeResult:
    status: DecodeStatus
    frame: Optional[TpFrame] = None
    reason: str = ""

    @property
    def ok(self) -> bool:
        return self.status is DecodeStatus.VALID


def _check_byte(name: str, value: int, hi: int = 0xFF) -> None:
    if not 0 <= value <= hi:
        raise InvalidField(f"{name}={value} outside 0..{hi}")


def _pad(data: bytes, padding: PaddingPolicy) -> bytes:
    if padding.enabled and len(data) < CAN_MAX_DLEN:
        return data + bytes([padding.pad_byte]) * (CAN_MAX_DLEN - len(data))
    return data


def encode_tp_frame(frame: TpFrame, padding: PaddingPolicy = DEFAULT_PADDING) -> bytes:
    """Return the CAN data field for ``frame``.

    Raises PayloadTooLarge when the payload does not fit the frame type and
    InvalidField when a header field is out of range.
    """
    _check_byte("pad_byte", padding.pad_byte)
    if isinstance(frame, SingleFrame):
        if len(frame.payload) > SF_MAX_PAYLOAD:
            raise PayloadTooLarge(f"SF carries at most 7 bytes, got {len(frame.payload)}")
        out = bytes([PCI_SF << 4 | len(frame.payload)]) + frame.payload
    elif isinstance(frame, FirstFrame):
        _check_byte("ff_dl", frame.ff_dl, FF_DL_32BIT_MAX)
        if frame.escape_used != (frame.ff_dl > FF_DL_12BIT_MAX):
            raise InvalidField(f"escape_used={frame.escape_used} inconsistent with ff_dl={frame.ff_dl}")
        if frame.escape_used:
            if len(frame.payload) > FF_ESC_PAYLOAD:
                raise PayloadTooLarge("escape FF carries at most 2 payload bytes")
            out = bytes([PCI_FF << 4, 0x00]) + frame.ff_dl.to_bytes(4, "big") + frame.payload
        else:
            if frame.ff_dl < 8:
                raise InvalidField(f"FF_DL {frame.ff_dl} below 8 would be ignored by receivers")
            if len(frame.payload) > FF_PAYLOAD:
                raise PayloadTooLarge("FF carries at most 6 payload bytes")
            out = bytes([PCI_FF << 4 | frame.ff_dl >> 8, frame.ff_dl & 0xFF]) + frame.payload
    elif isinstance(frame, ConsecutiveFrame):
        _check_byte("sn", frame.sn, 0xF)
        if len(frame.payload) > CF_MAX_PAYLOAD:
            raise PayloadTooLarge(f"CF carries at most 7 bytes, got {len(frame.payload)}")
        out = bytes([PCI_CF << 4 | frame.sn]) + frame.payload
    elif isinstance(frame, FlowControl):
        _check_byte("fs", frame.fs, 0xF)
        _check_byte("bs", frame.bs)
        _check_byte("stmin_raw", frame.stmin_raw)
        out = bytes([PCI_FC << 4 | frame.fs, frame.bs, frame.stmin_raw])
    else:
        raise TypeError(f"not a transport frame: {frame!r}")
    return _pad(out, padding)


def decode_tp_frame(data: bytes) -> DecodeResult:
    """Classify a CAN data field as a valid, ignorable or malformed frame.

    Total over every byte string: nothing here raises.
    """
    n = len(data)
    if n == 0 or n > CAN_MAX_DLEN:
        return DecodeResult(DecodeStatus.MALFORMED, reason=f"data length {n} not in 1..8")
    pci, low = data[0] >> 4, data[0] & 0xF

    if pci == PCI_SF:
        if low == 0:
            return DecodeResult(DecodeStatus.IGNORE, reason="SF_DL is 0")
        if low > SF_MAX_PAYLOAD or low > n - 1:
            return DecodeResult(DecodeStatus.MALFORMED, reason=f"SF_DL {low} exceeds data field")
        return DecodeResult(DecodeStatus.VALID, SingleFrame(bytes(data[1:1 + low])))

    if pci == PCI_FF:
        if n < 2:
            return DecodeResult(DecodeStatus.MALFORMED, reason="FF truncated")
        ff_dl = low << 8 | data[1]
        if ff_dl == 0:
            if n < 6:
                return DecodeResult(DecodeStatus.MALFORMED, reason="escape FF truncated")
            ff_dl = int.from_bytes(data[2:6], "big")
            if ff_dl <= FF_DL_12BIT_MAX:
                return DecodeResult(DecodeStatus.IGNORE, reason="escape FF_DL ≤ 4095")
            return DecodeResult(DecodeStatus.VALID, FirstFrame(ff_dl, bytes(data[6:]), True))
        if ff_dl <= 7:
            return DecodeResult(DecodeStatus.IGNORE, reason="FF_DL ≤ 7")
        return DecodeResult(DecodeStatus.VALID, FirstFrame(ff_dl, bytes(data[2:]), False))

    if pci == PCI_CF:
        return DecodeResult(DecodeStatus.VALID, ConsecutiveFrame(low, bytes(data[1:])))

    if pci == PCI_FC:
        if n < 3:
            return DecodeResult(DecodeStatus.MALFORMED, reason="FC shorter than 3 bytes")
        return DecodeResult(DecodeStatus.VALID, FlowControl(low, data[1], data[2]))

    return DecodeResult(DecodeStatus.MALFORMED, reason=f"unknown frame type nibble 0x{pci:X}")


def stmin_to_duration(stmin_raw: int) -> int:
    """STmin byte to microseconds; anything outside 0x00-0x7F clamps to 127 ms."""
    if 0 <= stmin_raw <= 0x7F:
        return stmin_raw * 1000
    return STMIN_MAX_MS * 1000
