"""Scenario wiring, outcome classification, traces and reports.

A scenario puts a diagnostic tool (node 1), an ECU (node 2) and optionally an
attacker (node 0) on one bus and runs a single diagnostic exchange to its
conclusion. The result is classified against the ECU's stored answer:

    Completed             exact payload on the first attempt
    Amplified             exact payload, but only after retries
    Sprayed               payload with init-byte runs where data should be
    Corrupted             wrong payload without init-byte runs
    Defaulted             DTC screen fell back to its default (count 0)
    AbortedProtocolError  retries exhausted; a protocol error ended the last try
    Truncated             retries exhausted; data stopped arriving mid-transfer
    TimedOut              retries exhausted; nothing arrived in time

Scenario files are INI with sections ``[scenario] [bus] [transport] [tool]
[ecu] [attack] [expect]``.
"""
from __future__ import annotations

import configparser
import enum
import json
import os
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from . import attacks as atk
from .bus import BusConfig, VirtualBus
from .codec import DEFAULT_PADDING, NO_PADDING, PaddingPolicy, RawCanFrame
from .diag import (
    DTC_REQUEST,
    IDENTIFIERS_REQUEST,
    SID_READ_DTC,
    DiagRequest,
    EcuApp,
    EcuDataStore,
    ExchangeResult,
    RetryPolicy,
    ToolApp,
    addressing_plan,
    default_identifier_blob,
    ecu_serve,
)
from .hardening import MitigationSet, MITIGATIONS
from .transport import (
    STRICT,
    VEHICLE,
    AbortReason,
    Endpoint,
    EndpointProfile,
    FrameOut,
    MessageAborted,
    MessageComplete,
    MitigationAlert,
    ProfileKind,
    TransportConfig,
    hardened,
)

ATTACKER_NODE = 0
TOOL_NODE = 1
ECU_NODE = 2
OUT_DIR_ENV = "CANTP_OUT_DIR"
PROFILE_NAMES = ("strict", "vehicle", "hardened")


class InvalidScenario(ValueError):
    pass


class OutcomeClass(str, enum.Enum):
    COMPLETED = "Completed"
    AMPLIFIED = "Amplified"
    SPRAYED = "Sprayed"
    CORRUPTED = "Corrupted"
    DEFAULTED = "Defaulted"
    ABORTED = "AbortedProtocolError"
    TRUNCATED = "Truncated"
    TIMED_OUT = "TimedOut"

    def __str__(self) -> str:
        return self.value


def make_profile(name: str, mitigations: Optional[MitigationSet] = None) -> EndpointProfile:
    name = name.lower()
    if name == "strict":
        return STRICT
    if name == "vehicle":
        return VEHICLE
    if name == "hardened":
        return hardened(mitigations)
    raise InvalidScenario(f"unknown profile {name!r}; expected one of {', '.join(PROFILE_NAMES)}")


def parse_mitigations(text: str) -> MitigationSet:
    """``all``, ``none``, ``m1,m5`` or ``all-m3`` (everything but M3)."""
    text = text.strip().lower().replace(" ", "")
    if text in ("", "none"):
        return MitigationSet()
    if text == "all":
        return MitigationSet.all()
    if text.startswith("all-"):
        return MitigationSet.all().without(*text[4:].split("-"))
    try:
        return MitigationSet.only(*text.split(","))
    except ValueError as exc:
        raise InvalidScenario(str(exc)) from None


def mitigations_label(ms: MitigationSet) -> str:
    on = ms.enabled()
    if len(on) == len(MITIGATIONS):
        return "all"
    if len(on) == len(MITIGATIONS) - 1:
        return "all-" + next(m for m in MITIGATIONS if m not in on)
    return ",".join(on) or "none"


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    seed: int = 0
    horizon_us: int = 60_000_000
    profile: str = "strict"
    mitigations: MitigationSet = field(default_factory=MitigationSet.all)
    bus: BusConfig = BusConfig()
    transport: TransportConfig = TransportConfig()
    request: DiagRequest = IDENTIFIERS_REQUEST
    retry: RetryPolicy = RetryPolicy()
    identifiers_length: int = 64
    dtc_count: int = 4
    response_delay_us: int = 1000
    response_jitter_us: int = 200
    attack: Optional[atk.AttackSpec] = None
    attacker_reaction_us: int = 50
    attacker_jitter_us: int = 50
    expect: Tuple[Tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        if self.horizon_us <= 0:
            raise InvalidScenario("horizon_us must be > 0")
        make_profile(self.profile)
        if self.identifiers_length <= 7:
            raise InvalidScenario("identifiers_length must exceed 7")

    @property
    def endpoint_profile(self) -> EndpointProfile:
        return make_profile(self.profile, self.mitigations)

    def transport_config(self) -> TransportConfig:
        return replace(self.transport, profile=self.endpoint_profile)

    def store(self) -> EcuDataStore:
        return EcuDataStore(default_identifier_blob(self.identifiers_length), self.dtc_count)

    def expected_payload(self) -> bytes:
        return ecu_serve(self.request, self.store())

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)

    @property
    def profile_label(self) -> str:
        if self.profile == "hardened":
            return f"hardened[{mitigations_label(self.mitigations)}]"
        return self.profile


@dataclass(frozen=True)
class TraceRecord:
    timestamp_us: int
    can_id: int
    data: bytes
    sender: int
    annotation: str = "benign"

    def candump(self, interface: str = "vcan0") -> str:
        secs, micros = divmod(self.timestamp_us, 1_000_000)
        return f"({secs}.{micros:06d}) {interface} {self.can_id:03X}#{self.data.hex().upper()} ; {self.annotation}"


@dataclass
class ScenarioOutcome:
    name: str
    profile: str
    attack: str
    seed: int
    cls: OutcomeClass
    reason: Optional[str]
    attempts: int
    elapsed_us: int
    baseline_elapsed_us: Optional[int]
    frames_total: int
    alerts: List[str] = field(default_factory=list)
    corrupted_ranges: List[Tuple[int, int]] = field(default_factory=list)
    payload: Optional[bytes] = None
    dtc_count: Optional[int] = None
    notes: List[str] = field(default_factory=list)

    @property
    def factor(self) -> Optional[float]:
        if not self.baseline_elapsed_us:
            return None
        return self.elapsed_us / self.baseline_elapsed_us

    @property
    def alert_classes(self) -> List[str]:
        return sorted({a.split("-", 1)[0] for a in self.alerts})

    @property
    def label(self) -> str:
        if self.cls is OutcomeClass.ABORTED and self.reason:
            return f"{self.cls}({self.reason})"
        if self.cls is OutcomeClass.AMPLIFIED and self.factor is not None:
            return f"{self.cls}({self.factor:.1f}x)"
        return str(self.cls)

    def to_dict(self) -> dict:
        factor = self.factor
        return {
            "name": self.name,
            "profile": self.profile,
            "attack": self.attack,
            "seed": self.seed,
            "class": str(self.cls),
            "reason": self.reason,
            "attempts": self.attempts,
            "elapsed_us": self.elapsed_us,
            "baseline_elapsed_us": self.baseline_elapsed_us,
            "factor": None if factor is None else round(factor, 3),
            "frames_total": self.frames_total,
            "alerts": list(self.alerts),
            "alert_classes": self.alert_classes,
            "corrupted_ranges": [list(r) for r in self.corrupted_ranges],
            "payload_hex": None if self.payload is None else self.payload.hex(),
            "dtc_count": self.dtc_count,
            "notes": list(self.notes),
        }


@dataclass
class RunResult:
    outcome: ScenarioOutcome
    trace: List[TraceRecord]
    exchange: Optional[ExchangeResult]


# --------------------------------------------------------------------------
# classification


def init_byte_ranges(payload: bytes, expected: bytes, init_byte: int) -> List[Tuple[int, int]]:
    """Half-open ranges where ``payload`` holds ``init_byte`` but ``expected`` does not."""
    ranges: List[Tuple[int, int]] = []
    start = None
    for i in range(len(payload) + 1):
        hit = (
            i < len(payload)
            and payload[i] == init_byte
            and (i >= len(expected) or expected[i] != init_byte)
        )
        if hit and start is None:
            start = i
        elif not hit and start is not None:
            ranges.append((start, i))
            start = None
    return ranges


def classify(
    exchange: Optional[ExchangeResult],
    expected: bytes,
    init_byte: int,
    peer_aborts: Sequence[Tuple[int, AbortReason]] = (),
) -> Tuple[OutcomeClass, Optional[str], List[Tuple[int, int]]]:
    if exchange is None:
        return OutcomeClass.TIMED_OUT, "horizon", []
    if exchange.request.service_id == SID_READ_DTC and exchange.defaulted:
        return OutcomeClass.DEFAULTED, None, []
    payload = exchange.payload
    if payload is not None:
        if payload == expected:
            if exchange.attempts == 1:
                return OutcomeClass.COMPLETED, None, []
            return OutcomeClass.AMPLIFIED, None, []
        ranges = init_byte_ranges(payload, expected, init_byte)
        if ranges:
            return OutcomeClass.SPRAYED, None, ranges
        return OutcomeClass.CORRUPTED, None, []

    last = exchange.history[-1]
    end = last.ended_at if last.ended_at is not None else exchange.elapsed_us
    aborts = list(last.aborts) + [a for a in peer_aborts if last.started_at <= a[0] <= end]
    aborts.sort(key=lambda a: a[0])
    for _, reason in aborts:
        if not reason.is_timeout:
            return OutcomeClass.ABORTED, str(reason), []
    if last.cfs_received > 0:
        return OutcomeClass.TRUNCATED, None, []
    return OutcomeClass.TIMED_OUT, None, []


# --------------------------------------------------------------------------
# runner


class _Runner:
    def __init__(self, sc: Scenario):
        self.sc = sc
        self.bus = VirtualBus(sc.bus)
        self.cfg = sc.transport_config()
        tool_tx, tool_rx = addressing_plan("tool")
        ecu_tx, ecu_rx = addressing_plan("ecu")
        self.tool_ep = Endpoint(tool_tx, tool_rx, self.cfg)
        self.ecu_ep = Endpoint(ecu_tx, ecu_rx, self.cfg)
        self.tool = ToolApp(self.tool_ep, sc.request, sc.retry)
        self.ecu = EcuApp(
            self.ecu_ep,
            sc.store(),
            sc.response_delay_us,
            sc.response_jitter_us,
            random.Random(f"{sc.seed}:ecu"),
        )
        self.attacker: Optional[atk.Attacker] = None
        if sc.attack is not None:
            self.attacker = atk.Attacker(
                sc.attack,
                node_id=ATTACKER_NODE,
                frame_time_us=self.bus.frame_time,
                reaction_us=sc.attacker_reaction_us,
                jitter_us=sc.attacker_jitter_us,
                rng=random.Random(f"{sc.seed}:attacker"),
            )
            self.bus.attach(ATTACKER_NODE)
        self.bus.attach(TOOL_NODE)
        self.bus.attach(ECU_NODE)
        self.trace: List[TraceRecord] = []
        self.alerts: List[str] = []
        self.ecu_aborts: List[Tuple[int, AbortReason]] = []
        self._attack_label = f"attack:{sc.attack.id}" if sc.attack else "attack"

    # events -------------------------------------------------------------

    def _alert(self, alert, now: int) -> None:
        self.alerts.append(str(alert))
        tag = f"mitigation-alert:{alert.attack}"
        if self.trace:
            rec = self.trace[-1]
            if tag not in rec.annotation:
                self.trace[-1] = replace(rec, annotation=f"{rec.annotation}, {tag}")

    def _handle(self, node: int, events, now: int) -> None:
        for ev in events:
            if isinstance(ev, FrameOut):
                self.bus.submit(node, ev.frame, now)
            elif isinstance(ev, MitigationAlert):
                self._alert(ev.alert, now)
            elif isinstance(ev, MessageAborted) and node == ECU_NODE:
                self.ecu_aborts.append((ev.at, ev.reason))
        if node == TOOL_NODE:
            more = self.tool.on_events(list(events), now)
        else:
            more = self.ecu.on_events(list(events), now)
        if more:
            self._handle(node, more, now)

    def _attack_actions(self, actions, now: int) -> None:
        for a in actions:
            if isinstance(a, atk.Injection):
                self.bus.submit(ATTACKER_NODE, a.frame, max(now, a.emit_at))
            else:
                self.bus.flood(ATTACKER_NODE, a.can_id, a.count, a.spacing_us, max(now, a.start))

    def _deliver(self, d) -> None:
        now = d.timestamp
        tag = self._attack_label if d.sender == ATTACKER_NODE else "benign"
        self.trace.append(TraceRecord(now, d.frame.can_id, d.frame.data, d.sender, tag))
        for node, ep in ((TOOL_NODE, self.tool_ep), (ECU_NODE, self.ecu_ep)):
            if node == d.sender:
                self._handle(node, ep.on_tx_confirm(d.frame, now), now)
            else:
                self._handle(node, ep.on_can_frame(d.frame, now), now)
        if self.attacker is not None and d.sender != ATTACKER_NODE:
            self._attack_actions(self.attacker.on_bus_frame(d.frame, now), now)

    def _timers(self, now: int) -> None:
        window = self.cfg.profile.mitigations.m8_window_us
        load = None
        for node, ep, app in ((TOOL_NODE, self.tool_ep, self.tool), (ECU_NODE, self.ecu_ep, self.ecu)):
            t = ep.next_timer()
            if t is not None and t <= now:
                if load is None:
                    load = self.bus.load(window, now)
                self._handle(node, ep.on_timer(now, load), now)
            t = app.next_timer()
            if t is not None and t <= now:
                self._handle(node, app.on_timer(now), now)
        if self.attacker is not None:
            t = self.attacker.next_timer()
            if t is not None and t <= now:
                self._attack_actions(self.attacker.on_time(now), now)

    def _next_time(self) -> Optional[int]:
        times = [
            self.bus.next_event_time(),
            self.tool_ep.next_timer(),
            self.ecu_ep.next_timer(),
            self.tool.next_timer(),
            self.ecu.next_timer(),
        ]
        if self.attacker is not None:
            times.append(self.attacker.next_timer())
        times = [t for t in times if t is not None]
        return min(times) if times else None

    def run(self) -> Optional[ExchangeResult]:
        self._handle(TOOL_NODE, self.tool.start(0), 0)
        self.bus.arbitrate(0)
        while not self.tool.done:
            t = self._next_time()
            if t is None or t > self.sc.horizon_us:
                break
            for d in self.bus.complete(t):
                self._deliver(d)
                if self.tool.done:
                    break
            if self.tool.done:
                break
            self._timers(t)
            self.bus.arbitrate(t)
        return self.tool.result


@dataclass
class TransferResult:
    delivered: List[bytes]
    frames: List[RawCanFrame]  # sender's frames in bus order
    elapsed_us: int


def run_transfer(
    payload: bytes,
    cfg: TransportConfig = TransportConfig(),
    bus_config: BusConfig = BusConfig(),
    sender_id: int = 0x7E8,
    receiver_id: int = 0x7E0,
) -> TransferResult:
    """Send one payload between two endpoints over the bus, nothing else attached."""
    bus = VirtualBus(bus_config)
    tx = Endpoint(sender_id, receiver_id, cfg)
    rx = Endpoint(receiver_id, sender_id, cfg)
    nodes = {ECU_NODE: tx, TOOL_NODE: rx}
    delivered: List[bytes] = []
    frames: List[RawCanFrame] = []

    def handle(node: int, events, now: int) -> None:
        for ev in events:
            if isinstance(ev, FrameOut):
                bus.submit(node, ev.frame, now)
            elif isinstance(ev, MessageComplete):
                delivered.append(ev.payload)

    handle(ECU_NODE, tx.send(payload, 0), 0)
    now = 0
    while not delivered:
        bus.arbitrate(now)
        timers = [(node, ep, ep.next_timer()) for node, ep in nodes.items()]
        times = [t for *_, t in timers if t is not None]
        bus_next = bus.next_event_time()
        if bus_next is not None:
            times.append(bus_next)
        if not times:
            break
        now = min(times)
        for d in bus.complete(now):
            if d.sender == ECU_NODE:
                frames.append(d.frame)
            for node, ep in nodes.items():
                if node == d.sender:
                    handle(node, ep.on_tx_confirm(d.frame, now), now)
                else:
                    handle(node, ep.on_can_frame(d.frame, now), now)
        for node, ep, t in timers:
            if t is not None and t <= now:
                handle(node, ep.on_timer(now), now)
    return TransferResult(delivered, frames, now)


_BASELINE_CACHE: Dict[Scenario, int] = {}


def baseline_elapsed(sc: Scenario) -> Optional[int]:
    """Elapsed time of the same scenario with the attacker removed."""
    key = sc.with_(attack=None, expect=(), name="")
    if key in _BASELINE_CACHE:
        return _BASELINE_CACHE[key]
    result = _Runner(key).run()
    value = None if result is None else result.elapsed_us
    if value is not None:
        _BASELINE_CACHE[key] = value
    return value


def run_scenario(sc: Scenario) -> RunResult:
    runner = _Runner(sc)
    exchange = runner.run()
    expected = sc.expected_payload()
    cls, reason, ranges = classify(exchange, expected, sc.transport.init_byte, runner.ecu_aborts)
    notes: List[str] = []
    if runner.attacker is not None and runner.attacker.fired == 0:
        notes.append(f"TriggerNeverFired: {sc.attack.id}")
    baseline = baseline_elapsed(sc) if sc.attack is not None else (exchange.elapsed_us if exchange else None)
    outcome = ScenarioOutcome(
        name=sc.name,
        profile=sc.profile_label,
        attack=str(sc.attack.id) if sc.attack else "none",
        seed=sc.seed,
        cls=cls,
        reason=reason,
        attempts=exchange.attempts if exchange else len(runner.tool.history),
        elapsed_us=exchange.elapsed_us if exchange else sc.horizon_us,
        baseline_elapsed_us=baseline,
        frames_total=runner.bus.delivered_count,
        alerts=runner.alerts,
        corrupted_ranges=ranges,
        payload=exchange.payload if exchange else None,
        dtc_count=exchange.dtc_count if exchange else None,
        notes=notes,
    )
    return RunResult(outcome, runner.trace, exchange)


def run_matrix(
    base: Scenario,
    profiles: Sequence[str] = PROFILE_NAMES,
    attacks: Sequence[Optional[str]] = (None,) + atk.ATTACK_IDS,
) -> List[ScenarioOutcome]:
    if not profiles or not attacks:
        raise ValueError("profiles and attacks must be non-empty")
    outcomes = []
    for profile in profiles:
        for attack in attacks:
            spec = None if attack in (None, "none") else atk.default_spec(attack, wait_count=base.transport.wft_max)
            sc = base.with_(
                profile=profile,
                attack=spec,
                name=f"{base.name}/{profile}/{attack or 'none'}",
                expect=(),
            )
            outcomes.append(run_scenario(sc).outcome)
    return outcomes


# --------------------------------------------------------------------------
# outputs


def format_trace(trace: Sequence[TraceRecord]) -> str:
    return "".join(rec.candump() + "\n" for rec in trace)


def export_trace(trace: Sequence[TraceRecord], path: Union[str, Path]) -> Path:
    if not trace:
        raise ValueError("refusing to write an empty trace")
    path = Path(path)
    path.write_text(format_trace(trace), encoding="ascii")
    return path


def report(outcomes: Sequence[ScenarioOutcome]) -> str:
    if not outcomes:
        raise ValueError("report needs at least one outcome")
    doc = {"scenarios": [o.to_dict() for o in outcomes]}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def default_out_dir() -> Path:
    return Path(os.environ.get(OUT_DIR_ENV, "."))


def check_expectations(outcome: ScenarioOutcome, expect) -> List[str]:
    """Return one message per failed ``[expect]`` assertion."""
    failures = []
    for key, want in dict(expect).items():
        want = want.strip()
        if key == "class":
            allowed = [w.strip() for w in want.split("|")]
            if str(outcome.cls) not in allowed:
                failures.append(f"class: expected {want}, got {outcome.cls}")
        elif key == "reason":
            if outcome.reason != want:
                failures.append(f"reason: expected {want}, got {outcome.reason}")
        elif key == "attempts":
            if outcome.attempts != int(want):
                failures.append(f"attempts: expected {want}, got {outcome.attempts}")
        elif key == "min_factor":
            if outcome.factor is None or outcome.factor < float(want):
                failures.append(f"min_factor: expected >= {want}, got {outcome.factor}")
        elif key == "alerts":
            need = {a.strip().upper() for a in want.split(",") if a.strip()}
            missing = need - set(outcome.alert_classes)
            if missing:
                failures.append(f"alerts: missing {sorted(missing)}")
        elif key == "no_alerts":
            if _bool(want) and outcome.alerts:
                failures.append(f"no_alerts: got {outcome.alerts}")
        elif key == "dtc_count":
            if outcome.dtc_count != int(want):
                failures.append(f"dtc_count: expected {want}, got {outcome.dtc_count}")
        else:
            failures.append(f"unknown expectation {key!r}")
    return failures


# --------------------------------------------------------------------------
# scenario files


def _bool(text: str) -> bool:
    return text.strip().lower() in ("1", "true", "yes", "on")


def _int(text: str) -> int:
    return int(text.strip(), 0)


def _request(text: str) -> DiagRequest:
    text = text.strip().lower()
    if text == "identifiers":
        return IDENTIFIERS_REQUEST
    if text == "dtc":
        return DTC_REQUEST
    try:
        return DiagRequest.decode(bytes.fromhex(text))
    except ValueError:
        raise InvalidScenario(f"request must be identifiers, dtc or hex bytes, got {text!r}") from None


def _trigger(text: str) -> atk.TriggerCondition:
    kind, _, arg = text.strip().lower().partition(":")
    if kind == "ff":
        return atk.OnFirstFrameObserved(_int(arg) if arg else 0x7E8)
    if kind == "cf":
        return atk.OnConsecutiveFrameObserved(nth=_int(arg) if arg else 1)
    if kind == "start":
        return atk.OnExchangeStart()
    if kind == "at":
        return atk.AtTime(_int(arg))
    raise InvalidScenario(f"unknown trigger {text!r}")


_ATTACK_INT_KEYS = (
    "fc_bs", "fc_stmin", "wait_count", "injected_sn", "reserved_nibble",
    "flood_id", "flood_count", "flood_spacing_us", "race_offset_us",
)


def _attack(section: configparser.SectionProxy, wft_max: int) -> atk.AttackSpec:
    kwargs: dict = {"wait_count": wft_max}
    for key, value in section.items():
        if key == "id":
            continue
        if key in _ATTACK_INT_KEYS:
            kwargs[key] = _int(value)
        elif key == "trigger":
            kwargs["trigger"] = _trigger(value)
        elif key in ("ff_dl_choice", "frame_kind"):
            kwargs[key] = value.strip()
        elif key == "payload":
            kwargs[key] = bytes.fromhex(value.strip())
        elif key in ("reaction_us", "jitter_us"):
            continue
        else:
            raise InvalidScenario(f"unknown [attack] key {key!r}")
    try:
        return atk.default_spec(section["id"], **kwargs)
    except (KeyError, ValueError) as exc:
        raise InvalidScenario(f"bad [attack] section: {exc}") from None


def _padding(text: str) -> PaddingPolicy:
    text = text.strip().lower()
    if text == "none":
        return NO_PADDING
    return PaddingPolicy(True, _int(text)) if text else DEFAULT_PADDING


def load_scenario(path: Union[str, Path]) -> Scenario:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise InvalidScenario(f"cannot read {path}: {exc}") from None
    return scenario_from_config(cp, default_name=Path(path).stem)


def scenario_from_config(cp: configparser.ConfigParser, default_name: str = "scenario") -> Scenario:
    get = lambda sec, key, fallback=None: cp.get(sec, key, fallback=fallback) if cp.has_section(sec) else fallback  # noqa: E731
    try:
        tp_kwargs = {}
        if cp.has_section("transport"):
            for key, value in cp.items("transport"):
                if key in ("bs", "stmin_raw", "wft_max", "timeout_fc_us", "timeout_cf_us",
                           "rx_buffer_capacity", "init_byte"):
                    tp_kwargs[key] = _int(value)
                elif key == "timeout_tolerance":
                    tp_kwargs[key] = float(value)
                elif key == "padding":
                    tp_kwargs[key] = _padding(value)
                else:
                    raise InvalidScenario(f"unknown [transport] key {key!r}")
        transport = TransportConfig(**tp_kwargs)
        bus = BusConfig(
            bitrate_bps=_int(get("bus", "bitrate_bps", "500000")),
            bits_per_frame=_int(get("bus", "bits_per_frame", "128")),
            seed=_int(get("scenario", "seed", "0")),
        )
        attack = None
        if cp.has_section("attack") and cp.get("attack", "id", fallback="none").strip().lower() != "none":
            attack = _attack(cp["attack"], transport.wft_max)
        return Scenario(
            name=get("scenario", "name", default_name),
            seed=_int(get("scenario", "seed", "0")),
            horizon_us=_int(get("scenario", "horizon_us", "60000000")),
            profile=get("scenario", "profile", "strict").strip().lower(),
            mitigations=parse_mitigations(get("scenario", "mitigations", "all")),
            bus=bus,
            transport=transport,
            request=_request(get("tool", "request", "identifiers")),
            retry=RetryPolicy(
                _int(get("tool", "max_retries", "3")),
                _int(get("tool", "retry_timeout_us", "1000000")),
            ),
            identifiers_length=_int(get("ecu", "identifiers_length", "64")),
            dtc_count=_int(get("ecu", "dtc_count", "4")),
            response_delay_us=_int(get("ecu", "response_delay_us", "1000")),
            response_jitter_us=_int(get("ecu", "response_jitter_us", "200")),
            attack=attack,
            attacker_reaction_us=_int(get("attack", "reaction_us", "50")),
            attacker_jitter_us=_int(get("attack", "jitter_us", "50")),
            expect=tuple(cp.items("expect")) if cp.has_section("expect") else (),
        )
    except InvalidScenario:
        raise
    except (ValueError, KeyError, configparser.Error) as exc:
        raise InvalidScenario(str(exc)) from None
