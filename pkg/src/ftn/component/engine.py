"""
Deterministic discrete-event simulator for the hierarchical network.

Time is an integer number of milliseconds. Events are ordered by
(time, stage, seq): at one instant fault onsets run first, then frame
arrivals and traffic injection, then timers, and repairs last. Within a stage
events run in the order they were scheduled.
"""
import heapq
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Literal, Optional, Set, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.exception import FtnError, NoRouteError, ScenarioValidationError
from src.ftn.component import protocol as proto
from src.ftn.component.topology import CastClass, NodeKind, Topology, map_destination
from src.ftn.component.wire import HEADER_LEN, MAX_PAYLOAD, Address, Message, MessageKind, address
from src.logging import logging as logger

MAX_FRAME_BITS = 8 * MAX_PAYLOAD


class EventKind(str, Enum):
    FAULT_START = "FaultStart"
    FRAME_ARRIVAL = "FrameArrival"
    INJECT_TRAFFIC = "InjectTraffic"
    DETECTION_TICK = "DetectionTick"
    PROBE_TICK = "ProbeTick"
    BUFFER_DEADLINE = "BufferDeadline"
    SENDER_RETRANSMIT_CHECK = "SenderRetransmitCheck"
    FAULT_END = "FaultEnd"


STAGE = {
    EventKind.FAULT_START: 0,
    EventKind.FRAME_ARRIVAL: 1,
    EventKind.INJECT_TRAFFIC: 1,
    EventKind.DETECTION_TICK: 2,
    EventKind.PROBE_TICK: 2,
    EventKind.BUFFER_DEADLINE: 2,
    EventKind.SENDER_RETRANSMIT_CHECK: 2,
    EventKind.FAULT_END: 3,
}


class TraceEvent(str, Enum):
    INJECTED = "Injected"
    FORWARDED = "Forwarded"
    BUFFERED = "Buffered"
    RELEASED = "Released"
    TIMED_OUT = "TimedOut"
    NACKED = "Nacked"
    RETRANSMITTED = "Retransmitted"
    DELIVERED = "Delivered"
    ACK_DELIVERED = "AckDelivered"
    LOST = "Lost"
    FDQM_SENT = "FdqmSent"
    FDRM_SENT = "FdrmSent"
    MARKED_INACTIVE = "MarkedInactive"
    MARKED_ACTIVE = "MarkedActive"
    FAULT_START = "FaultStart"
    FAULT_END = "FaultEnd"
    TRUNCATED = "Truncated"


TRACE_COLUMNS = ["time_ms", "node", "event", "msg_id", "detail"]


@dataclass(order=True)
class Event:
    time: int
    stage: int
    seq: int
    kind: EventKind = field(compare=False)
    node: Optional[str] = field(default=None, compare=False)
    message: Optional[Message] = field(default=None, compare=False)
    origin: Optional[str] = field(default=None, compare=False)
    epoch: int = field(default=0, compare=False)
    neighbor: Optional[str] = field(default=None, compare=False)
    entry_id: Optional[int] = field(default=None, compare=False)
    fault: Optional["FaultSpec"] = field(default=None, compare=False)


@dataclass(frozen=True)
class TraceRecord:
    time_ms: int
    node: str
    event: TraceEvent
    msg_id: str = ""
    detail: str = ""


class Trace:
    def __init__(self):
        self.records: List[TraceRecord] = []

    def add(self, time_ms: int, node: str, event: TraceEvent, msg_id: Optional[str] = None, detail: str = ""):
        self.records.append(TraceRecord(time_ms, node, event, msg_id or "", detail))

    def of(self, *events: TraceEvent) -> List[TraceRecord]:
        return [r for r in self.records if r.event in events]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(r.time_ms, r.node, r.event.value, r.msg_id, r.detail) for r in self.records],
            columns=TRACE_COLUMNS,
        )

    def to_csv(self, path=None) -> Optional[str]:
        return self.to_frame().to_csv(path, index=False, lineterminator="\n")


class DelayModel(BaseModel):
    """Per-hop delay = queueing wait + transmission + switching + propagation, in whole milliseconds."""

    switching_delay_ms: int = Field(0, ge=0)

    @staticmethod
    def transmission_ms(bits: int, capacity_bps: int) -> int:
        # sub-millisecond transmission time is negligible
        return bits * 1000 // capacity_bps


class TrafficSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    sender: str
    destination: str = Field(..., description="node name or dotted address (broadcast/multicast)")
    frame_bits: int = Field(500, gt=0, le=MAX_FRAME_BITS)
    frame_rate: float = Field(100.0, gt=0, description="frames per second")
    start_ms: int = Field(0, ge=0)
    count: int = Field(1, ge=1)
    arrival: Literal["periodic", "poisson"] = "periodic"
    seed: int = 0

    def send_times(self) -> List[int]:
        gap_ms = 1000.0 / self.frame_rate
        if self.arrival == "poisson":
            rng = np.random.default_rng(self.seed)
            gaps = np.concatenate([[0.0], rng.exponential(gap_ms, size=self.count - 1)])
            offsets = np.cumsum(gaps)
        else:
            offsets = np.arange(self.count) * gap_ms
        return [self.start_ms + int(round(float(o))) for o in offsets]


class FaultSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    node: Optional[str] = None
    link: Optional[Tuple[str, str]] = None
    start_ms: int = Field(0, ge=0)
    duration_ms: int = Field(..., ge=0)

    @model_validator(mode="after")
    def _one_target(self):
        if (self.node is None) == (self.link is None):
            raise ValueError("a fault names exactly one of 'node' or 'link'")
        return self

    @property
    def target(self) -> str:
        return self.node if self.node is not None else f"{self.link[0]}<->{self.link[1]}"

    @property
    def end_ms(self) -> int:
        return self.start_ms + self.duration_ms


class Scenario(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    topology: Topology
    traffic: List[TrafficSpec] = Field(default_factory=list)
    faults: List[FaultSpec] = Field(default_factory=list)
    protocol: proto.Protocol = proto.Protocol.FTN
    params: proto.FtnParams = Field(default_factory=proto.FtnParams)
    retransmit_timeout_ms: int = Field(1200, gt=0)
    ack_enabled: bool = True
    delay: DelayModel = Field(default_factory=DelayModel)
    horizon_ms: int = Field(60_000, gt=0)


def validate_scenario(scenario: Scenario) -> List[str]:
    """Every violation of the scenario against its topology, as 'path: message' strings."""
    t = scenario.topology
    violations = [f"topology: {p}" for p in t.validate()]

    for i, spec in enumerate(scenario.traffic):
        node = t.nodes.get(spec.sender)
        if node is None:
            violations.append(f"traffic[{i}].sender: unknown node {spec.sender}")
        elif node.kind is NodeKind.SWITCH:
            violations.append(f"traffic[{i}].sender: switches do not originate traffic")
        if spec.destination not in t.nodes:
            try:
                address(spec.destination)
            except ValueError:
                violations.append(f"traffic[{i}].destination: neither a node name nor an address: {spec.destination}")
        elif spec.destination == spec.sender:
            violations.append(f"traffic[{i}].destination: sender and destination are the same node")

    windows: Dict[str, List[Tuple[int, int, int]]] = {}
    for i, fault in enumerate(scenario.faults):
        if fault.node is not None and fault.node not in t.nodes:
            violations.append(f"faults[{i}].node: unknown node {fault.node}")
            continue
        if fault.link is not None:
            a, b = fault.link
            if frozenset((a, b)) not in t.links:
                violations.append(f"faults[{i}].link: {a} and {b} are not linked")
                continue
        key = fault.node or "<->".join(sorted(fault.link))
        windows.setdefault(key, []).append((fault.start_ms, fault.end_ms, i))

    for key, spans in windows.items():
        spans.sort()
        for (s1, e1, i1), (s2, e2, i2) in zip(spans, spans[1:]):
            if s2 < e1:
                violations.append(f"faults[{i2}]: overlaps faults[{i1}] on {key}")
    return violations


@dataclass
class MessageOutcome:
    id: str
    sender: str
    destination: str
    cast: CastClass
    first_sent: int
    bits: int = 0
    transmissions: int = 1
    delivered_at: Optional[int] = None
    acked_at: Optional[int] = None
    last_terminal: Optional[str] = None
    last_buffer_deadline: Optional[int] = None
    last_retransmit_at: Optional[int] = None

    def settled(self, ack_enabled: bool) -> bool:
        if self.cast is not CastClass.UNICAST:
            return True
        if ack_enabled:
            return self.acked_at is not None
        return self.delivered_at is not None

    @property
    def state(self) -> str:
        if self.delivered_at is not None:
            return "Delivered"
        return self.last_terminal or "Pending"


@dataclass
class RunResult:
    scenario: Scenario
    trace: Trace
    outcomes: Dict[str, MessageOutcome]
    end_ms: int
    truncated: bool
    routers: Dict[str, proto.RouterState]


class Simulator:
    """Single-threaded event loop for one scenario run."""

    def __init__(self, scenario: Scenario):
        violations = validate_scenario(scenario)
        if violations:
            raise ScenarioValidationError(violations)

        self.scenario = scenario
        self.topology = scenario.topology
        self.trace = Trace()
        self.clock = 0
        self._queue: List[Event] = []
        self._seq = 0

        self.routers: Dict[str, proto.RouterState] = {
            name: proto.new_router_state(
                name, self.topology.nodes[name].address, table.copy(), scenario.params, scenario.protocol
            )
            for name, table in self.topology.tables.items()
        }
        self.senders: Dict[str, proto.SenderState] = {}
        self.outcomes: Dict[str, MessageOutcome] = {}

        self.down_nodes: Set[str] = set()
        self.queued_queries: Dict[str, List[Tuple[Message, str]]] = {}
        self.down_links: Set[frozenset] = set()
        self.link_epoch: Dict[frozenset, int] = {key: 0 for key in self.topology.links}
        self.link_busy: Dict[Tuple[str, str], int] = {}

        self._frames_in_flight = 0
        self._pending_injections = 0
        self._pending_faults = 0

    # scheduling

    def schedule(self, time: int, kind: EventKind, **kwargs) -> Event:
        if time < self.clock:
            raise FtnError(f"cannot schedule {kind.value} at {time} before clock {self.clock}")
        self._seq += 1
        event = Event(time=time, stage=STAGE[kind], seq=self._seq, kind=kind, **kwargs)
        heapq.heappush(self._queue, event)
        return event

    def _setup(self) -> None:
        for fault in self.scenario.faults:
            if fault.duration_ms == 0:
                continue
            self.schedule(fault.start_ms, EventKind.FAULT_START, fault=fault)
            self.schedule(fault.end_ms, EventKind.FAULT_END, fault=fault)
            self._pending_faults += 2

        counter = 0
        for spec in self.scenario.traffic:
            dest = self.topology.nodes[spec.destination].address if spec.destination in self.topology.nodes \
                else address(spec.destination)
            payload = bytes(max(0, spec.frame_bits // 8 - HEADER_LEN))
            for at in spec.send_times():
                counter += 1
                m = Message(
                    kind=MessageKind.DATA,
                    sender=self.topology.nodes[spec.sender].address,
                    destination=dest,
                    payload=payload,
                    id=f"m{counter}",
                    bits=spec.frame_bits,
                )
                self.schedule(at, EventKind.INJECT_TRAFFIC, node=spec.sender, message=m)
                self._pending_injections += 1

        for name in self.routers:
            self.schedule(0, EventKind.DETECTION_TICK, node=name)

    # main loop

    def run(self) -> RunResult:
        self._setup()
        logger.info(
            f"Running {self.scenario.protocol.value} scenario: {self._pending_injections} messages, "
            f"{len(self.scenario.faults)} faults, horizon {self.scenario.horizon_ms} ms"
        )
        truncated = False
        while self._queue:
            if self._queue[0].time > self.scenario.horizon_ms:
                truncated = not self._quiescent()
                break
            event = heapq.heappop(self._queue)
            self.clock = event.time
            self._dispatch(event)
            if self._quiescent():
                break

        if truncated:
            unsettled = sum(1 for o in self.outcomes.values() if not o.settled(self.scenario.ack_enabled))
            self.trace.add(self.scenario.horizon_ms, "-", TraceEvent.TRUNCATED,
                           detail=f"horizon reached with {unsettled} unsettled messages")
            logger.warning(f"Run truncated at {self.scenario.horizon_ms} ms with {unsettled} unsettled messages")

        logger.info(f"Run finished at {self.clock} ms with {len(self.trace.records)} trace records")
        return RunResult(self.scenario, self.trace, self.outcomes, self.clock, truncated, self.routers)

    def _quiescent(self) -> bool:
        if self._pending_injections or self._pending_faults or self._frames_in_flight:
            return False
        if any(r.buffer for r in self.routers.values()):
            return False
        return all(o.settled(self.scenario.ack_enabled) for o in self.outcomes.values())

    def _dispatch(self, event: Event) -> None:
        now = event.time
        if event.kind is EventKind.FRAME_ARRIVAL:
            self._on_arrival(event)
        elif event.kind is EventKind.INJECT_TRAFFIC:
            self._pending_injections -= 1
            self._inject(event.node, event.message)
        elif event.kind is EventKind.DETECTION_TICK:
            self.schedule(now + self.scenario.params.qm_period_ms, EventKind.DETECTION_TICK, node=event.node)
            if event.node not in self.down_nodes:
                self._apply(event.node, proto.on_detection_tick(self.routers[event.node], now))
        elif event.kind is EventKind.PROBE_TICK:
            if event.node not in self.down_nodes:
                self._apply(event.node, proto.on_probe_tick(self.routers[event.node], event.neighbor, now))
        elif event.kind is EventKind.BUFFER_DEADLINE:
            if event.node not in self.down_nodes:
                self._apply(event.node, proto.on_buffer_timeout(self.routers[event.node], event.entry_id, now))
        elif event.kind is EventKind.SENDER_RETRANSMIT_CHECK:
            self._apply(event.node, proto.sender_step(self.senders[event.node], now))
        elif event.kind is EventKind.FAULT_START:
            self._pending_faults -= 1
            self.inject_fault(event.fault, now)
        elif event.kind is EventKind.FAULT_END:
            self._pending_faults -= 1
            self.repair(event.fault, now)

    # faults

    def inject_fault(self, fault: FaultSpec, now: int) -> None:
        self.trace.add(now, fault.target, TraceEvent.FAULT_START, detail=f"until {fault.end_ms}")
        if fault.node is not None:
            name = fault.node
            self.down_nodes.add(name)
            self.queued_queries[name] = []
            if name in self.routers:
                for entry in proto.on_router_failure(self.routers[name]):
                    self._record_lost(now, name, entry.message, "buffer lost with failed router")
            peers = [(n, name) for n in self.topology.neighbors(name)]
        else:
            a, b = fault.link
            key = frozenset((a, b))
            self.down_links.add(key)
            self.link_epoch[key] += 1
            peers = [(a, b), (b, a)]

        if now == 0:
            # present before the run started: neighbours already know
            for router, faulty in peers:
                if router in self.routers and router not in self.down_nodes:
                    self._apply(router, proto.declare_inactive(self.routers[router], faulty, now))

    def repair(self, fault: FaultSpec, now: int) -> None:
        if fault.node is not None:
            name = fault.node
            if name not in self.down_nodes:
                self.trace.add(now, name, TraceEvent.FAULT_END, detail="target already healthy")
                logger.warning(f"Repair of healthy node {name} at {now} ms ignored")
                return
            self.down_nodes.discard(name)
            self.trace.add(now, name, TraceEvent.FAULT_END)
            if name in self.routers:
                proto.on_router_repair(self.routers[name])
            for query, origin in self.queued_queries.pop(name, []):
                self._answer_query(name, query, origin)
        else:
            key = frozenset(fault.link)
            if key not in self.down_links:
                self.trace.add(now, fault.target, TraceEvent.FAULT_END, detail="target already healthy")
                logger.warning(f"Repair of healthy link {fault.target} at {now} ms ignored")
                return
            self.down_links.discard(key)
            self.trace.add(now, fault.target, TraceEvent.FAULT_END)

    # frames

    def _is_traffic(self, m: Message) -> bool:
        return m.kind in (MessageKind.DATA, MessageKind.NACK)

    def _copy_tag(self, m: Message) -> str:
        tag = f"attempt={m.attempt}"
        return tag + (" ack" if m.is_ack else "")

    def _record_lost(self, now: int, node: str, m: Message, reason: str) -> None:
        if not self._is_traffic(m):
            logger.debug(f"{now} {node}: {m.kind.value} dropped ({reason})")
            return
        self.trace.add(now, node, TraceEvent.LOST, m.id, f"{m.kind.value} {self._copy_tag(m)} {reason}")
        outcome = self.outcomes.get(m.id)
        if outcome is not None and m.kind is MessageKind.DATA and not m.is_ack:
            outcome.last_terminal = "Lost"

    def transmit(self, src: str, dst: str, m: Message, record: Optional[TraceEvent] = None) -> None:
        now = self.clock
        link = self.topology.link(src, dst)
        if link.key in self.down_links:
            self._record_lost(now, src, m, f"link {src}<->{dst} down")
            return

        bits = m.size_bits
        td = DelayModel.transmission_ms(bits, link.capacity_bps)
        start = max(now, self.link_busy.get((src, dst), now))
        self.link_busy[(src, dst)] = start + td
        arrival = start + td + self.scenario.delay.switching_delay_ms + link.delay_ms

        if record is None:
            record = {
                MessageKind.FDQM: TraceEvent.FDQM_SENT,
                MessageKind.FDRM: TraceEvent.FDRM_SENT,
            }.get(m.kind, TraceEvent.FORWARDED)
        detail = f"to {dst}" if not self._is_traffic(m) else f"to {dst} {m.kind.value} {self._copy_tag(m)}"
        self.trace.add(now, src, record, m.id, detail)

        if self._is_traffic(m):
            self._frames_in_flight += 1
        self.schedule(arrival, EventKind.FRAME_ARRIVAL, node=dst, message=m, origin=src, epoch=self.link_epoch[link.key])

    def _on_arrival(self, event: Event) -> None:
        now, node, m, origin = event.time, event.node, event.message, event.origin
        if self._is_traffic(m):
            self._frames_in_flight -= 1

        key = frozenset((origin, node))
        if key in self.down_links or self.link_epoch[key] != event.epoch:
            self._record_lost(now, node, m, f"link {origin}<->{node} failed in flight")
            return

        if node in self.down_nodes:
            if m.kind is MessageKind.FDQM:
                self.queued_queries[node].append((m, origin))
            else:
                self._record_lost(now, node, m, "node down")
            return

        kind = self.topology.nodes[node].kind
        if kind.is_routing:
            router = self.routers[node]
            self._apply(node, proto.handle_message(router, m, router.table.interface_of(origin), now))
        elif m.kind is MessageKind.FDQM:
            self._answer_query(node, m, origin)
        elif m.kind is MessageKind.FDRM:
            logger.debug(f"{now} {node}: unsolicited FDRM from {origin}")
        else:
            self._forward_plain(node, m, origin)

    def _answer_query(self, node: str, query: Message, origin: str) -> None:
        if node in self.routers:
            router = self.routers[node]
            self._apply(node, proto.handle_message(router, query, router.table.interface_of(origin), self.clock))
            return
        fdrm = Message(kind=MessageKind.FDRM, sender=self.topology.nodes[node].address, destination=query.sender)
        self.transmit(node, origin, fdrm)

    def _forward_plain(self, node: str, m: Message, origin: Optional[str]) -> None:
        """Switch and host handling of Data/NACK frames."""
        me = self.topology.nodes[node]
        cast = map_destination(m.destination)
        if m.destination == me.address:
            self._deliver(node, m)
            return
        if cast is not CastClass.UNICAST:
            if me.kind is NodeKind.HOST and origin is not None:
                self._deliver(node, m)
                return
            for neighbor in self.topology.neighbors(node):
                if neighbor != origin:
                    self.transmit(node, neighbor, m)
            return
        if me.kind is NodeKind.HOST and origin is not None:
            self._record_lost(self.clock, node, m, "misdelivered to host")
            return
        try:
            nxt = self.topology.first_hop(node, m.destination)
        except NoRouteError:
            self._record_lost(self.clock, node, m, "no-route")
            return
        self.transmit(node, nxt, m)

    # endpoints

    def _sender(self, node: str) -> proto.SenderState:
        if node not in self.senders:
            self.senders[node] = proto.SenderState(
                id=node,
                address=self.topology.nodes[node].address,
                protocol=self.scenario.protocol,
                retransmit_timeout_ms=self.scenario.retransmit_timeout_ms,
                silence_timeout_ms=self.scenario.retransmit_timeout_ms + self.scenario.params.buffer_timeout_ms,
            )
        return self.senders[node]

    def _inject(self, node: str, m: Message) -> None:
        now = self.clock
        dest_node = self.topology.node_at(m.destination)
        self.outcomes[m.id] = MessageOutcome(
            id=m.id,
            sender=node,
            destination=dest_node.name if dest_node else str(m.destination),
            cast=map_destination(m.destination),
            first_sent=now,
            bits=m.size_bits,
        )
        self.trace.add(now, node, TraceEvent.INJECTED, m.id, f"to {self.outcomes[m.id].destination} bits={m.size_bits}")
        if self.outcomes[m.id].cast is CastClass.UNICAST:
            self._apply(node, proto.sender_transmit(self._sender(node), m, now))
        self._originate(node, m)

    def _originate(self, node: str, m: Message) -> None:
        if node in self.down_nodes:
            self._record_lost(self.clock, node, m, "sender down")
            return
        if node in self.routers:
            self._apply(node, proto.handle_message(self.routers[node], m, None, self.clock))
            return
        self._forward_plain(node, m, None)

    def _deliver(self, node: str, m: Message) -> None:
        now = self.clock
        if m.kind is MessageKind.NACK:
            if m.is_ack:
                ack = Message(kind=MessageKind.DATA, sender=self.topology.nodes[node].address, destination=m.sender,
                              id=m.id, attempt=m.attempt + 1, is_ack=True)
                self.trace.add(now, node, TraceEvent.RETRANSMITTED, m.id, f"{self._copy_tag(ack)} after nack")
                self._originate(node, ack)
                return
            if self.scenario.protocol is proto.Protocol.FTN and node in self.senders:
                self._apply(node, proto.ftn_sender_on_nack(self.senders[node], m, now))
            else:
                logger.warning(f"{node}: NACK for {m.id} ignored")
            return

        if m.is_ack:
            flight = proto.sender_on_ack(self.senders[node], m, now) if node in self.senders else None
            if flight is None:
                logger.debug(f"{now} {node}: duplicate ACK for {m.id}")
                return
            self.trace.add(now, node, TraceEvent.ACK_DELIVERED, m.id, f"latency={now - self.outcomes[m.id].first_sent}")
            self.outcomes[m.id].acked_at = now
            return

        self.trace.add(now, node, TraceEvent.DELIVERED, m.id, self._copy_tag(m))
        outcome = self.outcomes.get(m.id)
        if outcome is not None:
            if outcome.delivered_at is None:
                outcome.delivered_at = now
            outcome.last_terminal = "Delivered"
        if self.scenario.ack_enabled and map_destination(m.destination) is CastClass.UNICAST:
            ack = Message(kind=MessageKind.DATA, sender=self.topology.nodes[node].address, destination=m.sender,
                          id=m.id, attempt=m.attempt, is_ack=True)
            self._originate(node, ack)

    # actions

    def _apply(self, node: str, actions: List[proto.Action]) -> None:
        now = self.clock
        for action in actions:
            if isinstance(action, proto.Send):
                self.transmit(node, action.neighbor, action.message)
            elif isinstance(action, proto.StoreBuffered):
                entry = action.entry
                self.trace.add(now, node, TraceEvent.BUFFERED, entry.message.id,
                               f"via {entry.faulty_next_hop} deadline={entry.deadline} "
                               f"remaining={self.routers[node].remaining_bits}")
                self.schedule(entry.deadline, EventKind.BUFFER_DEADLINE, node=node, entry_id=entry.entry_id)
                outcome = self.outcomes.get(entry.message.id)
                if outcome is not None and not entry.message.is_ack:
                    outcome.last_buffer_deadline = entry.deadline
            elif isinstance(action, proto.ReleaseBuffered):
                for entry in action.entries:
                    self.trace.add(now, node, TraceEvent.RELEASED, entry.message.id,
                                   f"to {action.neighbor} held={now - entry.stored_at}")
            elif isinstance(action, proto.NackToSender):
                self._nack(node, action)
            elif isinstance(action, proto.DropSilently):
                self._record_lost(now, node, action.message, action.reason)
            elif isinstance(action, proto.MarkActive):
                if action.changed:
                    self.trace.add(now, node, TraceEvent.MARKED_ACTIVE, detail=action.neighbor)
            elif isinstance(action, proto.MarkInactive):
                self.trace.add(now, node, TraceEvent.MARKED_INACTIVE, detail=action.neighbor)
            elif isinstance(action, proto.ScheduleProbe):
                self.schedule(action.at, EventKind.PROBE_TICK, node=node, neighbor=action.neighbor)
            elif isinstance(action, proto.Deliver):
                self._deliver(node, action.message)
            elif isinstance(action, proto.Retransmit):
                outcome = self.outcomes[action.message.id]
                outcome.transmissions += 1
                outcome.last_retransmit_at = now
                self.trace.add(now, node, TraceEvent.RETRANSMITTED, action.message.id,
                               f"{self._copy_tag(action.message)} on {action.reason}")
                self._originate(node, action.message)
            elif isinstance(action, proto.ScheduleRetransmitCheck):
                self.schedule(action.at, EventKind.SENDER_RETRANSMIT_CHECK, node=node)

    def _nack(self, node: str, action: proto.NackToSender) -> None:
        now = self.clock
        original = action.original
        if action.reason == "timeout":
            self.trace.add(now, node, TraceEvent.TIMED_OUT, original.id, self._copy_tag(original))
        self.trace.add(now, node, TraceEvent.NACKED, original.id, f"{self._copy_tag(original)} {action.reason}")
        outcome = self.outcomes.get(original.id)
        if outcome is not None and not original.is_ack:
            outcome.last_terminal = "Nacked"
        self._apply(node, proto.handle_message(self.routers[node], action.nack, None, now))


def run(scenario: Scenario) -> RunResult:
    return Simulator(scenario).run()
