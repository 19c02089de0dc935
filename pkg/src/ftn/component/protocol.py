"""
FTN fault detection and fault recovery, plus the conventional
sender-retransmission baseline, as transition functions.

Every function takes the state it owns, an input and the current time, updates
that state in place and returns the list of actions the caller must carry out.
Nothing here performs I/O or reads a clock; the engine loop is the single
writer of each state object.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, Field

from src.ftn.component.topology import CastClass, ConnectionStatus, RoutingTable, map_destination
from src.ftn.component.wire import Address, Message, MessageKind
from src.logging import logging as logger


class Protocol(str, Enum):
    FTN = "ftn"
    CONVENTIONAL = "conventional"


class FtnParams(BaseModel):
    qm_period_ms: int = Field(500, gt=0)
    buffer_timeout_ms: int = Field(1000, gt=0)
    buffer_capacity_bits: int = Field(100_000, gt=0)


@dataclass(frozen=True)
class BufferEntry:
    entry_id: int
    message: Message
    stored_at: int
    deadline: int
    faulty_next_hop: str
    size_bits: int


# actions

@dataclass(frozen=True)
class Send:
    message: Message
    interface: int
    neighbor: str


@dataclass(frozen=True)
class StoreBuffered:
    entry: BufferEntry


@dataclass(frozen=True)
class ReleaseBuffered:
    entries: Tuple[BufferEntry, ...]
    neighbor: str


@dataclass(frozen=True)
class NackToSender:
    original: Message
    nack: Message
    reason: str


@dataclass(frozen=True)
class DropSilently:
    message: Message
    reason: str


@dataclass(frozen=True)
class MarkActive:
    neighbor: str
    changed: bool = True


@dataclass(frozen=True)
class MarkInactive:
    neighbor: str


@dataclass(frozen=True)
class ScheduleProbe:
    neighbor: str
    at: int


@dataclass(frozen=True)
class Deliver:
    message: Message


@dataclass(frozen=True)
class Retransmit:
    message: Message
    reason: str


@dataclass(frozen=True)
class ScheduleRetransmitCheck:
    at: int


Action = Union[
    Send, StoreBuffered, ReleaseBuffered, NackToSender, DropSilently, MarkActive, MarkInactive,
    ScheduleProbe, Deliver, Retransmit, ScheduleRetransmitCheck,
]


@dataclass
class RouterState:
    id: str
    address: Address
    table: RoutingTable
    params: FtnParams
    protocol: Protocol = Protocol.FTN
    buffer: List[BufferEntry] = field(default_factory=list)
    remaining_bits: Optional[int] = None
    awaiting: Dict[str, int] = field(default_factory=dict)
    probes: Dict[str, int] = field(default_factory=dict)
    next_entry_id: int = 1

    def __post_init__(self):
        if self.remaining_bits is None:
            self.remaining_bits = self.params.buffer_capacity_bits

    @property
    def buffered_bits(self) -> int:
        return sum(e.size_bits for e in self.buffer)

    def entry(self, entry_id: int) -> Optional[BufferEntry]:
        return next((e for e in self.buffer if e.entry_id == entry_id), None)


def new_router_state(
    name: str, address: Address, table: RoutingTable, params: FtnParams, protocol: Protocol = Protocol.FTN
) -> RouterState:
    return RouterState(id=name, address=address, table=table, params=params, protocol=protocol)


def make_nack(original: Message) -> Message:
    """NACK whose header names the original destination as sender and the original sender as destination."""
    return Message(
        kind=MessageKind.NACK,
        sender=original.destination,
        destination=original.sender,
        id=original.id,
        attempt=original.attempt,
        is_ack=original.is_ack,
    )


def _query(state: RouterState, neighbor: str) -> Send:
    iface = state.table.interface_of(neighbor)
    fdqm = Message(kind=MessageKind.FDQM, sender=state.address, destination=state.table.neighbor_address(neighbor))
    return Send(fdqm, iface, neighbor)


def _release(state: RouterState, neighbor: str) -> List[Action]:
    released = tuple(e for e in state.buffer if e.faulty_next_hop == neighbor)
    if not released:
        return []
    state.buffer = [e for e in state.buffer if e.faulty_next_hop != neighbor]
    state.remaining_bits += sum(e.size_bits for e in released)

    actions: List[Action] = [ReleaseBuffered(released, neighbor)]
    for entry in released:
        hop = state.table.next_hop(entry.message.destination)
        iface, via = hop if hop else (state.table.interface_of(neighbor), neighbor)
        actions.append(Send(entry.message, iface, via))
    return actions


def mark_active(state: RouterState, neighbor: str, now: int) -> List[Action]:
    changed = state.table.status_of(neighbor) is ConnectionStatus.INACTIVE
    if changed:
        state.table.set_status(neighbor, ConnectionStatus.ACTIVE)
    state.probes.pop(neighbor, None)
    return [MarkActive(neighbor, changed)] + _release(state, neighbor)


def declare_inactive(state: RouterState, neighbor: str, now: int) -> List[Action]:
    """Mark a neighbour faulty and make sure a probe schedule runs toward it."""
    actions: List[Action] = []
    state.awaiting.pop(neighbor, None)
    if state.table.status_of(neighbor) is ConnectionStatus.ACTIVE:
        state.table.set_status(neighbor, ConnectionStatus.INACTIVE)
        actions.append(MarkInactive(neighbor))
    if neighbor not in state.probes:
        state.probes[neighbor] = now
        actions.append(ScheduleProbe(neighbor, now))
    return actions


def on_detection_tick(state: RouterState, now: int) -> List[Action]:
    """
    Periodic detection round.

    A neighbour whose FDRM for the previous round has not arrived is declared
    Inactive; every neighbour still believed up gets a fresh FDQM. Inactive
    neighbours are left to their probe schedule.
    """
    actions: List[Action] = []
    for neighbor, due in sorted(state.awaiting.items()):
        if due <= now:
            logger.debug(f"{state.id}: no FDRM from {neighbor} since {due - state.params.qm_period_ms}")
            actions += declare_inactive(state, neighbor, now)

    for _, neighbor in state.table.direct_neighbors():
        if neighbor in state.probes or state.table.status_of(neighbor) is ConnectionStatus.INACTIVE:
            continue
        actions.append(_query(state, neighbor))
        state.awaiting[neighbor] = now + state.params.qm_period_ms
    return actions


def on_probe_tick(state: RouterState, neighbor: str, now: int) -> List[Action]:
    """Query a faulty next hop again; stale ticks (schedule ended or moved) do nothing."""
    if state.probes.get(neighbor) != now:
        return []
    state.probes[neighbor] = now + state.params.qm_period_ms
    return [_query(state, neighbor), ScheduleProbe(neighbor, now + state.params.qm_period_ms)]


def handle_message(state: RouterState, m: Message, arrival_interface: Optional[int], now: int) -> List[Action]:
    """
    Receive one frame at a routing device.

    The arrival interface stands for the previous hop. FDQM is answered with an
    FDRM on the same interface, FDRM is never answered; both mark the previous
    hop Active and release what was buffered for it. Data and NACK frames are
    forwarded on every valid interface; a unicast whose next hop is Inactive
    goes to fault recovery (FTN) or is dropped (conventional).
    """
    previous = state.table.interfaces.get(arrival_interface) if arrival_interface is not None else None

    if m.kind is MessageKind.FDQM:
        fdrm = Message(kind=MessageKind.FDRM, sender=state.address, destination=m.sender)
        actions: List[Action] = [Send(fdrm, arrival_interface, previous)]
        return actions + mark_active(state, previous, now)

    if m.kind is MessageKind.FDRM:
        state.awaiting.pop(previous, None)
        return mark_active(state, previous, now)

    actions = []
    if previous is not None and state.table.status_of(previous) is ConnectionStatus.INACTIVE:
        actions += mark_active(state, previous, now)

    if m.destination == state.address:
        return actions + [Deliver(m)]

    cast = map_destination(m.destination)
    if cast is CastClass.UNICAST and not state.table.has_route(m.destination):
        return actions + [DropSilently(m, "no-route")]

    hops = state.table.find_interfaces(m.destination, cast, arrival_interface)
    actions += [Send(m, iface, neighbor) for iface, neighbor in hops]

    if cast is CastClass.UNICAST and not hops:
        faulty = state.table.interfaces[state.table.lookup(m.destination).interface]
        if m.kind is MessageKind.DATA and state.protocol is Protocol.FTN:
            actions += store_on_fault(state, m, faulty, now)
        else:
            actions.append(DropSilently(m, f"next hop {faulty} inactive"))
    return actions


def store_on_fault(state: RouterState, m: Message, faulty: str, now: int) -> List[Action]:
    size = m.size_bits
    if size > state.remaining_bits:
        logger.info(f"{state.id}: {size}-bit message {m.id} exceeds remaining buffer {state.remaining_bits}")
        return [NackToSender(m, make_nack(m), "buffer-full")]

    entry = BufferEntry(
        entry_id=state.next_entry_id,
        message=m,
        stored_at=now,
        deadline=now + state.params.buffer_timeout_ms,
        faulty_next_hop=faulty,
        size_bits=size,
    )
    state.next_entry_id += 1
    state.buffer.append(entry)
    state.remaining_bits -= size

    actions: List[Action] = [StoreBuffered(entry)]
    if faulty not in state.probes:
        state.probes[faulty] = now
        actions.append(ScheduleProbe(faulty, now))
    return actions


def on_buffer_timeout(state: RouterState, entry_id: int, now: int) -> List[Action]:
    entry = state.entry(entry_id)
    if entry is None or now < entry.deadline:
        return []
    state.buffer.remove(entry)
    state.remaining_bits += entry.size_bits
    return [NackToSender(entry.message, make_nack(entry.message), "timeout")]


def on_router_failure(state: RouterState) -> List[BufferEntry]:
    """A failing router loses its buffer and detection state; returns the lost entries."""
    lost = list(state.buffer)
    state.buffer.clear()
    state.remaining_bits = state.params.buffer_capacity_bits
    state.awaiting.clear()
    state.probes.clear()
    return lost


def on_router_repair(state: RouterState) -> None:
    state.table.reset()
    state.awaiting.clear()
    state.probes.clear()


# senders

@dataclass
class InFlight:
    message: Message
    first_sent: int
    last_sent: int
    attempt: int = 0
    acked_at: Optional[int] = None


@dataclass
class SenderState:
    """
    End-host bookkeeping for unacknowledged unicast messages.

    The conventional sender resends every retransmit_timeout_ms. The FTN
    sender resends on a correlated NACK, and falls back to a resend after
    silence_timeout_ms when neither an ACK nor a NACK has come back, which
    covers copies lost before any routing device could buffer them.
    """

    id: str
    address: Address
    protocol: Protocol = Protocol.FTN
    retransmit_timeout_ms: int = 1200
    silence_timeout_ms: int = 2200
    in_flight: Dict[str, InFlight] = field(default_factory=dict)

    def pending(self) -> List[InFlight]:
        return [f for f in self.in_flight.values() if f.acked_at is None]

    @property
    def timeout_ms(self) -> int:
        if self.protocol is Protocol.CONVENTIONAL:
            return self.retransmit_timeout_ms
        return self.silence_timeout_ms


def sender_transmit(sender: SenderState, m: Message, now: int) -> List[Action]:
    sender.in_flight[m.id] = InFlight(message=m, first_sent=now, last_sent=now, attempt=m.attempt)
    return [ScheduleRetransmitCheck(now + sender.timeout_ms)]


def _resend(sender: SenderState, flight: InFlight, now: int, reason: str) -> Retransmit:
    flight.attempt += 1
    flight.last_sent = now
    flight.message = flight.message.model_copy(update={"attempt": flight.attempt})
    return Retransmit(flight.message, reason)


def _resend_expired(sender: SenderState, now: int, reason: str) -> List[Action]:
    actions: List[Action] = []
    for flight in sender.pending():
        if now >= flight.last_sent + sender.timeout_ms:
            actions.append(_resend(sender, flight, now, reason))
            actions.append(ScheduleRetransmitCheck(now + sender.timeout_ms))
    return actions


def conventional_sender_step(sender: SenderState, now: int) -> List[Action]:
    """End-to-end timeout: resend every unacknowledged frame whose timer expired."""
    return _resend_expired(sender, now, "timeout")


def ftn_sender_step(sender: SenderState, now: int) -> List[Action]:
    """Resend frames that heard neither ACK nor NACK for silence_timeout_ms; a NACK restarts the wait."""
    return _resend_expired(sender, now, "silence")


def sender_step(sender: SenderState, now: int) -> List[Action]:
    if sender.protocol is Protocol.CONVENTIONAL:
        return conventional_sender_step(sender, now)
    return ftn_sender_step(sender, now)


def ftn_sender_on_nack(sender: SenderState, nack: Message, now: int) -> List[Action]:
    flight = sender.in_flight.get(nack.id)
    if (
        flight is None
        or flight.acked_at is not None
        or nack.attempt != flight.attempt
        or nack.sender != flight.message.destination
    ):
        logger.warning(f"{sender.id}: ignoring uncorrelated NACK for {nack.id} (attempt {nack.attempt})")
        return []
    return [_resend(sender, flight, now, "nack"), ScheduleRetransmitCheck(now + sender.timeout_ms)]


def sender_on_ack(sender: SenderState, ack: Message, now: int) -> Optional[InFlight]:
    """Settle the in-flight message an ACK refers to; None when it was unknown or already settled."""
    flight = sender.in_flight.get(ack.id)
    if flight is None or flight.acked_at is not None:
        return None
    flight.acked_at = now
    return flight
