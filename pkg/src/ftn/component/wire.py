"""
Wire format of FTN messages.

    +------+----------------+---------------------+------------------+
    | Flag | Sender address | Destination address | Data (optional)  |
    |  1B  |       4B       |         4B          |  0..1500 bytes   |
    +------+----------------+---------------------+------------------+

Flag bits are numbered from the most significant bit:

    bit0 (0x80)  1 = Data, 0 = control
    bit1 (0x40)  control only: 0 = FDQM (query), 1 = FDRM (report)
    bit2 (0x20)  control only: 1 = NACK, overrides bit1

Unused bits are written as zero and ignored when read.
"""
import struct
from enum import Enum
from ipaddress import IPv4Address
from typing import Optional, Union

from pydantic import BaseModel, ConfigDict, Field

from src.exception import EncodingError, MalformedControlError, OversizeFrameError, TruncatedFrameError

Address = IPv4Address

HEADER = struct.Struct("!B4s4s")
HEADER_LEN = HEADER.size
MAX_PAYLOAD = 1500
MAX_FRAME = HEADER_LEN + MAX_PAYLOAD

DATA_BIT = 0x80
REPORT_BIT = 0x40
NACK_BIT = 0x20

BROADCAST = IPv4Address("255.255.255.255")


class MessageKind(str, Enum):
    DATA = "Data"
    FDQM = "FDQM"
    FDRM = "FDRM"
    NACK = "Nack"

    @property
    def is_control(self) -> bool:
        return self is not MessageKind.DATA


FLAGS = {
    MessageKind.DATA: DATA_BIT,
    MessageKind.FDQM: 0x00,
    MessageKind.FDRM: REPORT_BIT,
    MessageKind.NACK: NACK_BIT,
}


class Message(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: MessageKind
    sender: Address
    destination: Address
    payload: bytes = Field(b"", max_length=MAX_PAYLOAD)

    # simulation envelope, never serialized
    id: Optional[str] = None
    attempt: int = 0
    bits: Optional[int] = None
    is_ack: bool = False

    @property
    def size_bits(self) -> int:
        """Frame size accounted by links and buffers."""
        if self.bits is not None:
            return self.bits
        return 8 * (HEADER_LEN + len(self.payload))

    def on_wire(self) -> "Message":
        """The message as a receiver sees it after decoding."""
        return self.model_copy(update={"id": None, "attempt": 0, "bits": None, "is_ack": False})


def address(value: Union[str, bytes, int, IPv4Address]) -> Address:
    return value if isinstance(value, IPv4Address) else IPv4Address(value)


def classify_flag(flag: int) -> MessageKind:
    if flag & DATA_BIT:
        return MessageKind.DATA
    if flag & NACK_BIT:
        return MessageKind.NACK
    if flag & REPORT_BIT:
        return MessageKind.FDRM
    return MessageKind.FDQM


def encode(m: Message) -> bytes:
    if len(m.payload) > MAX_PAYLOAD:
        raise EncodingError(f"payload of {len(m.payload)} bytes exceeds {MAX_PAYLOAD}")
    if m.kind.is_control and m.payload:
        raise EncodingError(f"{m.kind.value} frames carry no payload")
    return HEADER.pack(FLAGS[m.kind], m.sender.packed, m.destination.packed) + bytes(m.payload)


def decode(data: bytes) -> Message:
    data = bytes(data)
    if len(data) < HEADER_LEN:
        raise TruncatedFrameError(f"frame of {len(data)} bytes is shorter than the {HEADER_LEN}-byte header")
    if len(data) > MAX_FRAME:
        raise OversizeFrameError(f"frame of {len(data)} bytes exceeds {MAX_FRAME}")

    flag, sender, destination = HEADER.unpack_from(data)
    kind = classify_flag(flag)
    payload = data[HEADER_LEN:]
    if kind.is_control and payload:
        raise MalformedControlError(f"{kind.value} frame carries {len(payload)} payload bytes")

    return Message(kind=kind, sender=IPv4Address(sender), destination=IPv4Address(destination), payload=payload)
