from enum import Enum
from typing import List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field

from src.ftn.component.engine import FaultSpec, TrafficSpec
from src.ftn.component.protocol import Protocol
from src.ftn.component.topology import NodeKind
from src.ftn.component.wire import Address


class MessageState(str, Enum):
    DELIVERED = "Delivered"
    NACKED = "Nacked"
    LOST = "Lost"
    PENDING = "Pending"


# scenario files

class NodeSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    kind: NodeKind
    address: Address


class LinkSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    a: str
    b: str
    delay_ms: Optional[int] = Field(None, gt=0)
    capacity_bps: Optional[int] = Field(None, gt=0)


class TopologySpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    nodes: List[NodeSpec]
    links: List[LinkSpec]


class ParamsSpec(BaseModel):
    """Per-scenario overrides of params.yaml."""

    model_config = ConfigDict(extra="forbid")

    qm_period_ms: Optional[int] = Field(None, gt=0)
    buffer_timeout_ms: Optional[int] = Field(None, gt=0)
    buffer_capacity_bits: Optional[int] = Field(None, gt=0)
    retransmit_timeout_ms: Optional[int] = Field(None, gt=0)
    delay_ms: Optional[int] = Field(None, gt=0)
    capacity_bps: Optional[int] = Field(None, gt=0)
    switching_delay_ms: Optional[int] = Field(None, ge=0)
    horizon_ms: Optional[int] = Field(None, gt=0)
    hosts_per_switch: Optional[int] = Field(None, ge=1)


class OutputSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    trace: str = "trace.csv"
    summary: str = "summary.json"


class ScenarioFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: Optional[str] = None
    topology: Union[Literal["reference"], TopologySpec] = "reference"
    traffic: List[TrafficSpec] = Field(default_factory=list)
    faults: List[FaultSpec] = Field(default_factory=list)
    protocol: Protocol = Protocol.FTN
    params: ParamsSpec = Field(default_factory=ParamsSpec)
    ack_enabled: bool = True
    output: OutputSpec = Field(default_factory=OutputSpec)


# run results

class MessageRecord(BaseModel):
    id: str
    sender: str
    destination: str
    cast: str
    injected_ms: int
    state: MessageState
    delivered_ms: Optional[int] = None
    acked_ms: Optional[int] = None
    latency_ms: Optional[int] = None
    transmissions: int
    timeout_ms: Optional[int] = Field(None, description="last buffer deadline (FTN) or last retransmission (conventional)")


class RunAggregate(BaseModel):
    injected: int
    delivered: int
    nacked: int
    lost: int
    pending: int
    mean_latency_ms: Optional[float] = None
    max_latency_ms: Optional[int] = None
    throughput_bps: float


class RunSummary(BaseModel):
    scenario: str
    protocol: Protocol
    end_ms: int
    truncated: bool
    messages: List[MessageRecord]
    aggregate: RunAggregate
    generated_at: Optional[str] = None


# buffer sizing

class IntervalLoss(BaseModel):
    start_ms: float
    end_ms: float
    devices: int
    loss: float


class BufferReport(BaseModel):
    lam: float = Field(..., description="mean arrivals per ms")
    t: float
    n: int
    devices: int
    x: float
    log10_x: float
    distribution: float
    intervals: List[IntervalLoss]
    total_loss: float
    safety_factor: float
    packet_bits: int
    buffer_bits: int
