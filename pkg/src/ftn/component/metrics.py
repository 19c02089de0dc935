"""
Closed-form delay, latency, efficiency and throughput models for the
fault-free and faulty cases, used to cross-check engine runs.

All times here are seconds. Table output is rounded half-up to three places.
"""
import math
from dataclasses import asdict, dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Dict, Iterable, List, Tuple

import pandas as pd

from src.exception import MetricsDomainError

TABLE4_RATES = (100, 1000, 2000, 3000, 5000, 7500, 10000)
TABLE5_RATES = (100, 500, 1000, 1500, 2000, 2500, 3000, 3500)
TABLE6_FAULT_DURATIONS = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 4.5)

# cells published for the reference scenario that disagree with the models
PUBLISHED_ANOMALIES: Dict[Tuple[str, float], str] = {
    ("table4", 7500): "published delay 7.0 latency 14 efficiency 0.26",
    ("table6", 4.0): "published FTN latency 4.100",
}

_EPS = 1e-9


def round_half_up(value: float, places: int = 3) -> float:
    quantum = Decimal(1).scaleb(-places)
    return float(Decimal(str(value)).quantize(quantum, rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class Case1Row:
    frame_rate: float
    qd: float
    td: float
    pd: float
    delay: float
    latency: float
    efficiency: float


@dataclass(frozen=True)
class Case2Row:
    fault_duration: float
    conventional_timeout: float
    conventional_latency: float
    ftn_timeout: float
    ftn_latency: float


def latency_from_delay(delay: float) -> float:
    """Round trip: the frame one way plus its acknowledgement back."""
    return 2 * delay


def case1_row(
    frame_rate: float, frame_bits: int = 500, capacity: float = 1e6, hops: int = 6, pd_hop: float = 0.05
) -> Case1Row:
    """
    Fault-free delay model for one sender at a given frame rate.

    Propagation counts only up to 1000 fps, transmission from 2000 fps and
    queueing from 3000 fps; switching delay is zero.
    """
    if frame_rate <= 0:
        raise MetricsDomainError(f"frame_rate must be positive, got {frame_rate}")

    pd_ = hops * pd_hop if frame_rate <= 1000 else 0.0
    td = frame_rate * frame_bits / capacity if frame_rate >= 2000 else 0.0
    qd = 0.5 * frame_rate / 1000 if frame_rate >= 3000 else 0.0
    delay = qd + td + pd_
    latency = latency_from_delay(delay)
    useful = td if td > 0 else pd_
    efficiency = useful / latency if latency > 0 else 0.0
    return Case1Row(frame_rate, qd, td, pd_, delay, latency, efficiency)


def buffer_clear_timeout(latency: float) -> float:
    if latency <= 0:
        raise MetricsDomainError(f"latency must be positive, got {latency}")
    return 2 * latency


def data_rate(frame_rate: float, frame_bits: int = 500) -> float:
    return frame_rate * frame_bits


def throughput_curve(frame_rate: float, frame_bits: int = 500, capacity: float = 1e6) -> float:
    """Normalized goodput: offered load up to capacity, then falling as frames are lost."""
    if frame_rate < 0:
        raise MetricsDomainError(f"frame_rate must be non-negative, got {frame_rate}")
    r = data_rate(frame_rate, frame_bits) / capacity
    return r if r <= 1 else max(0.0, 2 - r)


def ftn_closed_form(
    fd: float, t_o: float = 1.0, arrival_offset: float = 0.05, cycle: float = 1.1, post_recovery: float = 0.6
) -> Tuple[float, float]:
    """
    (timeout, latency) of one FTN message sent at the fault onset.

    The first buffer deadline falls at arrival_offset + t_o; each NACK and
    retransmission cycle moves it by `cycle`. Latency is the fault duration
    plus recovery notice, forwarding and acknowledgement.
    """
    if fd < 0:
        raise MetricsDomainError(f"fault duration must be non-negative, got {fd}")
    first = arrival_offset + t_o
    k = max(0, math.ceil((fd - first) / cycle - _EPS))
    return first + cycle * k, fd + post_recovery


def conventional_closed_form(fd: float, rto: float = 1.2, rtt_healthy: float = 0.6) -> Tuple[float, float]:
    """(timeout, latency) when the sender retransmits every rto until the path is back."""
    if fd < 0:
        raise MetricsDomainError(f"fault duration must be non-negative, got {fd}")
    n = max(1, math.ceil(fd / rto - _EPS))
    timeout = n * rto
    return timeout, (timeout + rtt_healthy if fd > 0 else rtt_healthy)


def case2_closed_form_row(fd: float) -> Case2Row:
    conv_timeout, conv_latency = conventional_closed_form(fd)
    ftn_timeout, ftn_latency = ftn_closed_form(fd)
    return Case2Row(fd, conv_timeout, conv_latency, ftn_timeout, ftn_latency)


def _rounded(row) -> Dict[str, float]:
    return {k: round_half_up(v) if isinstance(v, float) else v for k, v in asdict(row).items()}


def table4_frame(rates: Iterable[float] = TABLE4_RATES) -> pd.DataFrame:
    rows = []
    for rate in rates:
        row = _rounded(case1_row(rate))
        row["note"] = PUBLISHED_ANOMALIES.get(("table4", rate), "")
        rows.append(row)
    return pd.DataFrame(rows, columns=["frame_rate", "qd", "td", "pd", "delay", "latency", "efficiency", "note"])


def table5_frame(rates: Iterable[float] = TABLE5_RATES, frame_bits: int = 500) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "frame_rate": rate,
                "data_rate": int(data_rate(rate, frame_bits)),
                "throughput": f"{round_half_up(throughput_curve(rate, frame_bits)):.2f}",
            }
            for rate in rates
        ]
    )


def table6_frame(rows: List[Case2Row]) -> pd.DataFrame:
    records = []
    for row in rows:
        record = _rounded(row)
        record["note"] = PUBLISHED_ANOMALIES.get(("table6", row.fault_duration), "")
        records.append(record)
    return pd.DataFrame(
        records,
        columns=[
            "fault_duration", "conventional_timeout", "conventional_latency", "ftn_timeout", "ftn_latency", "note",
        ],
    )
