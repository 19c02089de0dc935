"""
Poisson traffic distribution, expected packet loss and buffer sizing.

Rates are in packets per millisecond and durations in milliseconds, so
lambda * t is the expected packet count of one device over the window.
"""
import math
from dataclasses import dataclass
from numbers import Integral, Real
from typing import Any, Dict, Iterable, List, Tuple

import numpy as np
from scipy.special import gammaln

from src.exception import ScheduleOverlapError, TrafficDomainError

LN10 = math.log(10.0)


def _non_negative(name: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, Real):
        raise TrafficDomainError(name, f"expected a number, got {value!r}")
    if math.isnan(value) or math.isinf(value):
        raise TrafficDomainError(name, f"must be finite, got {value}")
    if value < 0:
        raise TrafficDomainError(name, f"must be non-negative, got {value}")
    return float(value)


def _count(name: str, value: Any, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, Integral):
        if isinstance(value, Real) and float(value).is_integer():
            value = int(value)
        else:
            raise TrafficDomainError(name, f"expected an integer, got {value!r}")
    if value < minimum:
        raise TrafficDomainError(name, f"must be >= {minimum}, got {value}")
    return int(value)


@dataclass(frozen=True)
class PoissonParams:
    lam: float
    t: float
    n: int
    N: int = 1

    def __post_init__(self):
        object.__setattr__(self, "lam", _non_negative("lambda", self.lam))
        object.__setattr__(self, "t", _non_negative("t", self.t))
        object.__setattr__(self, "n", _count("n", self.n))
        object.__setattr__(self, "N", _count("N", self.N, minimum=1))

    @property
    def mean(self) -> float:
        return self.lam * self.t


@dataclass(frozen=True)
class FaultInterval:
    start: float
    end: float
    devices: int

    def __post_init__(self):
        _non_negative("start", self.start)
        _non_negative("end", self.end)
        object.__setattr__(self, "devices", _count("devices", self.devices))
        if self.end <= self.start:
            raise TrafficDomainError("end", f"interval end {self.end} must follow its start {self.start}")

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class BufferSpec:
    safety_factor: float
    expected_loss: float
    packet_bits: int

    @classmethod
    def from_params(cls, group: Dict[str, Any]) -> "BufferSpec":
        return cls(group["safety_factor"], group["expected_loss"], group["packet_bits"])

    @property
    def bits(self) -> int:
        return buffer_size(self.safety_factor, self.expected_loss, self.packet_bits)


def poisson_log_pmf(lam: float, t: float, n: int) -> float:
    """Natural log of (lambda*t)^n e^(-lambda*t) / n!; -inf where the probability is exactly zero."""
    p = PoissonParams(lam, t, n)
    mu = p.mean
    if mu == 0.0:
        return 0.0 if p.n == 0 else -math.inf
    return float(p.n * np.log(mu) - mu - gammaln(p.n + 1))


def poisson_log10_pmf(lam: float, t: float, n: int) -> float:
    return poisson_log_pmf(lam, t, n) / LN10


def poisson_pmf(lam: float, t: float, n: int) -> float:
    return math.exp(poisson_log_pmf(lam, t, n))


def network_distribution(lam: float, t: float, n: int, N: int) -> float:
    """Expected distribution over N identical devices: N times the single-device probability."""
    p = PoissonParams(lam, t, n, N)
    return p.N * poisson_pmf(p.lam, p.t, p.n)


def loss_single(X: float, T: float) -> float:
    return _non_negative("X", X) * _non_negative("T", T)


def loss_multi(X: float, T: float, K: int) -> float:
    return loss_single(X, T) * _count("K", K)


def check_schedule(schedule: Iterable[FaultInterval]) -> List[FaultInterval]:
    ordered = sorted(schedule, key=lambda i: (i.start, i.end))
    for before, after in zip(ordered, ordered[1:]):
        if after.start < before.end:
            raise ScheduleOverlapError(
                f"interval [{after.start}, {after.end}) overlaps [{before.start}, {before.end})"
            )
    return ordered


def schedule_losses(X: float, schedule: Iterable[FaultInterval]) -> List[float]:
    """Expected loss of every interval, in time order."""
    return [loss_multi(X, interval.duration, interval.devices) for interval in check_schedule(schedule)]


def loss_schedule(X: float, schedule: Iterable[FaultInterval]) -> float:
    _non_negative("X", X)
    return float(sum(schedule_losses(X, schedule)))


def schedule_from_spans(spans: Iterable[Tuple[float, int]], start: float = 0.0) -> List[FaultInterval]:
    """Back-to-back intervals from (duration, faulty device count) pairs."""
    intervals = []
    for duration, devices in spans:
        end = start + _non_negative("duration", duration)
        intervals.append(FaultInterval(start, end, devices))
        start = end
    return intervals


def buffer_size(Y: float, L: float, packet_bits: float) -> int:
    """B = Y * L * packet size, rounded up to whole bits."""
    product = _non_negative("Y", Y) * _non_negative("L", L) * _non_negative("packet_bits", packet_bits)
    # float products like 3 * 0.1 * 10 must not round up past the exact value
    return int(math.ceil(round(product, 9)))
