from typing import Optional, Sequence, Tuple

import pandas as pd

from src.ftn.component import metrics, traffic
from src.ftn.component.protocol import Protocol
from src.ftn.component.topology import build_reference_topology
from src.ftn.schemas import BufferReport, IntervalLoss, MessageRecord
from src.ftn.services.simulation_service import SimulationService
from src.logging import logging as logger

FIGURE7_FAULT_DURATIONS = tuple(k / 2 for k in range(1, 10))
FIGURE6_RATES = tuple(range(100, 4001, 100))


def _seconds(ms: Optional[int]) -> float:
    return ms / 1000 if ms is not None else float("nan")


def to_ms(seconds: float) -> int:
    return int(round(seconds * 1000))


class ReproductionService:
    """
    Reference tables and figure series
    Fault-free rows come from the closed-form models, faulty-case rows from engine runs
    """

    def __init__(self, simulation: Optional[SimulationService] = None):
        self.simulation = simulation or SimulationService()
        logger.info("ReproductionService initialized")

    def case2_message(self, fault_s: float, protocol: Protocol) -> MessageRecord:
        """
        Run the single-message faulty case once

        Args:
            fault_s: How long R3 stays down, in seconds
            protocol: FTN or conventional

        Returns:
            The summary record of the one GS1 -> SW5-2 message
        """
        scenario = self.simulation.reference_case2_scenario(to_ms(fault_s), protocol)
        result = self.simulation.run(scenario)
        summary = self.simulation.summarize(result, f"case2-{protocol.value}-{fault_s}")
        return summary.messages[0]

    def case2_row(self, fault_s: float) -> metrics.Case2Row:
        """
        One row of the faulty-case table, both protocols, in seconds

        Args:
            fault_s: Fault duration in seconds

        Returns:
            Timeout and latency for the conventional and the FTN run
        """
        conv = self.case2_message(fault_s, Protocol.CONVENTIONAL)
        ftn = self.case2_message(fault_s, Protocol.FTN)
        return metrics.Case2Row(
            fault_duration=float(fault_s),
            conventional_timeout=_seconds(conv.timeout_ms),
            conventional_latency=_seconds(conv.latency_ms),
            ftn_timeout=_seconds(ftn.timeout_ms),
            ftn_latency=_seconds(ftn.latency_ms),
        )

    def table(self, which: int) -> pd.DataFrame:
        """
        Reproduce table 4, 5 or 6

        Args:
            which: Table number

        Returns:
            DataFrame with one row per frame rate (4, 5) or fault duration (6)
        """
        logger.info(f"Reproducing table {which}")
        if which == 4:
            return metrics.table4_frame()
        if which == 5:
            return metrics.table5_frame()
        if which == 6:
            return metrics.table6_frame([self.case2_row(fd) for fd in metrics.TABLE6_FAULT_DURATIONS])
        raise ValueError(f"no table {which}; choose 4, 5 or 6")

    def plot_data(self, figure: int) -> pd.DataFrame:
        """
        x/y series behind figure 4 (delay and latency), 6 (throughput) or 7 (latency under faults)

        Args:
            figure: Figure number

        Returns:
            DataFrame whose first column is the x axis
        """
        logger.info(f"Producing series for figure {figure}")
        if figure == 4:
            rows = [metrics.case1_row(rate) for rate in metrics.TABLE4_RATES]
            return pd.DataFrame(
                {
                    "frame_rate": [r.frame_rate for r in rows],
                    "delay": [metrics.round_half_up(r.delay) for r in rows],
                    "latency": [metrics.round_half_up(r.latency) for r in rows],
                }
            )
        if figure == 6:
            return pd.DataFrame(
                {
                    "frame_rate": list(FIGURE6_RATES),
                    "throughput": [metrics.round_half_up(metrics.throughput_curve(r)) for r in FIGURE6_RATES],
                }
            )
        if figure == 7:
            rows = [self.case2_row(fd) for fd in FIGURE7_FAULT_DURATIONS]
            return pd.DataFrame(
                {
                    "fault_duration": [r.fault_duration for r in rows],
                    "conventional_latency": [metrics.round_half_up(r.conventional_latency) for r in rows],
                    "ftn_latency": [metrics.round_half_up(r.ftn_latency) for r in rows],
                }
            )
        raise ValueError(f"no figure {figure}; choose 4, 6 or 7")

    def buffer_report(
        self,
        lam: float,
        t: float,
        n: int,
        devices: int = 8,
        schedule: Optional[Sequence[Tuple[float, int]]] = None,
        fault_ms: float = 200.0,
        faulty: int = 1,
        safety_factor: Optional[float] = None,
        packet_bits: Optional[int] = None,
        expected_loss: Optional[float] = None,
    ) -> BufferReport:
        """
        Buffer sizing report

        Args:
            lam: Mean arrivals per ms at one device
            t: Observation window in ms
            n: Packet count whose probability X is reported
            devices: Routing devices N in the network-wide distribution
            schedule: Back-to-back (duration_ms, faulty devices) spans; overrides fault_ms/faulty
            fault_ms: Length of the single fault window T
            faulty: Faulty devices K during that window
            safety_factor: Y, defaults to params.yaml
            packet_bits: Packet size, defaults to params.yaml
            expected_loss: Use this L instead of the computed loss

        Returns:
            X, D, the loss per interval and in total, and B = Y * L * packet size
        """
        defaults = self.simulation.params["buffer"]
        safety_factor = defaults["safety_factor"] if safety_factor is None else safety_factor
        packet_bits = defaults["packet_bits"] if packet_bits is None else packet_bits

        # Step 1: per-device probability of n arrivals
        x = traffic.poisson_pmf(lam, t, n)

        # Step 2: expected loss over the fault schedule or the single T x K window
        if schedule:
            intervals = traffic.schedule_from_spans(schedule)
            losses = traffic.schedule_losses(x, intervals)
        else:
            loss = traffic.loss_multi(x, fault_ms, faulty)
            intervals = [traffic.FaultInterval(0.0, fault_ms, faulty)] if fault_ms > 0 else []
            losses = [loss] if intervals else []
        total = float(sum(losses)) if expected_loss is None else expected_loss
        logger.info(f"Buffer report: X={x:.6g}, L={total:.6g} over {len(intervals)} intervals")

        # Step 3: size the buffer
        return BufferReport(
            lam=lam,
            t=t,
            n=n,
            devices=devices,
            x=x,
            log10_x=traffic.poisson_log10_pmf(lam, t, n),
            distribution=traffic.network_distribution(lam, t, n, devices),
            intervals=[
                IntervalLoss(start_ms=i.start, end_ms=i.end, devices=i.devices, loss=loss)
                for i, loss in zip(intervals, losses)
            ],
            total_loss=total,
            safety_factor=safety_factor,
            packet_bits=packet_bits,
            buffer_bits=traffic.buffer_size(safety_factor, total, packet_bits),
        )

    def routes(self, router: str, hosts_per_switch: Optional[int] = None) -> pd.DataFrame:
        """
        Routing table of one routing device in the reference network

        Args:
            router: GS1 or R1..R7
            hosts_per_switch: Hosts under each switch, defaults to params.yaml

        Returns:
            One row per reachable node address
        """
        hosts = hosts_per_switch or self.simulation.params["topology"]["hosts_per_switch"]
        return build_reference_topology(hosts).table(router).to_frame()
