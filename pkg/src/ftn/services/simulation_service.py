import json
import sys
from collections import Counter
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import pandas as pd
from pydantic import ValidationError

from src.exception import CustomException, FtnError, ScenarioValidationError
from src.ftn.component import engine
from src.ftn.component.protocol import FtnParams, Protocol
from src.ftn.component.topology import Link, Node, Topology, build_reference_topology, derive_routing_tables
from src.ftn.component.traffic import BufferSpec
from src.ftn.config.settings import load_params, settings
from src.ftn.schemas import (
    MessageRecord,
    MessageState,
    RunAggregate,
    RunSummary,
    ScenarioFile,
    TopologySpec,
)
from src.logging import logging as logger

REFERENCE_SENDER = "GS1"
REFERENCE_RECEIVER = "SW5-2"
REFERENCE_FAULTY = "R3"


def _error_path(loc) -> str:
    return ".".join(str(p) for p in loc) or "$"


class SimulationService:
    """
    Scenario files in, trace CSV and run summary out.

    Numeric defaults come from params.yaml; a scenario's `params` section
    overrides them for that run only.
    """

    def __init__(self, params_path: Optional[Path] = None):
        self.params = load_params(params_path)
        logger.info("SimulationService initialized")

    # loading

    def load(self, path: Union[str, Path]) -> ScenarioFile:
        """
        Read and validate a scenario JSON file

        Args:
            path: Scenario file

        Returns:
            The parsed scenario file

        Raises:
            ScenarioValidationError: missing file, bad JSON or schema violations
        """
        path = Path(path)
        source = str(path)
        try:
            with open(path, "r", encoding="utf-8") as f:
                raw = json.load(f)
        except FileNotFoundError:
            raise ScenarioValidationError([f"$: file not found: {path}"], source)
        except json.JSONDecodeError as e:
            raise ScenarioValidationError([f"$: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}"], source)
        return self.parse(raw, source)

    def parse(self, raw: dict, source: Optional[str] = None) -> ScenarioFile:
        """Schema-check an already decoded scenario; every violation is reported at once."""
        try:
            return ScenarioFile.model_validate(raw)
        except ValidationError as e:
            violations = [f"{_error_path(err['loc'])}: {err['msg']}" for err in e.errors()]
            raise ScenarioValidationError(violations, source)

    # building

    def _topology(self, file: ScenarioFile, link: Dict[str, int], hosts_per_switch: int) -> Topology:
        if file.topology == "reference":
            return build_reference_topology(hosts_per_switch, link["delay_ms"], link["capacity_bps"])

        spec: TopologySpec = file.topology
        violations = []
        counts = Counter(n.name for n in spec.nodes)
        violations += [f"topology.nodes: duplicate node name {name}" for name, c in counts.items() if c > 1]
        names = set(counts)
        for i, l in enumerate(spec.links):
            for end in (l.a, l.b):
                if end not in names:
                    violations.append(f"topology.links.{i}: unknown node {end}")
        if violations:
            raise ScenarioValidationError(violations)

        nodes = [Node(index=i, name=n.name, kind=n.kind, address=n.address) for i, n in enumerate(spec.nodes)]
        links = [
            Link(
                a=l.a,
                b=l.b,
                delay_ms=l.delay_ms or link["delay_ms"],
                capacity_bps=l.capacity_bps or link["capacity_bps"],
            )
            for l in spec.links
        ]
        topology = Topology(nodes, links)
        problems = topology.validate()
        if problems:
            raise ScenarioValidationError([f"topology: {p}" for p in problems])
        return derive_routing_tables(topology)

    def build(self, file: ScenarioFile, protocol: Optional[Protocol] = None) -> engine.Scenario:
        """
        Turn a scenario file into a runnable scenario

        Args:
            file: Parsed scenario file
            protocol: Overrides the protocol named in the file

        Returns:
            Scenario with params.yaml defaults merged under the file's overrides
        """
        # Step 1: merge numeric defaults with the file's params section
        overrides = file.params.model_dump(exclude_none=True)
        merged = {k: v for group in self.params.values() for k, v in group.items()}
        merged.update(overrides)

        # Step 2: topology and per-flow defaults
        capacity = overrides.get("buffer_capacity_bits") or BufferSpec.from_params(self.params["buffer"]).bits
        topology = self._topology(file, merged, merged["hosts_per_switch"])
        traffic = [
            t.model_copy(update={k: merged[k] for k in ("frame_bits", "frame_rate") if k not in t.model_fields_set})
            for t in file.traffic
        ]
        # Step 3: assemble and cross-check against the topology
        scenario = engine.Scenario(
            topology=topology,
            traffic=traffic,
            faults=file.faults,
            protocol=protocol or file.protocol,
            params=FtnParams(
                qm_period_ms=merged["qm_period_ms"],
                buffer_timeout_ms=merged["buffer_timeout_ms"],
                buffer_capacity_bits=capacity,
            ),
            retransmit_timeout_ms=merged["retransmit_timeout_ms"],
            ack_enabled=file.ack_enabled,
            delay=engine.DelayModel(switching_delay_ms=merged["switching_delay_ms"]),
            horizon_ms=merged["horizon_ms"],
        )
        self.validate(scenario)
        return scenario

    def validate(self, scenario: engine.Scenario) -> None:
        violations = engine.validate_scenario(scenario)
        if violations:
            raise ScenarioValidationError(violations)

    def reference_case2_scenario(self, fault_ms: int, protocol: Protocol = Protocol.FTN, start_ms: int = 0) -> engine.Scenario:
        """One GS1 -> SW5-2 message at the moment R3 fails for fault_ms."""
        file = ScenarioFile(
            name=f"case2-{fault_ms}ms",
            traffic=[engine.TrafficSpec(sender=REFERENCE_SENDER, destination=REFERENCE_RECEIVER, start_ms=start_ms)],
            faults=[engine.FaultSpec(node=REFERENCE_FAULTY, start_ms=start_ms, duration_ms=fault_ms)],
            protocol=protocol,
        )
        return self.build(file)

    # running

    def run(self, scenario: engine.Scenario) -> engine.RunResult:
        """Run one scenario to quiescence or its horizon."""
        return engine.run(scenario)

    def summarize(self, result: engine.RunResult, name: str = "scenario") -> RunSummary:
        """
        Per-message records and run aggregate

        Args:
            result: Finished run
            name: Scenario name written into the summary

        Returns:
            RunSummary; timeout_ms is the last retransmission (conventional) or the last buffer deadline (FTN)
        """
        # Step 1: one record per injected message
        ack = result.scenario.ack_enabled
        conventional = result.scenario.protocol is Protocol.CONVENTIONAL
        records: List[MessageRecord] = []
        for outcome in result.outcomes.values():
            done_at = outcome.acked_at if ack else outcome.delivered_at
            if outcome.delivered_at is not None:
                state = MessageState.DELIVERED
            elif outcome.last_terminal in ("Nacked", "Lost"):
                state = MessageState(outcome.last_terminal)
            else:
                state = MessageState.PENDING
            records.append(
                MessageRecord(
                    id=outcome.id,
                    sender=outcome.sender,
                    destination=outcome.destination,
                    cast=outcome.cast.value,
                    injected_ms=outcome.first_sent,
                    state=state,
                    delivered_ms=outcome.delivered_at,
                    acked_ms=outcome.acked_at,
                    latency_ms=done_at - outcome.first_sent if done_at is not None else None,
                    transmissions=outcome.transmissions,
                    timeout_ms=outcome.last_retransmit_at if conventional else outcome.last_buffer_deadline,
                )
            )

        # Step 2: aggregate counts, latency and throughput
        df = pd.DataFrame(
            [(r.state.value, r.latency_ms, o.bits) for r, o in zip(records, result.outcomes.values())],
            columns=["state", "latency_ms", "bits"],
        )
        states = df["state"].value_counts() if len(df) else pd.Series(dtype=int)
        latencies = df["latency_ms"].dropna() if len(df) else pd.Series(dtype=float)
        delivered_bits = df.loc[df["state"] == MessageState.DELIVERED.value, "bits"].sum() if len(df) else 0

        aggregate = RunAggregate(
            injected=len(records),
            delivered=int(states.get(MessageState.DELIVERED.value, 0)),
            nacked=int(states.get(MessageState.NACKED.value, 0)),
            lost=int(states.get(MessageState.LOST.value, 0)),
            pending=int(states.get(MessageState.PENDING.value, 0)),
            mean_latency_ms=round(float(latencies.mean()), 3) if len(latencies) else None,
            max_latency_ms=int(latencies.max()) if len(latencies) else None,
            throughput_bps=round(float(delivered_bits) * 1000 / result.end_ms, 3) if result.end_ms else 0.0,
        )
        return RunSummary(
            scenario=name,
            protocol=result.scenario.protocol,
            end_ms=result.end_ms,
            truncated=result.truncated,
            messages=records,
            aggregate=aggregate,
        )

    def write(
        self, result: engine.RunResult, summary: RunSummary, out_dir: Path, file: Optional[ScenarioFile] = None,
        stamp: bool = False,
    ) -> Tuple[Path, Path]:
        """
        Write the trace CSV and the summary JSON

        Args:
            result: Finished run
            summary: Its summary
            out_dir: Output directory, created when missing
            file: Scenario file whose output section names the two files
            stamp: Add generated_at to the summary

        Returns:
            Paths of the trace and the summary
        """
        output = (file or ScenarioFile()).output
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        trace_path = out_dir / output.trace
        summary_path = out_dir / output.summary

        if stamp:
            summary = summary.model_copy(update={"generated_at": datetime.now().strftime("%Y-%m-%dT%H:%M:%S")})
        result.trace.to_csv(trace_path)
        with open(summary_path, "w", encoding="utf-8", newline="\n") as f:
            f.write(summary.model_dump_json(indent=2, exclude={"generated_at"} if not stamp else None))
            f.write("\n")
        logger.info(f"Trace written to {trace_path}, summary to {summary_path}")
        return trace_path, summary_path

    def run_file(
        self,
        path: Union[str, Path],
        protocol: Optional[Protocol] = None,
        out_dir: Optional[Path] = None,
        stamp: bool = False,
    ) -> RunSummary:
        """
        Load, validate, run and write one scenario file

        Args:
            path: Scenario file
            protocol: Overrides the protocol named in the file
            out_dir: Output directory, defaults to settings.OUTPUT_DIR
            stamp: Add generated_at to the summary

        Returns:
            The run summary; nothing is written when validation fails
        """
        logger.info(f"Running scenario file {path}")

        # Step 1: load and validate
        file = self.load(path)
        try:
            scenario = self.build(file, protocol)
        except ScenarioValidationError as e:
            raise ScenarioValidationError(e.violations, str(path))

        # Step 2: run, summarize and write
        try:
            result = self.run(scenario)
            summary = self.summarize(result, file.name or Path(path).stem)
            self.write(result, summary, out_dir or settings.OUTPUT_DIR, file, stamp)
            return summary
        except FtnError:
            raise
        except Exception as e:
            logger.error(f"Scenario run failed for {path}")
            raise CustomException(e, sys)
