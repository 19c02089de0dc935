"""
Command-line surface: run scenarios, reproduce the reference tables, size
buffers and emit figure series.

Exit codes: 0 success, 1 runtime error, 2 usage or validation error.
"""
import argparse
import sys
from pathlib import Path
from typing import List, Optional, Tuple

import pandas as pd

from src.exception import CustomException, FtnError, MetricsDomainError, ScenarioValidationError, TrafficDomainError
from src.ftn.component.protocol import Protocol
from src.ftn.config.settings import settings
from src.ftn.services.reproduction_service import ReproductionService
from src.ftn.services.simulation_service import SimulationService
from src.logging import logging as logger
from src.logging import set_quiet

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2

FLAG_OF = {
    "lambda": "--lambda",
    "t": "--t",
    "n": "--n",
    "N": "--devices",
    "X": "--lambda",
    "T": "--fault-ms",
    "K": "--faulty",
    "Y": "--safety-factor",
    "L": "--expected-loss",
    "packet_bits": "--packet-bits",
    "start": "--schedule",
    "end": "--schedule",
    "duration": "--schedule",
    "devices": "--schedule",
    "schedule": "--schedule",
}


def parse_schedule(text: str) -> List[Tuple[float, int]]:
    """'200:1,200:4' -> [(200.0, 1), (200.0, 4)]"""
    spans = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        try:
            duration, devices = part.split(":")
            spans.append((float(duration), int(devices)))
        except ValueError:
            raise TrafficDomainError("schedule", f"expected <duration_ms>:<devices>, got {part!r}")
    return spans


def _emit(df: pd.DataFrame, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(df.to_csv(index=False, lineterminator="\n"))
        return
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(out, index=False, lineterminator="\n")
    logger.info(f"Wrote {len(df)} rows to {out}")


def _scenario_path(name: str) -> Path:
    path = Path(name)
    if not path.exists() and not path.is_absolute() and (settings.SCENARIO_DIR / path).exists():
        return settings.SCENARIO_DIR / path
    return path


# commands

def cmd_run(args) -> int:
    summary = SimulationService().run_file(
        _scenario_path(args.scenario),
        protocol=Protocol(args.protocol) if args.protocol else None,
        out_dir=Path(args.out) if args.out else None,
        stamp=args.stamp,
    )
    df = pd.DataFrame(
        [(m.id, m.state.value, m.latency_ms, m.timeout_ms, m.transmissions) for m in summary.messages],
        columns=["id", "state", "latency_ms", "timeout_ms", "transmissions"],
    )
    sys.stdout.write(df.to_csv(index=False, lineterminator="\n"))
    agg = summary.aggregate
    logger.info(
        f"{summary.scenario} ({summary.protocol.value}): {agg.delivered}/{agg.injected} delivered, "
        f"{agg.nacked} nacked, {agg.lost} lost, mean latency {agg.mean_latency_ms} ms"
    )
    return EXIT_OK


def cmd_tables(args) -> int:
    _emit(ReproductionService().table(args.which), args.out)
    return EXIT_OK


def cmd_plot_data(args) -> int:
    _emit(ReproductionService().plot_data(args.figure), args.out)
    return EXIT_OK


def cmd_buffer(args) -> int:
    report = ReproductionService().buffer_report(
        lam=args.lam,
        t=args.t,
        n=args.n,
        devices=args.devices,
        schedule=parse_schedule(args.schedule) if args.schedule else None,
        fault_ms=args.fault_ms,
        faulty=args.faulty,
        safety_factor=args.safety_factor,
        packet_bits=args.packet_bits,
        expected_loss=args.expected_loss,
    )
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")

    lines = [
        f"X = {report.x:.6g}",
        f"log10(X) = {report.log10_x:.6f}",
        f"D (N={report.devices}) = {report.distribution:.6g}",
    ]
    for i in report.intervals:
        lines.append(f"L [{i.start_ms:g}, {i.end_ms:g}) ms x {i.devices} devices = {i.loss:.6g}")
    effective = sum((i.end_ms - i.start_ms) * i.devices for i in report.intervals)
    lines += [
        f"K*T = {effective:g} device*ms",
        f"L total = {report.total_loss:.6g}",
        f"B = {report.safety_factor:g} x {report.total_loss:.6g} x {report.packet_bits} = {report.buffer_bits} bits",
    ]
    sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_routes(args) -> int:
    _emit(ReproductionService().routes(args.router), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory (run) or file")
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS, help="only warnings on the console")
    common.add_argument("--stamp", action="store_true", default=argparse.SUPPRESS, help="add a timestamp to summaries")

    parser = argparse.ArgumentParser(prog="ftn-sim", description=settings.APP_NAME)
    parser.add_argument("--out", default=None)
    parser.add_argument("--quiet", action="store_true", default=False)
    parser.add_argument("--stamp", action="store_true", default=False)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="run one scenario file")
    run.add_argument("--scenario", required=True)
    run.add_argument("--protocol", choices=[p.value for p in Protocol], default=None)
    run.set_defaults(func=cmd_run)

    tables = sub.add_parser("tables", parents=[common], help="reproduce table 4, 5 or 6 as CSV")
    tables.add_argument("which", type=int, choices=[4, 5, 6])
    tables.set_defaults(func=cmd_tables)

    buffer = sub.add_parser("buffer", parents=[common], help="buffer sizing report")
    buffer.add_argument("--lambda", dest="lam", type=float, required=True, help="arrivals per ms")
    buffer.add_argument("--t", type=float, required=True, help="window in ms")
    buffer.add_argument("--n", type=int, required=True, help="packet count")
    buffer.add_argument("--devices", type=int, default=8)
    buffer.add_argument("--schedule", default=None, help="comma-separated <duration_ms>:<faulty devices>")
    buffer.add_argument("--fault-ms", type=float, default=200.0)
    buffer.add_argument("--faulty", type=int, default=1)
    buffer.add_argument("--safety-factor", type=float, default=None)
    buffer.add_argument("--packet-bits", type=int, default=None)
    buffer.add_argument("--expected-loss", type=float, default=None)
    buffer.set_defaults(func=cmd_buffer)

    plot = sub.add_parser("plot-data", parents=[common], help="x/y series for figure 4, 6 or 7")
    plot.add_argument("figure", type=int, choices=[4, 6, 7])
    plot.set_defaults(func=cmd_plot_data)

    routes = sub.add_parser("routes", parents=[common], help="routing table of one routing device")
    routes.add_argument("router")
    routes.set_defaults(func=cmd_routes)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    set_quiet(args.quiet)
    try:
        return args.func(args)
    except ScenarioValidationError as e:
        sys.stderr.write(f"{e}\n")
        return EXIT_USAGE
    except TrafficDomainError as e:
        sys.stderr.write(f"error: {FLAG_OF.get(e.parameter, e.parameter)}: {e.message}\n")
        return EXIT_USAGE
    except MetricsDomainError as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_USAGE
    except (FtnError, CustomException) as e:
        logger.error(f"{args.command} failed: {e}")
        sys.stderr.write(f"error: {e}\n")
        return EXIT_RUNTIME
    except Exception as e:
        logger.error(f"{args.command} failed unexpectedly")
        sys.stderr.write(f"error: {CustomException(e, sys)}\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
