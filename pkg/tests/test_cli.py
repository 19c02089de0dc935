import json

import pytest

from src.ftn.cli import EXIT_OK, EXIT_USAGE, main, parse_schedule
from src.ftn.config.settings import settings

CASE2 = str(settings.SCENARIO_DIR / "reference_case2.json")


def test_table5(capsys):
    assert main(["tables", "5"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.splitlines()[0] == "frame_rate,data_rate,throughput"
    assert "2000,1000000,1.00" in out


def test_table4_to_file(tmp_path):
    target = tmp_path / "t4.csv"
    assert main(["tables", "4", "--out", str(target)]) == EXIT_OK
    assert target.read_text().splitlines()[0].startswith("frame_rate,qd,td,pd,delay,latency,efficiency")


def test_unknown_table_is_usage_error():
    with pytest.raises(SystemExit) as err:
        main(["tables", "7"])
    assert err.value.code == EXIT_USAGE


def test_run_writes_outputs(tmp_path, capsys):
    assert main(["run", "--scenario", CASE2, "--out", str(tmp_path), "--quiet"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "id,state,latency_ms,timeout_ms,transmissions"
    assert lines[1] == "m1,Delivered,1100,1050,1"
    assert (tmp_path / "case2_trace.csv").exists()
    assert json.loads((tmp_path / "case2_summary.json").read_text())["aggregate"]["delivered"] == 1


def test_run_conventional(tmp_path, capsys):
    assert main(["run", "--scenario", CASE2, "--protocol", "conventional", "--out", str(tmp_path)]) == EXIT_OK
    assert "m1,Delivered,1800,1200,2" in capsys.readouterr().out


def test_run_invalid_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"traffic": [{"sender": "GS1"}]}')
    assert main(["run", "--scenario", str(bad), "--out", str(tmp_path / "out")]) == EXIT_USAGE
    assert "traffic.0.destination" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_buffer_single_window(capsys):
    assert main(["buffer", "--lambda", "2", "--t", "1", "--n", "2", "--devices", "1", "--fault-ms", "20"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "X = 0.270671" in out
    assert "K*T = 20 device*ms" in out


def test_buffer_schedule(capsys, tmp_path):
    target = tmp_path / "buffer.json"
    argv = ["buffer", "--lambda", "0.5", "--t", "1", "--n", "1", "--schedule", "200:1,200:4,200:2,200:3,200:4",
            "--out", str(target)]
    assert main(argv) == EXIT_OK
    assert "K*T = 2800 device*ms" in capsys.readouterr().out
    assert len(json.loads(target.read_text())["intervals"]) == 5


def test_buffer_negative_lambda(capsys):
    assert main(["buffer", "--lambda", "-1", "--t", "1", "--n", "2"]) == EXIT_USAGE
    assert "--lambda" in capsys.readouterr().err


def test_buffer_bad_schedule(capsys):
    assert main(["buffer", "--lambda", "1", "--t", "1", "--n", "1", "--schedule", "200-1"]) == EXIT_USAGE
    assert "--schedule" in capsys.readouterr().err


def test_parse_schedule():
    assert parse_schedule("200:1, 100:3,") == [(200.0, 1), (100.0, 3)]


def test_routes(capsys):
    assert main(["routes", "R1"]) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "Network Address,Next Hop,Interface,Connection Type,Connection Status"
    assert len(out) == 28


def test_unknown_router_is_runtime_error(capsys):
    assert main(["routes", "R9"]) == 1
    assert "R9" in capsys.readouterr().err


def test_table6_conventional_column(capsys):
    assert main(["tables", "6"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    header = lines[0].split(",")
    col = header.index("conventional_latency")
    assert [float(line.split(",")[col]) for line in lines[1:]] == [1.8, 1.8, 3.0, 3.0, 4.2, 4.2, 5.4, 5.4]


def test_plot_data_throughput(capsys):
    assert main(["plot-data", "6"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "frame_rate,throughput"
    assert "2000,1.0" in lines
    assert len(lines) == 41
