import csv
import io
import json

import pytest

from d2dmac.cli import RESULT_COLUMNS, main, run_sweep, summarize
from d2dmac.config import ConfigError, ScenarioConfig, load_config, parse_config
from d2dmac.topology import builtin_fixture


def test_defaults_match_reference_setup():
    cfg = ScenarioConfig()
    assert cfg.deployment.ap_grid == 9 and cfg.deployment.wn_counts == [30]
    assert cfg.deployment.area_side == 50
    assert cfg.frame.slot_seconds == 5e-6 and cfg.frame.delay_threshold == 10_000
    assert cfg.frame.sim_length == 0.5
    assert cfg.radio.tx_power_mw == 0.1 and cfg.radio.bandwidth_hz == 1760e6
    assert cfg.traffic.packet_bits == 8000 and cfg.traffic.reference_rate == 2e9
    assert [p.name for p in cfg.protocols] == ["d2dmac", "fdmac_e", "rpdmac", "odmac"]


def test_config_errors_name_the_field():
    with pytest.raises(ConfigError, match=r"frame\.unknown"):
        parse_config({"frame": {"unknown": 1}})
    with pytest.raises(ConfigError, match=r"protocols\.0\.name"):
        parse_config({"protocols": [{"name": "csma"}]})
    with pytest.raises(ConfigError, match=r"deployment\.ap_grid"):
        parse_config({"deployment": {"ap_grid": 0}})


def test_overrides_use_dotted_keys(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"seeds": [1, 2]}))
    cfg = load_config(path, {"frame.sim_length": 0.01, "traffic.loads": [2.0]})
    assert cfg.seeds == [1, 2] and cfg.frame.sim_length == 0.01 and cfg.traffic.loads == [2.0]


def _sweep(tmp_path, name, extra=None):
    config = {"frame": {"sim_length": 0.005}, "seeds": [0, 1], "traffic": {"loads": [1.0, 4.0]},
              "output": {"results_csv": str(tmp_path / f"{name}.csv"),
                         "summary_csv": str(tmp_path / f"{name}_summary.csv")}}
    config.update(extra or {})
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(config))
    assert main(["sweep", "--config", str(path)]) == 0
    return (tmp_path / f"{name}.csv").read_text(), (tmp_path / f"{name}_summary.csv").read_text()


def test_sweep_is_byte_identical_and_complete(tmp_path):
    a, sa = _sweep(tmp_path, "a")
    b, sb = _sweep(tmp_path, "b", {"workers": 2})
    assert a == b and sa == sb
    rows = list(csv.DictReader(io.StringIO(a)))
    assert list(rows[0]) == RESULT_COLUMNS
    assert len(rows) == 4 * 2 * 2
    assert {r["protocol"] for r in rows} == {"d2dmac", "fdmac_e", "rpdmac", "odmac"}
    assert all(r["avg_delay_slots"] and r["network_throughput"] for r in rows)
    summary = list(csv.DictReader(io.StringIO(sa)))
    assert len(summary) == 8 and all(s["seeds"] == "2" for s in summary)


def test_empty_seed_list_gives_header_only(tmp_path):
    a, s = _sweep(tmp_path, "e", {"seeds": []})
    assert a == ",".join(RESULT_COLUMNS) + "\n"


def test_summary_means():
    rows = [{"protocol": "d2dmac", "beta": 2.0, "load": 1.0, "traffic_mode": "poisson", "wn_count": 30,
             "seed": s, "avg_delay_slots": v, "network_throughput": 10 * s, "flow_delay_bw": None,
             "flow_delay_in": 1.0, "flow_tp_bw": 1.0, "flow_tp_in": 2.0} for s, v in [(1, 3.0), (3, None)]]
    line = summarize(rows).splitlines()[1].split(",")
    assert line[5] == "2" and line[6] == "3.000000" and line[7] == "20.000000" and line[8] == ""


def test_sweep_rejects_bad_override(capsys):
    assert main(["sweep", "--set", "frame.bogus=1"]) == 2
    assert "frame.bogus" in capsys.readouterr().err


def test_golden_all_passes(capsys):
    assert main(["golden"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("[PASS]") >= 15


def test_export_lp_matches_golden(tmp_path):
    out = tmp_path / "x.lp"
    assert main(["export", "--fixture", "sec3-example", "-o", str(out)]) == 0
    assert out.read_text() == builtin_fixture("sec3_example").with_suffix(".lp").read_text()
    assert main(["export", "--fixture", "empty", "-o", str(out)]) == 0
    assert "delta_1" in out.read_text()


def test_export_fixture_round_trip(tmp_path):
    out = tmp_path / "f.json"
    assert main(["export", "--fixture", "sec3-example", "--format", "fixture", "-o", str(out)]) == 0
    assert out.read_text() == builtin_fixture("sec3_example").read_text()
    again = tmp_path / "g.json"
    assert main(["export", "--fixture", str(out), "--format", "fixture", "-o", str(again)]) == 0
    assert again.read_text() == out.read_text()


def test_radius_csv(tmp_path):
    out = tmp_path / "r.csv"
    assert main(["radius", "--max-f", "6", "-o", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert list(rows[0]) == ["F", "radius_m"] and len(rows) == 6
    radii = [float(r["radius_m"]) for r in rows]
    assert radii == sorted(radii) and len(set(radii)) == 6
    assert radii[3] == pytest.approx(2 * radii[0])


def test_optimal_command(capsys):
    assert main(["optimal", "--instance", "sec3-example"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("optimum=9 proven=yes")
    assert "1:ordinary" in out and "total=9" in out
