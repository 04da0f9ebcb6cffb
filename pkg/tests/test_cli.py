"""End-to-end CLI tests over the argparse surface."""

import json

import pytest

from urllcsim.cli import UsageError, main, parse_range, parse_si

SCENARIO = {
    "num_cells": 4,
    "actuators_per_cell": 3,
    "message_bits": 160,
    "cycle_time": 1e-3,
    "bandwidth": 12e6,
    "tx_psd_dbm_hz": -106.0,
    "noise_psd_dbm_hz": -169.0,
    "carrier_freq_hz": 3e9,
    "cell_side_m": 10.0,
    "cell_separation_m": 10.0,
    "min_distance_m": 1.0,
    "rician_k_factor_db": 4.7,
    "shadow_std_los_db": 3.0,
    "shadow_std_nlos_db": 4.0,
    "layout_kind": "dense_grid",
}


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(SCENARIO))
    return path


def test_parse_si():
    assert parse_si("30M") == 30e6
    assert parse_si("2.5G") == 2.5e9
    assert parse_si("500k") == 5e5
    assert parse_si("42") == 42.0
    with pytest.raises(UsageError):
        parse_si("12Q")


def test_parse_range():
    assert parse_range("0:30:10") == [0.0, 10.0, 20.0, 30.0]
    assert parse_range("1,2,5") == [1.0, 2.0, 5.0]
    assert parse_range("14M:18M:2M") == [14e6, 16e6, 18e6]
    with pytest.raises(UsageError):
        parse_range("1:2")
    with pytest.raises(UsageError):
        parse_range("5:1:-1")


def test_analytic_row_count(tmp_path):
    rc = main([
        "analytic", "--protocol", "occupy", "--C", "1", "--snr", "0:30:1",
        "--target", "1e-9", "--out", str(tmp_path),
    ])
    assert rc == 0
    lines = (tmp_path / "tradeoff.csv").read_text().strip().split("\n")
    assert lines[0] == "protocol,snr_db,target_pf,required_bw_hz,C,K,b_bits,T_s,kfactor_db"
    assert len(lines) == 1 + 31
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["status"] == "complete"
    assert manifest["outputs"] == ["tradeoff.csv"]


def test_analytic_rejects_sic_protocols(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["analytic", "--protocol", "ic_ic", "--snr", "10", "--out", str(tmp_path)])
    assert exc.value.code == 2
    assert "no closed form" in capsys.readouterr().err


def test_analytic_rejects_degenerate_target(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["analytic", "--protocol", "occupy", "--snr", "10",
              "--target", "0", "--out", str(tmp_path)])
    assert exc.value.code == 2


def test_simulate_requires_scenario(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--protocol", "occupy", "--out", str(tmp_path)])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--protocol", "occupy", "--scenario",
              str(tmp_path / "missing.json"), "--out", str(tmp_path)])
    assert exc.value.code == 2


def test_simulate_writes_result_and_manifest(scenario_file, tmp_path):
    out = tmp_path / "run1"
    rc = main([
        "simulate", "--scenario", str(scenario_file), "--protocol", "ic_ic",
        "--snr", "0", "--trials", "60", "--seed", "9", "--out", str(out),
    ])
    assert rc == 0
    lines = (out / "results.csv").read_text().strip().split("\n")
    assert lines[0] == "protocol,C,K,W_hz,snr_db,D_m,trials,failures,pf,ci_low,ci_high,seed,wall_s"
    assert len(lines) == 2
    row = lines[1].split(",")
    assert row[0] == "ic_ic"
    assert row[4] == "0"  # requested average SNR echoed
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["scenario_hash"]
    assert manifest["outputs"] == ["results.csv"]


def _strip_wall_column(csv_text: str) -> str:
    lines = csv_text.strip().split("\n")
    head = lines[0].split(",")
    keep = [i for i, c in enumerate(head) if c != "wall_s"]
    return "\n".join(",".join(l.split(",")[i] for i in keep) for l in lines)


def test_simulate_deterministic_output(scenario_file, tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        main([
            "simulate", "--scenario", str(scenario_file), "--protocol",
            "occupy_cow", "--trials", "80", "--seed", "42", "--out", str(out),
        ])
        outs.append((out / "results.csv").read_text())
    assert _strip_wall_column(outs[0]) == _strip_wall_column(outs[1])


def test_sweep_grid(scenario_file, tmp_path):
    rc = main([
        "sweep", "--scenario", str(scenario_file), "--protocols",
        "orth,occupy", "--grid", "snr_db=0:10:5", "--trials", "30",
        "--seed", "3", "--out", str(tmp_path),
    ])
    assert rc == 0
    lines = (tmp_path / "results.csv").read_text().strip().split("\n")
    assert len(lines) == 1 + 2 * 3


def test_sweep_empty_grid_rejected(scenario_file, tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["sweep", "--scenario", str(scenario_file), "--protocols",
              "occupy", "--out", str(tmp_path)])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["sweep", "--scenario", str(scenario_file), "--protocols",
              "occupy", "--grid", "speed=1,2", "--out", str(tmp_path)])
    assert exc.value.code == 2


def test_sweep_bandwidth_mode_writes_tradeoff(scenario_file, tmp_path):
    rc = main([
        "sweep", "--scenario", str(scenario_file), "--protocols", "occupy",
        "--grid", "snr_db=20", "--target-pf", "0.5", "--seed", "5",
        "--out", str(tmp_path),
    ])
    assert rc in (0, 1)
    assert (tmp_path / "tradeoff.csv").exists()


def test_layout_csv(scenario_file, tmp_path):
    rc = main(["layout", "--scenario", str(scenario_file), "--seed", "4",
               "--out", str(tmp_path)])
    assert rc == 0
    lines = (tmp_path / "layout.csv").read_text().strip().split("\n")
    assert lines[0] == "kind,cell,index,x_m,y_m"
    assert len(lines) == 1 + 4 + 12


def test_presets_load_and_validate():
    from urllcsim.cli import load_preset

    for name in ("fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7"):
        preset = load_preset(name)
        assert preset["command"] in ("analytic", "sweep")
        if preset["command"] == "sweep":
            from urllcsim.config import scenario_from_dict

            scenario_from_dict(preset["scenario"])  # must be a valid scenario
            assert preset["sweeps"]
    with pytest.raises(UsageError):
        load_preset("fig99")


def test_fig1_preset_runs_small(tmp_path):
    # same preset machinery on a reduced grid via an on-disk preset file
    from urllcsim.cli import load_preset

    preset = load_preset("fig1")
    preset["snr_db"] = [10.0]
    path = tmp_path / "mini.json"
    path.write_text(json.dumps(preset))
    rc = main(["analytic", "--preset", str(path), "--out", str(tmp_path)])
    assert rc == 0
    lines = (tmp_path / "tradeoff.csv").read_text().strip().split("\n")
    assert len(lines) == 1 + 4  # four series, one SNR each


def test_unknown_scenario_key_is_usage_error(tmp_path):
    bad = dict(SCENARIO)
    bad["turbo"] = True
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--scenario", str(path), "--protocol", "occupy",
              "--trials", "5", "--out", str(tmp_path)])
    assert exc.value.code == 2


def test_analytic_convention_flag(tmp_path):
    # the alternate Marcum-argument convention reproduces the published
    # 16-cell tradeoff value at 10 dB
    rc = main([
        "analytic", "--protocol", "orth", "--C", "16", "--snr", "10",
        "--target", "1e-9", "--convention", "sqrt_kappa", "--out", str(tmp_path),
    ])
    assert rc == 0
    row = (tmp_path / "tradeoff.csv").read_text().strip().split("\n")[1]
    bw = float(row.split(",")[3])
    assert abs(bw / 88.5e6 - 1.0) < 0.05


def test_simulate_fig3_c9_reference_point(tmp_path):
    """20k-trial run of the 9-cell cancellation protocol at 0 dB: the Wilson
    interval must contain the published reference value 8.87e-4. Slow (~5 min).
    """
    scenario = dict(SCENARIO)
    scenario.update(num_cells=9, actuators_per_cell=30, bandwidth=30e6)
    path = tmp_path / "fig3_c9.json"
    path.write_text(json.dumps(scenario))
    rc = main([
        "simulate", "--scenario", str(path), "--protocol", "ic_ic",
        "--snr", "0", "--trials", "20000", "--seed", "314",
        "--out", str(tmp_path),
    ])
    assert rc == 0
    row = (tmp_path / "results.csv").read_text().strip().split("\n")[1].split(",")
    header = "protocol,C,K,W_hz,snr_db,D_m,trials,failures,pf,ci_low,ci_high,seed,wall_s".split(",")
    ci_low = float(row[header.index("ci_low")])
    ci_high = float(row[header.index("ci_high")])
    assert ci_low <= 8.87e-4 <= ci_high


def test_fig2_preset_runs_small(tmp_path):
    from urllcsim.cli import load_preset

    preset = load_preset("fig2")
    preset["sweeps"][0]["grid"] = {"snr_db": [20.0], "D": [100.0]}
    preset["sweeps"][0]["trials"] = 10
    preset["sweeps"][0]["max_failures"] = 5
    path = tmp_path / "mini_fig2.json"
    path.write_text(json.dumps(preset))
    rc = main(["sweep", "--preset", str(path), "--seed", "6", "--out", str(tmp_path)])
    assert rc == 0
    lines = (tmp_path / "results.csv").read_text().strip().split("\n")
    assert len(lines) == 2
    assert lines[1].startswith("occupy_cow,9,30,2000000,20,100,")
