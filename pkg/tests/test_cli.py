import csv
import io
import json

import pytest
from hypothesis import given, settings, strategies as st

from tubewalk.cli import main, validate_setting
from tubewalk.config import (
    ConfigError, SweepConfig, format_config, load_preset, parse_config, preset_names,
)
from tubewalk.lattice import TubeSpec, build_nanotube


def test_parse_config_example():
    cfg = parse_config("""
        # comment line
        chiralities = 3,0; 4,4
        lengths = 2-4       # inclusive range
        regimes = ll, vv
        flavors = pcqw cqw
        p = 0.3
        oracle_check = yes
    """)
    assert cfg.chiralities == [(3, 0), (4, 4)]
    assert cfg.lengths == [2, 3, 4]
    assert cfg.regimes == ["ll", "vv"] and cfg.flavors == ["pcqw", "cqw"]
    assert cfg.p == 0.3 and cfg.oracle_check and not cfg.simulation_check
    assert cfg.specs()[0] == TubeSpec(3, 0, 2) and len(cfg.specs()) == 6
    assert parse_config("lengths = 1, 5, 7").lengths == [1, 5, 7]


@pytest.mark.parametrize("text", [
    "colour = red",
    "p = 0.5\np = 0.6",
    "lengths",
    "lengths = a-b",
    "lengths = ",
    "chiralities = 3",
    "chiralities = 0,0",
    "regimes = up",
    "flavors = classical",
    "p = 1.0",
    "trajectories = 0",
    "oracle_check = maybe",
])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


@settings(max_examples=30, deadline=None)
@given(
    st.lists(st.sampled_from([(3, 0), (4, 0), (2, 2), (5, 5), (4, 2)]), min_size=1, max_size=3),
    st.lists(st.integers(1, 12), min_size=1, max_size=4),
    st.lists(st.sampled_from(["vv", "vl", "lv", "ll"]), min_size=1, max_size=4),
    st.floats(0.01, 0.99),
    st.booleans(),
)
def test_config_round_trip(chir, lengths, regimes, p, flag):
    cfg = SweepConfig(chiralities=chir, lengths=lengths, regimes=regimes, p=p,
                      simulation_check=flag, out="x.csv")
    assert parse_config(format_config(cfg)) == cfg


def test_presets_load():
    names = preset_names()
    assert {"fig5", "fig6", "fig7", "fig8", "fig10", "cqw_ll", "full"} <= set(names)
    for n in names:
        load_preset(n)
    with pytest.raises(ConfigError):
        load_preset("nope")


def test_generate_deterministic(tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    assert main(["generate", "--chirality", "3,3", "--length", "2", "--out", str(a)]) == 0
    assert main(["generate", "--chirality", "3,3", "--length", "2", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_usage_errors(tmp_path, capsys):
    assert main(["generate", "--chirality", "0,0", "--length", "1"]) == 2
    assert main(["generate", "--chirality", "3,0", "--length", "0"]) == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("lengths = \n")
    assert main(["sweep", str(bad)]) == 2
    assert main(["sweep"]) == 2
    assert main(["sweep", str(bad), "--preset", "fig6"]) == 2
    assert main(["sweep", str(tmp_path / "missing.cfg")]) == 2
    assert "error" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["maximize", "--chirality", "3,0", "--length", "1", "--regime", "xx"])


def test_oracle_refusal_exit_code():
    assert main(["validate", "--chirality", "3,0", "--length", "2", "--max-dim", "10"]) == 3
    assert main(["maximize", "--chirality", "3,0", "--length", "2", "--flavor", "cqw",
                 "--max-dim", "10"]) == 0  # falls back to the analytic basis


def test_validate_pass_and_fail(tmp_path):
    out = tmp_path / "v.json"
    assert main(["validate", "--chirality", "3,0", "--length", "1", "--regime", "ll",
                 "--horizon", "1500", "--trajectories", "200", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["pass"] and rep["trappedDim"] == 9
    # a horizon far too short to reach the limit
    assert main(["validate", "--chirality", "3,0", "--length", "1", "--regime", "ll",
                 "--horizon", "5", "--trajectories", "20", "--out", str(out)]) == 4


def test_validate_plain_walk_oracle_dimensions():
    g = build_nanotube(TubeSpec(4, 0, 2))
    rep = validate_setting(g.spec, "vv", "cqw")
    assert rep["pass"]
    assert rep["trappedDimCQW"] > rep["trappedDimPCQW"] == 2 * g.n_vertices - g.n_edges
    assert rep["method"] == "oracle"


def test_maximize_json(capsys):
    assert main(["maximize", "--chirality", "3,0", "--length", "1", "--regime", "ll"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert abs(d["averagedATP"] - 33 / 47) < 1e-12 and d["maxATP"] >= d["averagedATP"]


def test_simulate_csv(capsys):
    assert main(["simulate", "--chirality", "3,0", "--length", "1", "--flavor", "pcqw",
                 "--exact", "--steps", "10"]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0] == ["t", "survival", "stderr"] and len(rows) == 12
    assert float(rows[1][1]) == 1.0
    assert main(["simulate", "--chirality", "3,0", "--length", "1", "--initial", "uniform",
                 "--steps", "10", "--trajectories", "5"]) == 0


def test_sweep_preset_fig6(tmp_path):
    out = tmp_path / "fig6.csv"
    assert main(["sweep", "--preset", "fig6", "--out", str(out), "--workers", "2"]) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 6 * 8 and not any(r["error"] for r in rows)
    final = {(r["m"], r["n"]): float(r["averagedATP"]) for r in rows if r["length"] == "8"}
    for (m, n), v in final.items():
        target = 5 / 8 if m == n else 2 / 3
        assert abs(v - target) < 0.05


def test_sweep_with_checks(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("chiralities = 3,0\nlengths = 1\nregimes = ll\nflavors = cqw, pcqw\n"
                   "horizon = 300\ntrajectories = 20\noracle_check = true\nsimulation_check = true\n")
    out = tmp_path / "c.csv"
    assert main(["sweep", str(cfg), "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert {"oracleResidual", "simATP", "simStderr", "simConverged"} <= set(rows[0])
    assert float(rows[0]["oracleResidual"]) < 1e-8
    assert rows[0]["simStderr"] == "" and rows[1]["simStderr"] != ""


def test_sweep_fig10_crossings(tmp_path):
    out = tmp_path / "fig10.csv"
    assert main(["sweep", "--preset", "fig10", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    val = {(r["m"], int(r["length"]), r["flavor"]): float(r["averagedATP"]) for r in rows}
    below = [L for L in range(1, 9) if val[("3", L, "cqw")] < val[("3", L, "pcqw")] - 1e-9]
    assert below == [3, 6]
