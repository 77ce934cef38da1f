import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tubewalk.lattice import TubeSpec, build_nanotube
from tubewalk.transport import (
    CLOSED_FORM, CSV_COLUMNS, NonOrthonormalBasis, analyze, analyze_tube, atp_exact,
    atp_via_simulation, averaged_atp, chirality_estimate, make_regime, max_atp,
    regime_setup, reports_to_csv, sr_basis, sweep,
)
from tubewalk.walk import MixedState

# averaged ATP, frozen from the Krylov (plain walk) and brute-force -1 eigenspace
# (percolated walk) oracles in tests/oracles.py: key -> (cqw, pcqw)
FROZEN = {
    ((3, 0, 1), "vv"): (0.663674902372, 0.739432478130),
    ((3, 0, 1), "ll"): (0.702127659574, 0.702127659574),
    ((3, 0, 2), "vl"): (0.666667278762, 0.754644313548),
    ((3, 0, 2), "lv"): (0.676448038048, 0.676448038048),
    ((4, 0, 1), "vl"): (0.503472222222, 0.750000000000),
    ((4, 0, 1), "ll"): (0.562500000000, 0.687500000000),
    ((3, 3, 1), "lv"): (0.439706947571, 0.617484725349),
    ((2, 2, 1), "vv"): (0.684594962980, 0.735877014262),
}

specs = st.one_of(
    st.builds(lambda k, L: TubeSpec(k, 0, L), st.integers(3, 6), st.integers(1, 3)),
    st.builds(lambda k, L: TubeSpec(k, k, L), st.integers(2, 4), st.integers(1, 2)),
)


@pytest.mark.parametrize("key", sorted(FROZEN))
def test_frozen_averaged_atp(key):
    spec, code = key
    for flavor, ref in zip(("cqw", "pcqw"), FROZEN[key]):
        assert abs(analyze(TubeSpec(*spec), code, flavor).averaged_atp - ref) < 1e-9


def test_atp_exact_examples():
    sr = np.eye(4, dtype=complex)[:, :2]
    assert atp_exact(MixedState.pure(np.array([1, 0, 0, 0])), sr) == 0.0
    assert atp_exact(MixedState.pure(np.array([0, 0, 0, 1])), sr) == 1.0
    psi = np.array([1, 0, 1, 0]) / np.sqrt(2)
    assert abs(atp_exact(MixedState.pure(psi), sr) - 0.5) < 1e-15
    assert atp_exact(MixedState.pure(psi), np.zeros((4, 0))) == 1.0
    with pytest.raises(NonOrthonormalBasis):
        atp_exact(MixedState.pure(psi), np.array([[1.0], [1.0], [0], [0]]))


def test_mixed_state_atp_is_average_of_pure():
    g = build_nanotube(TubeSpec(3, 0, 2))
    reg = make_regime(g, "lv")
    sr = sr_basis(g, reg, "pcqw").basis
    S = list(reg.source.indices)
    pures = [np.eye(g.dim)[i] for i in S]
    mean = np.mean([atp_exact(MixedState.pure(p), sr) for p in pures])
    assert abs(averaged_atp(reg, sr) - mean) < 1e-12


@settings(max_examples=15, deadline=None)
@given(specs, st.sampled_from(["vv", "vl", "lv", "ll"]), st.integers(0, 2**32 - 1))
def test_max_atp_bounds_random_states(spec, code, seed):
    g = build_nanotube(spec)
    reg = make_regime(g, code)
    sr = sr_basis(g, reg, "pcqw").basis
    best, psi = max_atp(reg, sr, g.dim)
    assert abs(np.linalg.norm(psi) - 1) < 1e-12
    assert abs(atp_exact(MixedState.pure(psi), sr) - best) < 1e-10
    assert averaged_atp(reg, sr) <= best + 1e-12
    rng = np.random.default_rng(seed)
    S = list(reg.source.indices)
    for _ in range(20):
        v = np.zeros(g.dim, complex)
        v[S] = rng.normal(size=len(S)) + 1j * rng.normal(size=len(S))
        assert atp_exact(MixedState.pure(v / np.linalg.norm(v)), sr) <= best + 1e-10


@settings(max_examples=12, deadline=None)
@given(specs, st.sampled_from(["vv", "vl", "lv", "ll"]))
def test_plain_walk_never_beats_percolated(spec, code):
    cq, pc = analyze_tube(spec, [code], ["cqw", "pcqw"])
    assert 0.0 <= cq.averaged_atp <= pc.averaged_atp + 1e-9
    assert cq.max_atp <= pc.max_atp + 1e-9
    assert cq.trapped_dim >= pc.trapped_dim


def test_empty_basis_transports_everything():
    g = build_nanotube(TubeSpec(3, 0, 1))
    reg = make_regime(g, "vv")
    assert averaged_atp(reg, np.zeros((g.dim, 0))) == 1.0
    assert max_atp(reg, np.zeros((g.dim, 0)), g.dim)[0] == 1.0


def test_chirality_estimates():
    for m in (3, 4, 5, 6, 7):
        assert abs(chirality_estimate(TubeSpec(m, 0, 1)) - 2 / 3) < 1e-12
    for k in (2, 3, 4, 5):
        assert abs(chirality_estimate(TubeSpec(k, k, 1)) - 5 / 8) < 1e-12
    assert CLOSED_FORM == pytest.approx({"zigzag": 2 / 3, "armchair": 5 / 8})
    with pytest.raises(ValueError):
        chirality_estimate(TubeSpec(4, 2, 1))


def test_loops_to_loops_plateau():
    vals = [analyze(TubeSpec(4, 0, L), "ll", "pcqw").averaged_atp for L in (4, 5, 6)]
    assert max(vals) - min(vals) < 5e-3


def test_chirality_split():
    zig = analyze(TubeSpec(5, 0, 4), "ll", "pcqw").averaged_atp
    arm = analyze(TubeSpec(4, 4, 4), "ll", "pcqw").averaged_atp
    assert zig > arm
    assert abs(zig - 2 / 3) < abs(zig - 5 / 8)
    assert abs(arm - 5 / 8) < abs(arm - 2 / 3)


def test_gap_only_on_even_zigzag():
    for m, gap in ((3, 0.0), (4, 0.125), (5, 0.0), (6, 1 / 12)):
        cq, pc = analyze_tube(TubeSpec(m, 0, 2), ["ll"], ["cqw", "pcqw"])
        assert abs(pc.averaged_atp - cq.averaged_atp - gap) < 1e-9


@pytest.mark.parametrize("code", ["vv", "vl", "lv", "ll"])
def test_plain_walk_simulation_matches_projection(code):
    g = build_nanotube(TubeSpec(3, 0, 2))
    reg = make_regime(g, code)
    rep = analyze(TubeSpec(3, 0, 2), code, "cqw")
    rho = MixedState.maximally_mixed(reg.source, g.dim)
    sim = atp_via_simulation(rho, regime_setup(g, reg, "cqw"), 5000, tolerance=1e-6)
    assert abs(sim.atp - rep.averaged_atp) < 1e-2


def test_simulation_horizon_validated():
    g = build_nanotube(TubeSpec(3, 0, 1))
    reg = make_regime(g, "ll")
    with pytest.raises(ValueError):
        atp_via_simulation(MixedState.maximally_mixed(reg.source, g.dim),
                           regime_setup(g, reg, "cqw"), 0)


def test_unknown_regime_and_flavor():
    g = build_nanotube(TubeSpec(3, 0, 1))
    with pytest.raises(ValueError):
        make_regime(g, "xx")
    with pytest.raises(ValueError):
        sr_basis(g, make_regime(g, "ll"), "quantum")


def test_csv_and_json_output():
    reports = sweep([TubeSpec(3, 0, 1), TubeSpec(3, 3, 1)], ["ll", "vv"], ["pcqw"], workers=2)
    rows = list(csv.DictReader(io.StringIO(reports_to_csv(reports))))
    assert list(rows[0])[:len(CSV_COLUMNS)] == CSV_COLUMNS
    assert [(r["m"], r["n"], r["regime"]) for r in rows] == [
        ("3", "0", "ll"), ("3", "0", "vv"), ("3", "3", "ll"), ("3", "3", "vv")]
    assert abs(float(rows[0]["averagedATP"]) - 33 / 47) < 1e-12
    d = json.loads(reports[0].to_json())
    assert d["regimeName"] == "loops-to-loops" and d["maxState"]


def test_sweep_records_failures():
    reports = sweep([TubeSpec(3, 0, 1)], ["ll"], ["cqw"], max_dim=5)
    assert reports[0].method == "analytic"  # large graphs skip the oracle, not fail
    bad = sweep([TubeSpec(3, 0, 1)], ["zz"], ["pcqw"])
    assert bad[0].error and "error" in reports_to_csv(bad)
