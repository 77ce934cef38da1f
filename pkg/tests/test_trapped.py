import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_pcqw_trapped, krylov_sink_resistant, walk_matrix
from tubewalk.lattice import TubeSpec, build_nanotube, select_subspace
from tubewalk.trapped import (
    BOTTOM_EIGENVALUE, OracleRefused, basis_from_json, build_A_states, build_Aprime_states,
    build_bottom_states, build_C1_states, build_C2_state, cqw_basis, eigenspaces,
    filter_sink_resistant, lambda_family, orthonormalize, pcqw_basis, projector,
    span_residual, spectral_oracle, sr_oracle, swap_defect, vertex_sums,
)
from tubewalk.transport import make_regime, sr_basis
from tubewalk.walk import step_matrix

small_specs = st.one_of(
    st.builds(lambda k, L: TubeSpec(k, 0, L), st.integers(3, 6), st.integers(1, 3)),
    st.builds(lambda k, L: TubeSpec(k, k, L), st.integers(2, 4), st.integers(1, 2)),
)


def _g(m, n, L):
    return build_nanotube(TubeSpec(m, n, L))


def test_face_state_example():
    g = _g(3, 0, 1)
    a = build_A_states(g)
    assert len(a) == len(g.faces)
    hexes = [s for s, f in zip(a, g.faces) if f.kind == "hexagon"]
    for s in hexes:
        assert len(s.support) == 12
        assert np.allclose(np.abs(s.amplitudes[s.support]), 1 / np.sqrt(12))


@pytest.mark.parametrize("m,n,sizes", [(3, 0, {6}), (5, 0, {6}), (3, 3, {4, 8}), (4, 4, {4, 8})])
def test_neighbouring_loop_states(m, n, sizes):
    g = _g(m, n, 2)
    c1 = build_C1_states(g)
    assert len(c1) == g.n_loops - 2  # one pair left out per end
    assert {len(s.support) for s in c1} == sizes
    for s in c1:
        loops = [i for i in s.support if i >= 2 * g.n_edges]
        assert len(loops) == 2


def test_axial_state_grows_with_length():
    sizes = [len(build_C2_state(_g(4, 0, L)).support) for L in (1, 2, 3)]
    assert sizes[0] < sizes[1] < sizes[2]
    # the normalised overlap with a bottom loop shrinks accordingly
    g = _g(4, 0, 1)
    w = [abs(build_C2_state(_g(4, 0, L)).amplitudes[g.loop_state(0)]) for L in (1, 2, 3)]
    assert w[0] > w[1] > w[2]


def test_aprime_states_plain_walk_only():
    g = _g(4, 0, 2)
    U = step_matrix(g)
    K = np.ones(g.n_edges, bool)
    for s in build_Aprime_states(g):
        assert np.allclose(U @ s.amplitudes, s.amplitudes, atol=1e-12)
        face_edge = s.support[0] // 2
        K[:] = True
        K[face_edge] = False
        assert not np.allclose(step_matrix(g, K) @ s.amplitudes, s.amplitudes, atol=1e-6)


def test_bottom_states():
    g = _g(4, 0, 2)
    U = step_matrix(g).toarray()
    b = build_bottom_states(g)
    assert len(b) == 2
    assert abs(abs(BOTTOM_EIGENVALUE) - 1) < 1e-15
    for s in b:
        assert np.linalg.norm(U @ s.amplitudes - s.eigenvalue * s.amplitudes) < 1e-10
        owner = {int(a): v for v in range(g.n_vertices) for a in g.out_states[v]}
        assert {g.heights[owner[i]] for i in s.support} <= set(sorted(set(g.heights))[:2])
        mags = np.unique(np.round(np.abs(s.amplitudes[s.support]), 10))
        assert len(mags) == 2 and abs(mags[1] / mags[0] - 1.154701) < 1e-6
    # on a percolated step they are not trapped: no -1 component
    P = pcqw_basis(g).matrix()
    Q = orthonormalize(list(P.T))
    for s in b:
        assert np.linalg.norm(Q.conj().T @ s.amplitudes) < 1e-10
    assert build_bottom_states(_g(3, 0, 2)) == []
    assert build_bottom_states(_g(3, 3, 2)) == []


@settings(max_examples=15, deadline=None)
@given(small_specs)
def test_pcqw_basis_spans_trapped_space(spec):
    g = build_nanotube(spec)
    basis = pcqw_basis(g)
    M = basis.matrix()
    assert len(basis) == g.trapped_dim == 2 * g.n_vertices - g.n_edges
    assert np.linalg.matrix_rank(M, tol=1e-10) == g.trapped_dim
    for s in basis.states:
        assert swap_defect(s.amplitudes, g) < 1e-12
        assert np.max(np.abs(vertex_sums(s.amplitudes, g))) < 1e-12
    oracle = spectral_oracle(g, "pcqw").matrix()
    assert span_residual(orthonormalize(list(M.T)), oracle) < 1e-8


def test_pcqw_oracle_against_brute_force():
    g = _g(3, 0, 1)
    brute = brute_pcqw_trapped(g, samples=12, seed=5)
    assert brute.shape[1] == g.trapped_dim
    assert span_residual(brute.astype(complex), spectral_oracle(g, "pcqw").matrix()) < 1e-8


@pytest.mark.parametrize("key", [(3, 0, 2), (4, 0, 2), (3, 3, 1), (2, 2, 2)])
def test_cqw_oracle_at_least_pcqw(key):
    g = _g(*key)
    assert len(spectral_oracle(g, "cqw")) >= g.trapped_dim


def test_sink_filter_examples():
    g = _g(4, 0, 2)
    basis = pcqw_basis(g)
    loops_top = select_subspace(g, "top", "loops")
    vertex_top = select_subspace(g, "top", "one-vertex")
    sr_loops = filter_sink_resistant(basis, loops_top)
    assert "C2" not in sr_loops.kinds()
    assert sr_loops.kinds().get("A") == len(g.faces)
    sr_vertex = filter_sink_resistant(pcqw_basis(g, avoid=[vertex_top.vertex]), vertex_top)
    assert "C2" in sr_vertex.kinds()
    whole = list(range(g.dim))
    assert len(filter_sink_resistant(basis, whole)) == 0
    assert len(filter_sink_resistant(basis, None)) == len(basis)
    for sr, sink in ((sr_loops, loops_top), (sr_vertex, vertex_top)):
        M = sr.matrix()
        assert np.max(np.abs(M[list(sink.indices)]), initial=0) < 1e-12
        assert np.allclose(M.conj().T @ M, np.eye(M.shape[1]), atol=1e-10)


def test_sink_filter_independent_of_input_basis():
    g = _g(3, 3, 2)
    sink = select_subspace(g, "top", "loops")
    a = filter_sink_resistant(pcqw_basis(g), sink).matrix()
    b = filter_sink_resistant(spectral_oracle(g, "pcqw"), sink).matrix()
    assert a.shape == b.shape
    assert span_residual(a, b) < 1e-8


def test_orthonormalize_examples():
    out = orthonormalize([np.array([1.0, 0, 0]), np.array([1.0, 1, 0]), np.array([2.0, 2, 0])])
    assert out.shape == (3, 2)
    assert np.allclose(np.abs(out), [[1, 0], [0, 1], [0, 0]])
    assert orthonormalize([]).shape == (0, 0)
    g = _g(3, 0, 2)
    Q = orthonormalize(list(pcqw_basis(g).matrix().T))
    diff = projector(Q) - projector(spectral_oracle(g, "pcqw").matrix())
    assert np.linalg.norm(diff) < 1e-8


def test_json_round_trip():
    g = _g(4, 0, 1)
    basis = cqw_basis(g)
    back = basis_from_json(basis.to_json(), g)
    assert np.allclose(back.matrix(), basis.matrix(), atol=1e-15)
    assert [s.kind for s in back.states] == [s.kind for s in basis.states]


@pytest.mark.parametrize("key,code", [((3, 0, 2), "ll"), ((4, 0, 2), "vv"), ((4, 0, 2), "lv"),
                                      ((3, 3, 2), "vl"), ((4, 0, 3), "ll")])
def test_cqw_sink_resistant_basis_matches_krylov(key, code):
    g = _g(*key)
    reg = make_regime(g, code)
    sr = sr_basis(g, reg, "cqw").basis
    ref = krylov_sink_resistant(walk_matrix(g), reg.sink.indices)
    assert sr.shape[1] == ref.shape[1]
    assert span_residual(sr, ref.astype(complex)) < 1e-7


def test_lambda_family_sink_resistant_count():
    # top-loops sink on (4,0) length 2: the sink-resistant part at lambda
    g = _g(4, 0, 2)
    sink = select_subspace(g, "top", "loops")
    spaces = eigenspaces(g)
    sr = sr_oracle(g, sink, spaces)
    at_lam = [s for s in sr.states if abs(s.eigenvalue - BOTTOM_EIGENVALUE) < 1e-8]
    assert len(at_lam) == 4
    fam = [s for s in lambda_family(g, spaces) if abs(s.eigenvalue - BOTTOM_EIGENVALUE) < 1e-8]
    Q = np.stack([s.amplitudes for s in fam], axis=1)
    assert np.allclose(Q.conj().T @ Q, np.eye(Q.shape[1]), atol=1e-10)


def test_oracle_refuses_large_graphs():
    g = _g(4, 0, 2)
    with pytest.raises(OracleRefused):
        spectral_oracle(g, "cqw", max_dim=10)
    with pytest.raises(OracleRefused):
        eigenspaces(g, max_dim=10)
