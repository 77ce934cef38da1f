"""Trapped-state bases for Grover walks on tube state graphs.

Percolated walks share the eigenvalue -1 subspace spanned by face states (A)
and loop-to-loop path states (C1 between neighbouring loops of one end, one
C2 state joining the two ends).  The plain walk adds face circulations (A')
at +1 and, on (2n,0) tubes, a pair of states on the bottom ring at
(1 -+ i sqrt 8)/3.  ``spectral_oracle`` recomputes everything numerically.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

import numpy as np
import scipy.linalg as la

from .lattice import End, Face, StateGraph, Subspace
from .walk import step_matrix

Flavor = Literal["pcqw", "cqw"]

BOTTOM_EIGENVALUE = (1 - 1j * np.sqrt(8)) / 3
CLUSTER_TOL = 1e-8
SVD_TOL = 1e-10
ORACLE_MAX_DIM = 3000


class UnsupportedGraphError(ValueError):
    pass


class ConstructionError(RuntimeError):
    pass


class OracleRefused(RuntimeError):
    pass


@dataclass
class TrappedState:
    amplitudes: np.ndarray
    eigenvalue: complex
    kind: str  # A, A', C1, C2, bottom, oracle

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(np.abs(self.amplitudes) > 1e-14)

    def triplets(self) -> list[tuple[int, float, float]]:
        return [(int(i), float(self.amplitudes[i].real), float(self.amplitudes[i].imag))
                for i in self.support]


@dataclass
class TrappedBasis:
    states: list[TrappedState]
    graph: StateGraph = field(repr=False)
    flavor: Flavor

    def __len__(self) -> int:
        return len(self.states)

    def matrix(self) -> np.ndarray:
        """States as columns, shape (dim, k)."""
        if not self.states:
            return np.zeros((self.graph.dim, 0), dtype=complex)
        return np.stack([s.amplitudes for s in self.states], axis=1)

    def groups(self) -> list[tuple[complex, list[TrappedState]]]:
        """States bucketed by eigenvalue (within CLUSTER_TOL)."""
        out: list[tuple[complex, list[TrappedState]]] = []
        for s in self.states:
            for lam, members in out:
                if abs(lam - s.eigenvalue) < CLUSTER_TOL:
                    members.append(s)
                    break
            else:
                out.append((s.eigenvalue, [s]))
        return out

    def kinds(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for s in self.states:
            counts[s.kind] = counts.get(s.kind, 0) + 1
        return counts

    def to_json(self) -> str:
        spec = self.graph.spec
        return json.dumps({
            "spec": {"m": spec.m, "n": spec.n, "length": spec.length},
            "flavor": self.flavor,
            "dim": self.graph.dim,
            "states": [{
                "kind": s.kind,
                "eigenvalue": [float(np.real(s.eigenvalue)), float(np.imag(s.eigenvalue))],
                "entries": s.triplets(),
            } for s in self.states],
        }, indent=1)


def basis_from_json(text: str, graph: StateGraph) -> TrappedBasis:
    data = json.loads(text)
    states = []
    for rec in data["states"]:
        v = np.zeros(graph.dim, dtype=complex)
        for i, re, im in rec["entries"]:
            v[i] = re + 1j * im
        states.append(TrappedState(v, complex(*rec["eigenvalue"]), rec["kind"]))
    return TrappedBasis(states, graph, data["flavor"])


# -- invariants -------------------------------------------------------------

def swap_defect(v: np.ndarray, graph: StateGraph, sign: int = 1) -> float:
    """max |v(u->w) - sign * v(w->u)| over edges."""
    arcs = v[: 2 * graph.n_edges].reshape(-1, 2)
    return float(np.max(np.abs(arcs[:, 0] - sign * arcs[:, 1]), initial=0.0))


def vertex_sums(v: np.ndarray, graph: StateGraph) -> np.ndarray:
    return v[graph.out_states].sum(axis=1)


def _normalised(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _verify_pcqw(v: np.ndarray, graph: StateGraph, kind: str) -> None:
    if swap_defect(v, graph) > 1e-12 or np.max(np.abs(vertex_sums(v, graph))) > 1e-12:
        raise ConstructionError(f"{kind} state violates swap symmetry or zero vertex sums")


# -- analytic builders ------------------------------------------------------

def face_state(graph: StateGraph, face: Face) -> np.ndarray:
    if len(face) % 2:
        raise UnsupportedGraphError(f"face of odd size {len(face)} needs B/D-type states")
    v = np.zeros(graph.dim, dtype=complex)
    for i, e in enumerate(face.edges):
        v[2 * e] = v[2 * e + 1] = (-1) ** i
    return _normalised(v)


def build_A_states(graph: StateGraph) -> list[TrappedState]:
    """One alternating-sign state per inner face (eigenvalue -1)."""
    out = []
    for f in graph.faces:
        v = face_state(graph, f)
        _verify_pcqw(v, graph, "A")
        out.append(TrappedState(v, -1.0, "A"))
    return out


def path_state(graph: StateGraph, path: Sequence[int]) -> np.ndarray:
    """Loop-to-loop state along a vertex path whose endpoints carry loops."""
    start, end = graph.loop_of(path[0]), graph.loop_of(path[-1])
    if start is None or end is None:
        raise ConstructionError(f"path endpoints {path[0]}, {path[-1]} must carry loops")
    if len(set(path)) != len(path):
        raise ConstructionError("path is not simple")
    v = np.zeros(graph.dim, dtype=complex)
    v[start] = 1.0
    val = -1.0
    for a, b in zip(path[:-1], path[1:]):
        e = graph.edge_index(a, b)
        v[2 * e] = v[2 * e + 1] = val
        val = -val
    v[end] = val
    return _normalised(v)


def loop_ring(graph: StateGraph, end: End) -> list[list[int]]:
    """Paths between cyclically neighbouring loops along an end's boundary.

    Paths start at the lowest-index loop vertex and follow the boundary
    face's traversal direction; path k joins loop k and loop k+1 (mod n).
    """
    cyc = list(graph.boundary_face(end).vertices)
    loop_set = set(graph.end_loops(end))
    first = min(loop_set)
    cyc = cyc[cyc.index(first):] + cyc[:cyc.index(first)]
    stops = [k for k, v in enumerate(cyc) if v in loop_set]
    paths = []
    for a, b in zip(stops, stops[1:] + [len(cyc)]):
        paths.append(cyc[a:b + 1] if b < len(cyc) else cyc[a:] + [cyc[0]])
    return paths


def _omitted_pair(paths: list[list[int]], avoid: set[int]) -> int:
    # dropping a pair that touches the sink keeps the remaining states clear of it
    for k, p in enumerate(paths):
        if p[0] in avoid or p[-1] in avoid:
            return k
    return len(paths) - 1


def build_C1_states(graph: StateGraph, avoid: Iterable[int] = (),
                    omit: dict[str, int] | None = None) -> list[TrappedState]:
    """Short path states between neighbouring loops, all pairs but one per end.

    ``omit`` maps an end to the index (into ``loop_ring``) of the pair left
    out; by default the first pair touching a vertex in ``avoid``, else the
    wrap-around pair.
    """
    avoid = set(avoid)
    out = []
    for end in ("bottom", "top"):
        paths = loop_ring(graph, end)
        if len(paths) < 2:
            raise ConstructionError(f"{end} end has fewer than 2 loops")
        skip = omit[end] if omit and end in omit else _omitted_pair(paths, avoid)
        for k, p in enumerate(paths):
            if k == skip:
                continue
            v = path_state(graph, p)
            _verify_pcqw(v, graph, "C1")
            out.append(TrappedState(v, -1.0, "C1"))
    return out


def shortest_path(graph: StateGraph, source: int, target: int) -> list[int]:
    """Lexicographically smallest among the shortest vertex paths."""
    dist = {target: 0}
    queue = deque([target])
    while queue:
        u = queue.popleft()
        for w in graph.rotation[u]:
            if w not in dist:
                dist[w] = dist[u] + 1
                queue.append(w)
    if source not in dist:
        raise ConstructionError("graph is disconnected")
    path = [source]
    while path[-1] != target:
        u = path[-1]
        path.append(min(w for w in graph.rotation[u] if dist.get(w, -1) == dist[u] - 1))
    return path


def c2_endpoints(graph: StateGraph, avoid: Iterable[int] = ()) -> tuple[int, int]:
    avoid = set(avoid)
    ends = []
    for end in ("bottom", "top"):
        loops = graph.end_loops(end)
        if not loops:
            raise ConstructionError(f"{end} end carries no loops")
        free = [v for v in loops if v not in avoid]
        ends.append(free[0] if free else loops[0])
    return ends[0], ends[1]


def build_C2_state(graph: StateGraph, avoid: Iterable[int] = (),
                   endpoints: tuple[int, int] | None = None) -> TrappedState:
    """Axial path state from a bottom loop to a top loop."""
    b, t = endpoints if endpoints else c2_endpoints(graph, avoid)
    v = path_state(graph, shortest_path(graph, b, t))
    _verify_pcqw(v, graph, "C2")
    return TrappedState(v, -1.0, "C2")


def build_Aprime_states(graph: StateGraph) -> list[TrappedState]:
    """Directed circulation around each inner face; eigenvalue +1 of the plain walk only."""
    out = []
    for f in graph.faces:
        v = np.zeros(graph.dim, dtype=complex)
        for a in f.arcs:
            v[a] += 1.0
            v[a ^ 1] -= 1.0
        out.append(TrappedState(_normalised(v), 1.0, "A'"))
    return out


def _bottom_ring_states(graph: StateGraph) -> np.ndarray:
    layers = sorted(set(graph.heights))[:2]
    ring = [v for v in range(graph.n_vertices) if graph.heights[v] in layers]
    return np.sort(graph.out_states[ring].ravel())


def build_bottom_states(graph: StateGraph) -> list[TrappedState]:
    """Plain-walk eigenstates at (1 -+ i sqrt 8)/3 confined to the bottom ring.

    Only (2n,0) tubes have them: one state per eigenvalue, supported on the
    states leaving the lowest zig-zag ring (its two lowest height layers).
    """
    spec = graph.spec
    if not (spec.is_zigzag and (spec.m + spec.n) % 2 == 0):
        return []
    S = _bottom_ring_states(graph)
    U = step_matrix(graph).toarray()
    out = []
    for lam in (BOTTOM_EIGENVALUE, np.conj(BOTTOM_EIGENVALUE)):
        # x on S with (U - lam) x = 0 on every row
        M = U[:, S].astype(complex)
        M[S, np.arange(len(S))] -= lam
        N = _null_rows(M)
        if N.shape[1] == 0:
            raise ConstructionError(f"no bottom-ring eigenvector at {lam:.6f}")
        for col in N.T:
            x = np.zeros(graph.dim, dtype=complex)
            x[S] = col
            out.append(TrappedState(_normalised(x), complex(lam), "bottom"))
    return out


def lambda_family(graph: StateGraph, spaces: list | None = None) -> list[TrappedState]:
    """Bottom states together with the loop-free eigenvectors sharing their eigenvalue.

    Per eigenvalue: the bottom state plus the part of the eigenspace with no
    weight on any loop, so only the bottom state overlaps the loops.
    """
    bottom = build_bottom_states(graph)
    if not bottom:
        return []
    spaces = spaces if spaces is not None else eigenspaces(graph)
    loops = [graph.loop_state(k) for k in range(graph.n_loops)]
    out = []
    for b in bottom:
        Q = next(Q for lam, Q in spaces if abs(lam - b.eigenvalue) < CLUSTER_TOL)
        free = Q @ _null_rows(Q[loops])
        rest = orthonormalize([b.amplitudes] + list(free.T))[:, 1:]
        out.append(b)
        out += [TrappedState(c, b.eigenvalue, "lambda") for c in rest.T]
    return out


# -- orthonormalisation and sink filtering ----------------------------------

def orthonormalize(vectors: Sequence[np.ndarray] | np.ndarray, rel_tol: float = SVD_TOL) -> np.ndarray:
    """Modified Gram-Schmidt with one re-orthogonalisation pass.

    Takes vectors as rows or a list; returns orthonormal columns.  A vector
    whose residual falls below ``rel_tol`` times its input norm is dropped.
    """
    vecs = [np.asarray(v, dtype=complex) for v in vectors]
    basis: list[np.ndarray] = []
    for v in vecs:
        norm0 = np.linalg.norm(v)
        if norm0 == 0:
            continue
        w = v.copy()
        for _ in range(2):
            for q in basis:
                w -= (q.conj() @ w) * q
        r = np.linalg.norm(w)
        if r < rel_tol * norm0:
            continue
        basis.append(w / r)
    if not basis:
        dim = len(vecs[0]) if vecs else 0
        return np.zeros((dim, 0), dtype=complex)
    return np.stack(basis, axis=1)


def filter_sink_resistant(basis: TrappedBasis, sink: Subspace | Sequence[int] | None) -> TrappedBasis:
    """Orthonormal basis of the part of each eigenvalue group with no sink weight.

    States that already vanish on the sink lead the output and keep their
    kind tag; the rest of the sink-free span follows, tagged by the group's
    common kind (or "mixed").
    """
    idx = list(sink.indices) if isinstance(sink, Subspace) else list(sink or ())
    out = []
    for lam, members in basis.groups():
        clean = [s for s in members if not idx or np.max(np.abs(s.amplitudes[idx])) < 1e-14]
        Q = orthonormalize([s.amplitudes for s in members])
        W = Q @ _null_rows(Q[idx]) if idx else Q
        Qc = orthonormalize([s.amplitudes for s in clean])
        kept = orthonormalize(list(Qc.T) + list(W.T))
        kinds = {s.kind for s in members}
        kind = kinds.pop() if len(kinds) == 1 else "mixed"
        tags = [s.kind for s in clean] if Qc.shape[1] == len(clean) else []
        for k, col in enumerate(kept.T):
            out.append(TrappedState(col, lam, tags[k] if k < len(tags) else kind))
    return TrappedBasis(out, basis.graph, basis.flavor)


# -- composite bases --------------------------------------------------------

def pcqw_basis(graph: StateGraph, avoid: Iterable[int] = ()) -> TrappedBasis:
    """A + C1 + C2 states; endpoint choices steer clear of ``avoid``."""
    avoid = set(avoid)
    states = build_A_states(graph) + build_C1_states(graph, avoid) + [build_C2_state(graph, avoid)]
    return TrappedBasis(states, graph, "pcqw")


def cqw_basis(graph: StateGraph, avoid: Iterable[int] = ()) -> TrappedBasis:
    """Known plain-walk families: the percolated basis plus A' and bottom states."""
    base = pcqw_basis(graph, avoid)
    states = base.states + build_Aprime_states(graph) + build_bottom_states(graph)
    return TrappedBasis(states, graph, "cqw")


# -- numerical oracle -------------------------------------------------------

def cluster_eigenvalues(values: np.ndarray, tol: float = CLUSTER_TOL) -> list[np.ndarray]:
    """Index groups of points on the unit circle closer than ``tol`` (chained)."""
    ang = np.angle(values)
    order = np.argsort(ang)
    groups: list[list[int]] = [[int(order[0])]]
    for a, b in zip(order[:-1], order[1:]):
        if abs(values[b] - values[a]) < tol:
            groups[-1].append(int(b))
        else:
            groups.append([int(b)])
    # -1 straddles the branch cut of angle()
    if len(groups) > 1 and abs(values[groups[0][0]] - values[groups[-1][-1]]) < tol:
        groups[0] = groups.pop() + groups[0]
    return [np.array(g) for g in groups]


def pcqw_oracle_matrix(graph: StateGraph) -> np.ndarray:
    """Orthonormal basis of {swap-symmetric} ∩ {zero vertex sums}."""
    E, D = graph.n_edges, graph.dim
    rows = []
    sym = np.zeros((E, D))
    sym[np.arange(E), 2 * np.arange(E)] = 1.0
    sym[np.arange(E), 2 * np.arange(E) + 1] = -1.0
    rows.append(sym)
    sums = np.zeros((graph.n_vertices, D))
    for v in range(graph.n_vertices):
        sums[v, graph.out_states[v]] = 1.0
    rows.append(sums)
    return la.null_space(np.vstack(rows), rcond=SVD_TOL).astype(complex)


def eigenspaces(graph: StateGraph, max_dim: int = ORACLE_MAX_DIM) -> list[tuple[complex, np.ndarray]]:
    """Orthonormal eigenspaces of C*R from a complex Schur form (C*R is normal)."""
    if graph.dim > max_dim:
        raise OracleRefused(f"state space of dimension {graph.dim} exceeds oracle limit {max_dim}")
    U = step_matrix(graph).toarray()
    T, Z = la.schur(U, output="complex")
    vals = np.diag(T)
    out = []
    for g in cluster_eigenvalues(vals):
        lam = complex(vals[g].mean())
        out.append((lam / abs(lam), Z[:, g]))
    return out


def spectral_oracle(graph: StateGraph, flavor: Flavor, max_dim: int = ORACLE_MAX_DIM,
                    spaces: list | None = None) -> TrappedBasis:
    """Numerical trapped basis.

    pcqw: nullspace of the linear constraints, eigenvalue -1.
    cqw: every eigenvector of C*R that is sink-resistant for at least one of
    the standard end sinks (either end's loops, or any single loop-bearing
    end vertex).  Extended eigenvectors touch all of these and drop out.
    """
    if graph.dim > max_dim:
        raise OracleRefused(f"state space of dimension {graph.dim} exceeds oracle limit {max_dim}")
    if flavor == "pcqw":
        Q = pcqw_oracle_matrix(graph)
        return TrappedBasis([TrappedState(q, -1.0, "oracle") for q in Q.T], graph, "pcqw")
    spaces = spaces if spaces is not None else eigenspaces(graph, max_dim)
    sinks = standard_sinks(graph)
    states = []
    for lam, Q in spaces:
        pieces = [Q @ _null_rows(Q[idx]) for idx in sinks]
        span = orthonormalize([c for P in pieces for c in P.T])
        states += [TrappedState(c, lam, "oracle") for c in span.T]
    return TrappedBasis(states, graph, "cqw")


def standard_sinks(graph: StateGraph) -> list[list[int]]:
    out = []
    for end in ("bottom", "top"):
        out.append([graph.loop_of(v) for v in graph.end_loops(end)])
        for v in graph.end_loops(end):
            out.append([int(a) for a in graph.out_states[v]])
    return out


def _null_rows(A: np.ndarray) -> np.ndarray:
    """Right nullspace of A with the absolute singular-value cut SVD_TOL."""
    if A.shape[0] == 0:
        return np.eye(A.shape[1], dtype=complex)
    _, sv, vh = np.linalg.svd(A, full_matrices=True)
    rank = int(np.sum(sv > SVD_TOL))
    return vh[rank:].conj().T


def sr_oracle(graph: StateGraph, sink: Subspace, spaces: list | None = None) -> TrappedBasis:
    """Sink-resistant plain-walk eigenvectors straight from the eigenspaces."""
    spaces = spaces if spaces is not None else eigenspaces(graph)
    idx = list(sink.indices)
    states = []
    for lam, Q in spaces:
        W = Q @ _null_rows(Q[idx])
        states += [TrappedState(c, lam, "oracle") for c in W.T]
    return TrappedBasis(states, graph, "cqw")


def projector(M: np.ndarray) -> np.ndarray:
    return M @ M.conj().T


def span_residual(A: np.ndarray, B: np.ndarray) -> float:
    """max over both directions of ||(I - P_other) x|| for orthonormal columns x."""
    if A.shape[1] == 0 or B.shape[1] == 0:
        return 0.0 if A.shape[1] == B.shape[1] else 1.0
    ra = A - B @ (B.conj().T @ A)
    rb = B - A @ (A.conj().T @ B)
    return float(max(np.linalg.norm(ra, axis=0).max(), np.linalg.norm(rb, axis=0).max()))
