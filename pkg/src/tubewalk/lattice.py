"""Nanotube structure graphs and their 3-regular state graphs.

A tube is cut from the honeycomb lattice spanned by the unit vectors ``a1``
and ``a2`` (60 degrees apart, each joining two sites two bonds apart).  The
chirality vector ``m*a1 + n*a2`` is wrapped into the circumference and the
strip is ``length`` repetitions of the shortest lattice vector orthogonal to
it.  All bookkeeping uses exact integer arithmetic on lattice coordinates
scaled by 3, so the B sublattice offset ``(a1 + a2)/3`` stays integral.

State indices: arc ``2*e`` runs from the lower to the higher endpoint of
edge ``e``, arc ``2*e + 1`` the other way, and loop ``k`` has index
``2*#E + k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

End = Literal["bottom", "top"]
SubspaceKind = Literal["one-vertex", "loops"]

# A(i, j) bonds to B(i, j), B(i-1, j), B(i, j-1)
_A_NEIGHBOURS = ((0, 0), (-1, 0), (0, -1))


class TubeSpecError(ValueError):
    pass


class EmbeddingError(RuntimeError):
    pass


class SubspaceError(ValueError):
    pass


@dataclass(frozen=True)
class TubeSpec:
    m: int
    n: int
    length: int

    def __post_init__(self):
        if self.m < 0 or self.n < 0:
            raise TubeSpecError(f"chirality entries must be non-negative, got ({self.m},{self.n})")
        if (self.m, self.n) == (0, 0):
            raise TubeSpecError("chirality (0,0) spans no circumference")
        if self.length < 1:
            raise TubeSpecError(f"length must be >= 1, got {self.length}")
        if self.is_zigzag and max(self.m, self.n) < 3:
            raise TubeSpecError(f"zig-zag tube ({self.m},{self.n}) is too thin; need k >= 3")
        if self.is_armchair and self.m < 2:
            raise TubeSpecError(f"armchair tube ({self.m},{self.n}) is too thin; need n >= 2")

    @property
    def is_zigzag(self) -> bool:
        return self.m == 0 or self.n == 0

    @property
    def is_armchair(self) -> bool:
        return self.m == self.n

    @property
    def analytic(self) -> bool:
        """True for the (k,0) and (k,k) families with analytic trapped bases."""
        return self.n == 0 or self.is_armchair

    @property
    def label(self) -> str:
        return f"({self.m},{self.n})x{self.length}"

    def translation(self) -> tuple[int, int]:
        """Shortest lattice vector orthogonal to the chirality vector."""
        m, n = self.m, self.n
        d = math.gcd(2 * n + m, 2 * m + n)
        return (2 * n + m) // d, -(2 * m + n) // d


@dataclass(frozen=True)
class Face:
    """Closed walk around one face; ``arcs[i]`` runs ``vertices[i] -> vertices[i+1]``."""

    vertices: tuple[int, ...]
    edges: tuple[int, ...]
    arcs: tuple[int, ...]
    kind: str  # "hexagon", "bottom", "top" or "polygon"

    def __len__(self) -> int:
        return len(self.edges)


@dataclass(frozen=True, eq=False)
class StateGraph:
    spec: TubeSpec
    n_vertices: int
    edges: tuple[tuple[int, int], ...]
    loops: tuple[int, ...]  # vertex carrying each loop
    rotation: tuple[tuple[int, ...], ...]  # counter-clockwise neighbour order
    faces: tuple[Face, ...]  # inner faces, bottom face first
    outer_face: Face
    bottom: tuple[int, ...]
    top: tuple[int, ...]
    heights: tuple[int, ...]  # scaled axial coordinate per vertex
    out_states: np.ndarray = field(repr=False)  # (V, 3) state indices leaving each vertex

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_loops(self) -> int:
        return len(self.loops)

    @property
    def dim(self) -> int:
        return 2 * self.n_edges + self.n_loops

    @property
    def trapped_dim(self) -> int:
        """Dimension 2#V - #E of the percolated walk's trapped subspace."""
        return 2 * self.n_vertices - self.n_edges

    def loop_state(self, k: int) -> int:
        return 2 * self.n_edges + k

    def arc(self, u: int, v: int) -> int:
        """State index of the arc u -> v."""
        e = self._edge_index[(min(u, v), max(u, v))]
        return 2 * e + (0 if u < v else 1)

    def edge_index(self, u: int, v: int) -> int:
        return self._edge_index[(min(u, v), max(u, v))]

    def arc_source(self, a: int) -> int:
        if a >= 2 * self.n_edges:
            return self.loops[a - 2 * self.n_edges]
        u, v = self.edges[a // 2]
        return u if a % 2 == 0 else v

    def neighbours(self, v: int) -> tuple[int, ...]:
        return self.rotation[v]

    def loop_of(self, v: int) -> int | None:
        k = self._loop_index.get(v)
        return None if k is None else self.loop_state(k)

    def end_vertices(self, end: End) -> tuple[int, ...]:
        if end == "bottom":
            return self.bottom
        if end == "top":
            return self.top
        raise SubspaceError(f"unknown end {end!r}")

    def end_loops(self, end: End) -> list[int]:
        """Loop-bearing vertices of one end, in vertex order."""
        ring = set(self.end_vertices(end))
        return [v for v in self.loops if v in ring]

    def boundary_face(self, end: End) -> Face:
        return self.faces[0] if end == "bottom" else self.outer_face

    @property
    def _edge_index(self) -> dict[tuple[int, int], int]:
        cache = self.__dict__.get("_edge_cache")
        if cache is None:
            cache = {e: i for i, e in enumerate(self.edges)}
            object.__setattr__(self, "_edge_cache", cache)
        return cache

    @property
    def _loop_index(self) -> dict[int, int]:
        cache = self.__dict__.get("_loop_cache")
        if cache is None:
            cache = {v: k for k, v in enumerate(self.loops)}
            object.__setattr__(self, "_loop_cache", cache)
        return cache


@dataclass(frozen=True)
class Subspace:
    indices: tuple[int, ...]
    kind: SubspaceKind
    end: End
    vertex: int | None = None

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def label(self) -> str:
        return "vertex" if self.kind == "one-vertex" else "loops"


def _inner(x: tuple[int, int], y: tuple[int, int]) -> int:
    # metric of the 60-degree basis, doubled to stay integral
    return 2 * x[0] * y[0] + x[0] * y[1] + x[1] * y[0] + 2 * x[1] * y[1]


def _cartesian(i3: int, j3: int) -> tuple[float, float]:
    # scaled lattice coordinates -> plane, a1 = (1, 0), a2 = (1/2, sqrt(3)/2)
    return (i3 + 0.5 * j3) / 3.0, (math.sqrt(3) / 2 * j3) / 3.0


def build_nanotube(spec: TubeSpec) -> StateGraph:
    """Build the state graph of a tube.

    Vertices are numbered ring by ring from the bottom end; within a ring by
    position around the circumference.  Vertices left with degree <= 1 by the
    cut are pruned (repeatedly) before loops are attached to the remaining
    degree-2 vertices.
    """
    m, n = spec.m, spec.n
    t1, t2 = spec.translation()
    C = (3 * m, 3 * n)
    T = (3 * t1, 3 * t2)
    cc = _inner(C, C)
    tt = _inner(T, T)
    top_h = spec.length * tt

    def pos(i: int, j: int, s: int) -> tuple[int, int]:
        return 3 * i + s, 3 * j + s

    def reduce(i: int, j: int, s: int) -> tuple[int, int, int]:
        k = _inner(pos(i, j, s), C) // cc
        return i - k * m, j - k * n, s

    # bounding box of the parallelogram spanned by C and length*T
    corners = [(0, 0), (m, n), (spec.length * t1, spec.length * t2),
               (m + spec.length * t1, n + spec.length * t2)]
    i_lo = min(c[0] for c in corners) - 2
    i_hi = max(c[0] for c in corners) + 2
    j_lo = min(c[1] for c in corners) - 2
    j_hi = max(c[1] for c in corners) + 2

    sites: dict[tuple[int, int, int], tuple[int, int]] = {}
    for i in range(i_lo, i_hi + 1):
        for j in range(j_lo, j_hi + 1):
            for s in (0, 1):
                p = pos(i, j, s)
                pc = _inner(p, C)
                pt = _inner(p, T)
                if 0 <= pc < cc and 0 <= pt <= top_h:
                    sites[(i, j, s)] = (pt, pc)

    # adjacency with the unwrapped bond displacement, used for the rotation system
    adj: dict[tuple[int, int, int], dict[tuple[int, int, int], tuple[int, int]]] = {s: {} for s in sites}
    for (i, j, s) in sites:
        if s != 0:
            continue
        for di, dj in _A_NEIGHBOURS:
            raw = (i + di, j + dj, 1)
            nb = reduce(*raw)
            if nb not in sites:
                continue
            a = (i, j, 0)
            if nb == a or nb in adj[a]:
                raise TubeSpecError(f"chirality ({m},{n}) wraps onto itself (multi-edge)")
            d = (3 * raw[0] + 1 - 3 * i, 3 * raw[1] + 1 - 3 * j)
            adj[a][nb] = d
            adj[nb][a] = (-d[0], -d[1])

    pruned = True
    while pruned:
        pruned = False
        for site in [s for s, nbs in adj.items() if len(nbs) <= 1]:
            for nb in adj.pop(site):
                adj[nb].pop(site, None)
            pruned = True

    if not adj:
        raise TubeSpecError(f"tube {spec.label} has no vertices left after pruning")

    order = sorted(adj, key=lambda s: (sites[s][0], sites[s][1], s[2]))
    index = {s: k for k, s in enumerate(order)}
    V = len(order)

    edges = sorted({(min(index[a], index[b]), max(index[a], index[b]))
                    for a in adj for b in adj[a]})
    edge_index = {e: k for k, e in enumerate(edges)}

    rotation = []
    disp: dict[tuple[int, int], tuple[float, float]] = {}
    for s in order:
        u = index[s]
        nbs = []
        for nb, d in adj[s].items():
            x, y = _cartesian(*d)
            disp[(u, index[nb])] = (x, y)
            nbs.append((math.atan2(y, x), index[nb]))
        rotation.append(tuple(v for _, v in sorted(nbs)))

    degrees = [len(r) for r in rotation]
    if max(degrees) > 3:
        raise TubeSpecError(f"tube {spec.label} has a vertex of degree > 3")
    loops = tuple(v for v in range(V) if degrees[v] == 2)

    heights = tuple(sites[s][0] for s in order)
    faces_all = _trace_faces(V, edges, edge_index, rotation)

    wrapping = []
    inner = []
    for verts, eds, arcs in faces_all:
        dx = sum(disp[(verts[k], verts[(k + 1) % len(verts)])][0] for k in range(len(verts)))
        dy = sum(disp[(verts[k], verts[(k + 1) % len(verts)])][1] for k in range(len(verts)))
        if abs(dx) > 0.5 or abs(dy) > 0.5:
            wrapping.append((verts, eds, arcs))
        else:
            inner.append((verts, eds, arcs))
    if len(wrapping) != 2:
        raise EmbeddingError(f"expected 2 boundary faces, found {len(wrapping)}")
    wrapping.sort(key=lambda f: sum(heights[v] for v in f[0]) / len(f[0]))
    bottom_f, top_f = wrapping
    bottom = tuple(sorted(set(bottom_f[0])))
    top = tuple(sorted(set(top_f[0])))
    if set(loops) & set(bottom) & set(top):
        raise TubeSpecError(f"tube {spec.label} is too short: its ends share a loop vertex")
    stray = set(loops) - set(bottom) - set(top)
    if stray:
        raise TubeSpecError(f"degree-2 vertices {sorted(stray)} are not on an open end")

    def make(f, kind):
        verts, eds, arcs = f
        return Face(tuple(verts), tuple(eds), tuple(arcs), kind)

    inner.sort(key=lambda f: (min(f[0]), len(f[0])))
    faces = (make(bottom_f, "bottom"),) + tuple(
        make(f, "hexagon" if len(f[1]) == 6 else "polygon") for f in inner)

    E = len(edges)
    out_states = np.empty((V, 3), dtype=np.intp)
    fill = [0] * V
    for e, (u, v) in enumerate(edges):
        out_states[u, fill[u]] = 2 * e
        fill[u] += 1
        out_states[v, fill[v]] = 2 * e + 1
        fill[v] += 1
    for k, v in enumerate(loops):
        out_states[v, fill[v]] = 2 * E + k
        fill[v] += 1
    out_states.sort(axis=1)
    out_states.setflags(write=False)

    return StateGraph(
        spec=spec,
        n_vertices=V,
        edges=tuple(edges),
        loops=loops,
        rotation=tuple(rotation),
        faces=faces,
        outer_face=make(top_f, "top"),
        bottom=bottom,
        top=top,
        heights=heights,
        out_states=out_states,
    )


def _trace_faces(V, edges, edge_index, rotation):
    """Walk every dart once: after u -> v continue to the neighbour preceding u around v."""
    position = [{w: k for k, w in enumerate(r)} for r in rotation]
    seen: set[tuple[int, int]] = set()
    faces = []
    for u0 in range(V):
        for v0 in rotation[u0]:
            if (u0, v0) in seen:
                continue
            verts, eds, arcs = [], [], []
            u, v = u0, v0
            while True:
                if (u, v) in seen:
                    raise EmbeddingError(f"dart {u}->{v} visited twice")
                seen.add((u, v))
                e = edge_index[(min(u, v), max(u, v))]
                verts.append(u)
                eds.append(e)
                arcs.append(2 * e + (0 if u < v else 1))
                r = rotation[v]
                w = r[(position[v][u] - 1) % len(r)]
                u, v = v, w
                if (u, v) == (u0, v0):
                    break
            faces.append((verts, eds, arcs))
    if len(seen) != 2 * len(edges):
        raise EmbeddingError("face walk did not cover every dart")
    return faces


def enumerate_faces(graph: StateGraph) -> list[Face]:
    """Re-derive the inner faces from the rotation system alone.

    The top boundary is the outer face and is left out.  Faces come back
    bottom face first, then by lowest vertex index.
    """
    edge_index = {e: k for k, e in enumerate(graph.edges)}
    traced = _trace_faces(graph.n_vertices, graph.edges, edge_index, graph.rotation)
    for _, eds, _ in traced:
        if len(eds) % 2:
            raise EmbeddingError(f"odd face of size {len(eds)}")
    top_edges = set(graph.outer_face.edges)
    bottom_edges = set(graph.faces[0].edges)
    faces = []
    bottom = None
    for verts, eds, arcs in traced:
        if set(eds) == top_edges and len(eds) == len(top_edges):
            continue
        if set(eds) == bottom_edges and len(eds) == len(bottom_edges):
            bottom = Face(tuple(verts), tuple(eds), tuple(arcs), "bottom")
            continue
        faces.append(Face(tuple(verts), tuple(eds), tuple(arcs),
                          "hexagon" if len(eds) == 6 else "polygon"))
    if bottom is None:
        raise EmbeddingError("bottom face not found")
    faces.sort(key=lambda f: (min(f.vertices), len(f)))
    return [bottom] + faces


def select_subspace(graph: StateGraph, end: End, kind: SubspaceKind,
                    vertex: int | None = None) -> Subspace:
    ring = graph.end_vertices(end)
    if kind == "loops":
        idx = tuple(sorted(graph.loop_of(v) for v in graph.end_loops(end)))
        return Subspace(idx, "loops", end)
    if kind != "one-vertex":
        raise SubspaceError(f"unknown subspace kind {kind!r}")
    if vertex is None:
        candidates = graph.end_loops(end)
        if not candidates:
            raise SubspaceError(f"{end} end carries no loops")
        vertex = candidates[0]
    if vertex not in ring:
        raise SubspaceError(f"vertex {vertex} is not on the {end} end")
    if graph.loop_of(vertex) is None:
        raise SubspaceError(f"vertex {vertex} carries no loop")
    return Subspace(tuple(int(a) for a in graph.out_states[vertex]), "one-vertex", end, vertex)


def is_bipartite(graph: StateGraph) -> bool:
    colour = [-1] * graph.n_vertices
    colour[0] = 0
    stack = [0]
    while stack:
        u = stack.pop()
        for w in graph.rotation[u]:
            if colour[w] < 0:
                colour[w] = 1 - colour[u]
                stack.append(w)
            elif colour[w] == colour[u]:
                return False
    return min(colour) >= 0


def is_connected(graph: StateGraph) -> bool:
    seen = {0}
    stack = [0]
    while stack:
        for w in graph.rotation[stack.pop()]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == graph.n_vertices


# -- text export ----------------------------------------------------------

EXPORT_HEADER = "# tubewalk-graph 1"


def export_graph(graph: StateGraph) -> str:
    """Line-oriented dump; grammar documented in README.md."""
    s = graph.spec
    bottom, top = set(graph.bottom), set(graph.top)
    lines = [
        EXPORT_HEADER,
        f"spec {s.m} {s.n} {s.length}",
        f"counts {graph.n_vertices} {graph.n_edges} {graph.n_loops} {len(graph.faces)}",
    ]
    for v in range(graph.n_vertices):
        end = "b" if v in bottom else "t" if v in top else "-"
        lines.append(f"v {v} {graph.heights[v]} {end} " + " ".join(map(str, graph.rotation[v])))
    for e, (u, v) in enumerate(graph.edges):
        lines.append(f"e {e} {u} {v}")
    for k, v in enumerate(graph.loops):
        lines.append(f"l {k} {graph.loop_state(k)} {v}")
    for k, f in enumerate(graph.faces + (graph.outer_face,)):
        tag = "o" if f is graph.outer_face else "f"
        lines.append(f"{tag} {k} {f.kind} {len(f)} " + " ".join(map(str, f.vertices)))
    return "\n".join(lines) + "\n"


def parse_export(text: str) -> dict:
    """Read back the fields of an export (used by tests and tooling)."""
    out = {"vertices": [], "edges": [], "loops": [], "faces": [], "outer": None}
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    for ln in lines:
        tok = ln.split()
        tag = tok[0]
        if tag == "spec":
            out["spec"] = TubeSpec(*map(int, tok[1:4]))
        elif tag == "counts":
            out["counts"] = tuple(map(int, tok[1:5]))
        elif tag == "v":
            out["vertices"].append((int(tok[1]), int(tok[2]), tok[3], tuple(map(int, tok[4:]))))
        elif tag == "e":
            out["edges"].append((int(tok[2]), int(tok[3])))
        elif tag == "l":
            out["loops"].append((int(tok[2]), int(tok[3])))
        elif tag in ("f", "o"):
            face = (tok[2], int(tok[3]), tuple(map(int, tok[4:])))
            if tag == "o":
                out["outer"] = face
            else:
                out["faces"].append(face)
        else:
            raise ValueError(f"unknown record {tag!r}")
    return out
