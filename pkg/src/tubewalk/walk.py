"""Grover coined walks with a flip-flop shift, plain and dynamically percolated.

States are complex numpy vectors over the state graph's arcs and loops.  The
last axis is always the state axis, so a stack of states of shape
``(..., dim)`` moves through every operator in one call.
"""

from __future__ import annotations

import csv
import io
import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .lattice import StateGraph, Subspace

GROVER3 = np.array([[-1, 2, 2], [2, -1, 2], [2, 2, -1]], dtype=float) / 3.0

DEFAULT_P = 0.5


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class Percolation:
    """Independent per-edge Bernoulli(p) opening; ``p=None`` means no percolation."""

    p: float | None = None

    def __post_init__(self):
        if self.p is not None and not 0.0 < self.p < 1.0:
            raise ValueError(f"open probability must lie strictly inside (0, 1), got {self.p}")

    @property
    def active(self) -> bool:
        return self.p is not None


@dataclass(frozen=True, eq=False)
class WalkSetup:
    graph: StateGraph
    sink: Subspace | None = None
    percolation: Percolation = field(default_factory=Percolation)
    seed: int = 0

    def __post_init__(self):
        if self.sink is not None and self.sink.indices:
            if min(self.sink.indices) < 0 or max(self.sink.indices) >= self.graph.dim:
                raise DimensionError("sink indices out of range")

    @property
    def sink_indices(self) -> np.ndarray:
        if self.sink is None:
            return np.empty(0, dtype=np.intp)
        return np.asarray(self.sink.indices, dtype=np.intp)


@dataclass
class MixedState:
    """Finite ensemble of (weight, pure state) pairs."""

    weights: np.ndarray
    states: np.ndarray  # (k, dim)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.states = np.atleast_2d(np.asarray(self.states, dtype=complex))
        if len(self.weights) != len(self.states):
            raise ValueError("one weight per state required")
        if np.any(self.weights < 0) or self.weights.sum() > 1 + 1e-12:
            raise ValueError("weights must be non-negative and sum to at most 1")

    @classmethod
    def pure(cls, psi: np.ndarray) -> "MixedState":
        return cls(np.ones(1), np.asarray(psi, dtype=complex)[None, :])

    @classmethod
    def maximally_mixed(cls, subspace: Subspace, dim: int) -> "MixedState":
        k = len(subspace)
        states = np.zeros((k, dim), dtype=complex)
        states[np.arange(k), list(subspace.indices)] = 1.0
        return cls(np.full(k, 1.0 / k), states)

    def trace(self) -> float:
        return float(self.weights @ np.sum(np.abs(self.states) ** 2, axis=1))

    def density(self) -> np.ndarray:
        return np.einsum("k,ki,kj->ij", self.weights, self.states, self.states.conj())


def uniform_on(subspace: Subspace, dim: int) -> np.ndarray:
    """Equal superposition of the states of a subspace."""
    psi = np.zeros(dim, dtype=complex)
    psi[list(subspace.indices)] = 1.0 / np.sqrt(len(subspace))
    return psi


def _check(state: np.ndarray, graph: StateGraph) -> np.ndarray:
    state = np.asarray(state)
    if state.shape[-1] != graph.dim:
        raise DimensionError(f"state has dimension {state.shape[-1]}, graph needs {graph.dim}")
    return state


def apply_coin(state: np.ndarray, graph: StateGraph) -> np.ndarray:
    """Grover reflection inside every vertex subspace."""
    state = _check(state, graph)
    out = np.empty(state.shape, dtype=np.result_type(state, float))
    blocks = state[..., graph.out_states]  # (..., V, 3)
    mean2 = (2.0 / 3.0) * blocks.sum(axis=-1, keepdims=True)
    out[..., graph.out_states] = mean2 - blocks
    return out


def open_mask(graph: StateGraph, open_edges=None) -> np.ndarray:
    """Boolean mask over edges from None (all open), a mask, or edge indices."""
    E = graph.n_edges
    if open_edges is None:
        return np.ones(E, dtype=bool)
    arr = np.asarray(open_edges)
    if arr.dtype == bool:
        if arr.shape != (E,):
            raise DimensionError(f"edge mask has shape {arr.shape}, expected ({E},)")
        return arr
    mask = np.zeros(E, dtype=bool)
    mask[arr.astype(np.intp)] = True
    return mask


def shift_permutation(graph: StateGraph, open_edges: np.ndarray | None = None) -> np.ndarray:
    """Index map of the flip-flop shift; closed edges and loops stay put."""
    perm = np.arange(graph.dim)
    e = np.flatnonzero(open_mask(graph, open_edges))
    perm[2 * e] = 2 * e + 1
    perm[2 * e + 1] = 2 * e
    return perm


def apply_shift(state: np.ndarray, graph: StateGraph, open_edges=None) -> np.ndarray:
    """Swap the two arc amplitudes of every open edge.

    ``open_edges`` is None (all open), a boolean mask over edges, or a list of
    edge indices.
    """
    state = _check(state, graph)
    return state[..., shift_permutation(graph, open_edges)]


def _shift_masked(states: np.ndarray, is_open: np.ndarray) -> np.ndarray:
    """Per-row shift for a batch: ``states`` (B, k, dim), ``is_open`` (B, E)."""
    E = is_open.shape[-1]
    arcs = states[..., : 2 * E].reshape(states.shape[:-1] + (E, 2))
    swapped = np.where(is_open[:, None, :, None], arcs[..., ::-1], arcs)
    out = states.copy()
    out[..., : 2 * E] = swapped.reshape(states.shape[:-1] + (2 * E,))
    return out


def project_out(state: np.ndarray, sink: np.ndarray) -> np.ndarray:
    if len(sink):
        state = state.copy()
        state[..., sink] = 0.0
    return state


def step_cqw(state: np.ndarray, setup: WalkSetup) -> np.ndarray:
    """One step of the plain walk: shift, coin, then remove the sink part."""
    if setup.percolation.active:
        raise ValueError("setup is percolated; use step_pcqw_sampled")
    g = setup.graph
    return project_out(apply_coin(apply_shift(state, g), g), setup.sink_indices)


def sample_open_edges(graph: StateGraph, p: float, rng: np.random.Generator) -> np.ndarray:
    return rng.random(graph.n_edges) < p


def step_pcqw_sampled(state: np.ndarray, setup: WalkSetup, rng: np.random.Generator) -> np.ndarray:
    """One realisation of a percolated step with a freshly sampled open-edge set."""
    if not setup.percolation.active:
        raise ValueError("setup is not percolated")
    g = setup.graph
    K = sample_open_edges(g, setup.percolation.p, rng)
    return project_out(apply_coin(apply_shift(state, g, K), g), setup.sink_indices)


def step_matrix(graph: StateGraph, open_edges=None) -> sp.csr_matrix:
    """Sparse C*R_K (no sink)."""
    D = graph.dim
    rows = np.repeat(graph.out_states, 3, axis=1).ravel()
    cols = np.tile(graph.out_states, (1, 3)).ravel()
    vals = np.tile(GROVER3.ravel(), graph.n_vertices)
    coin = sp.csr_matrix((vals, (rows, cols)), shape=(D, D))
    perm = shift_permutation(graph, open_edges)
    shift = sp.csr_matrix((np.ones(D), (np.arange(D), perm)), shape=(D, D))
    return (coin @ shift).tocsr()


# -- survival traces --------------------------------------------------------

@dataclass
class SurvivalTrace:
    survival: np.ndarray
    stderr: np.ndarray | None = None
    trajectories: int = 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "survival", "stderr"])
        for t, s in enumerate(self.survival):
            err = "" if self.stderr is None else repr(float(self.stderr[t]))
            w.writerow([t, repr(float(s)), err])
        return buf.getvalue()


def _cqw_survival(initial: MixedState, setup: WalkSetup, steps: int) -> np.ndarray:
    psi = initial.states.copy()
    out = np.empty(steps + 1)
    out[0] = initial.trace()
    for t in range(1, steps + 1):
        psi = step_cqw(psi, setup)
        out[t] = initial.weights @ np.sum(np.abs(psi) ** 2, axis=-1)
    return out


def _trajectory_block(initial: MixedState, setup: WalkSetup, steps: int,
                      first: int, count: int) -> np.ndarray:
    """Survival curves (count, steps+1) of trajectories first..first+count-1.

    Trajectory ``i`` draws its open-edge sets from its own generator seeded
    by ``(seed, i)``, so results do not depend on how trajectories are
    grouped into blocks or workers.
    """
    g = setup.graph
    E, D = g.n_edges, g.dim
    p = setup.percolation.p
    order = g.out_states.ravel()
    inv = np.empty_like(order)
    inv[order] = np.arange(D)
    sink = setup.sink_indices
    # the walk is real, so real and imaginary parts evolve separately
    parts, weights = [initial.states.real], [initial.weights]
    if np.any(initial.states.imag):
        parts.append(initial.states.imag)
        weights.append(initial.weights)
    start = np.concatenate(parts)
    weights = np.concatenate(weights)
    psi = np.broadcast_to(start, (count,) + start.shape).copy()
    pairs = psi[..., : 2 * E].reshape(count, -1, E, 2)
    rngs = [np.random.default_rng([setup.seed, i]) for i in range(first, first + count)]
    out = np.empty((count, steps + 1))
    out[:, 0] = initial.trace()
    chunk = 64
    t = 0
    while t < steps:
        n_t = min(chunk, steps - t)
        draws = (np.stack([r.random((n_t, E)) for r in rngs]) < p).astype(float)
        for s in range(n_t):
            # flip-flop on open edges: a0 += o (a1 - a0), a1 -= o (a1 - a0)
            a0, a1 = pairs[..., 0], pairs[..., 1]
            delta = (a1 - a0) * draws[:, None, s, :]
            a0 += delta
            a1 -= delta
            blocks = np.take(psi, order, axis=-1).reshape(-1, 3) @ GROVER3
            psi[...] = np.take(blocks.reshape(psi.shape), inv, axis=-1)
            psi[..., sink] = 0.0
            t += 1
            out[:, t] = np.einsum("bkd,bkd->bk", psi, psi) @ weights
    return out


def pcqw_trajectories(initial: MixedState, setup: WalkSetup, steps: int,
                      trajectories: int, block: int = 256, workers: int = 1) -> np.ndarray:
    """Per-trajectory survival curves of the percolated walk, shape (trajectories, steps+1)."""
    if not setup.percolation.active:
        raise ValueError("setup is not percolated")
    starts = list(range(0, trajectories, block))
    sizes = [min(block, trajectories - s) for s in starts]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda a: _trajectory_block(initial, setup, steps, *a),
                                  zip(starts, sizes)))
    else:
        parts = [_trajectory_block(initial, setup, steps, s, c) for s, c in zip(starts, sizes)]
    return np.concatenate(parts, axis=0)


def survival_trace(initial: MixedState, setup: WalkSetup, steps: int,
                   trajectories: int = 1000, workers: int = 1) -> SurvivalTrace:
    """Probability p(t) of not yet having hit the sink, t = 0..steps.

    Exact for the plain walk; a trajectory average with standard errors for
    the percolated one.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if not setup.percolation.active:
        return SurvivalTrace(_cqw_survival(initial, setup, steps))
    curves = pcqw_trajectories(initial, setup, steps, trajectories, workers=workers)
    err = curves.std(axis=0, ddof=1) / np.sqrt(trajectories) if trajectories > 1 else np.zeros(steps + 1)
    return SurvivalTrace(curves.mean(axis=0), err, trajectories)


def exact_channel_survival(initial: MixedState, setup: WalkSetup, steps: int,
                           max_configs: int = 1 << 16, chunk: int = 2048) -> np.ndarray:
    """Density-operator iteration of the percolated channel by summing over
    every open-edge configuration.  Only for desk-sized tubes."""
    g = setup.graph
    E = g.n_edges
    if 2 ** E > max_configs:
        raise ValueError(f"{2 ** E} configurations exceed the limit {max_configs}")
    p = setup.percolation.p
    D = g.dim
    configs = np.array(list(itertools.product((False, True), repeat=E)), dtype=bool)
    n_open = configs.sum(axis=1)
    probs = p ** n_open * (1 - p) ** (E - n_open)
    perms = np.tile(np.arange(D), (len(configs), 1))
    for e in range(E):
        o = configs[:, e]
        perms[o, 2 * e], perms[o, 2 * e + 1] = 2 * e + 1, 2 * e
    coin = coin_matrix(g)
    keep = np.ones(D)
    keep[setup.sink_indices] = 0.0
    rho = initial.density()
    out = np.empty(steps + 1)
    out[0] = np.real(np.trace(rho))
    for t in range(1, steps + 1):
        avg = np.zeros_like(rho)
        for lo in range(0, len(configs), chunk):
            P = perms[lo:lo + chunk]
            # (R_K rho R_K)_{ab} = rho_{perm(a) perm(b)}
            avg += np.einsum("k,kab->ab", probs[lo:lo + chunk], rho[P[:, :, None], P[:, None, :]])
        rho = coin @ avg @ coin.T
        rho = keep[:, None] * rho * keep[None, :]
        out[t] = np.real(np.trace(rho))
    return out


def averaged_channel_survival(initial: MixedState, setup: WalkSetup, steps: int) -> np.ndarray:
    """Mean survival of the percolated walk without sampling.

    Edges open independently, so E_K[R_K rho R_K] mixes rho with its
    row-swapped, column-swapped and doubly swapped copies; entries whose row
    and column sit on the same edge see one coin flip instead of two.
    """
    if not setup.percolation.active:
        raise ValueError("setup is not percolated")
    g = setup.graph
    p = setup.percolation.p
    q = 1.0 - p
    D = g.dim
    sigma = np.arange(D)
    sigma[0:2 * g.n_edges:2] += 1
    sigma[1:2 * g.n_edges:2] -= 1
    owner = np.arange(D)
    owner[: 2 * g.n_edges] //= 2
    owner[2 * g.n_edges:] += D  # loops never share an edge with anything
    same = owner[:, None] == owner[None, :]
    coin = coin_matrix(g)
    keep = np.ones(D)
    keep[setup.sink_indices] = 0.0
    rho = initial.density()
    out = np.empty(steps + 1)
    out[0] = np.real(np.trace(rho))
    for t in range(1, steps + 1):
        both = rho[np.ix_(sigma, sigma)]
        avg = p * p * both + p * q * (rho[sigma, :] + rho[:, sigma]) + q * q * rho
        avg[same] = p * both[same] + q * rho[same]
        rho = coin @ avg @ coin.T
        rho = keep[:, None] * rho * keep[None, :]
        out[t] = np.real(np.trace(rho))
    return out


def norm_sq(state: np.ndarray) -> np.ndarray:
    return np.sum(np.abs(state) ** 2, axis=-1)


def coin_matrix(graph: StateGraph) -> np.ndarray:
    # rows of the result are images of basis vectors; the coin is symmetric
    return apply_coin(np.eye(graph.dim), graph)


def random_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)
