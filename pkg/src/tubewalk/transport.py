"""Asymptotic transport probability (ATP) from sink-resistant trapped states.

The walker that never reaches the sink ends up in the span of the
sink-resistant trapped states, so the trapping probability of an initial
state is its weight on that span and ATP = 1 - weight.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Literal, Sequence

import numpy as np

from .lattice import StateGraph, Subspace, TubeSpec, build_nanotube, select_subspace
from .trapped import (
    ORACLE_MAX_DIM, Flavor, cqw_basis, eigenspaces,
    filter_sink_resistant, loop_ring, orthonormalize, pcqw_basis, spectral_oracle, sr_oracle,
)
from .walk import MixedState, Percolation, WalkSetup, norm_sq, pcqw_trajectories, step_cqw

RegimeCode = Literal["vv", "vl", "lv", "ll"]

REGIMES: dict[str, tuple[str, str, str]] = {
    "vv": ("one-vertex", "one-vertex", "vertex-to-vertex"),
    "vl": ("one-vertex", "loops", "vertex-to-loops"),
    "lv": ("loops", "one-vertex", "loops-to-vertex"),
    "ll": ("loops", "loops", "loops-to-loops"),
}

CSV_COLUMNS = ["m", "n", "length", "regime", "flavor", "averagedATP", "maxATP",
               "trappedDim", "srDim", "method"]


class NonOrthonormalBasis(ValueError):
    pass


@dataclass(frozen=True)
class TransportRegime:
    source: Subspace
    sink: Subspace
    code: str

    def __post_init__(self):
        if set(self.source.indices) & set(self.sink.indices):
            raise ValueError("source and sink overlap")

    @property
    def label(self) -> str:
        return REGIMES[self.code][2]


def make_regime(graph: StateGraph, code: str, source_vertex: int | None = None,
                sink_vertex: int | None = None) -> TransportRegime:
    if code not in REGIMES:
        raise ValueError(f"unknown regime {code!r}; choose from {sorted(REGIMES)}")
    src_kind, sink_kind, _ = REGIMES[code]
    src = select_subspace(graph, "bottom", src_kind, source_vertex)
    sink = select_subspace(graph, "top", sink_kind, sink_vertex)
    return TransportRegime(src, sink, code)


# -- ATP from a sink-resistant basis ----------------------------------------

def check_orthonormal(B: np.ndarray, tol: float = 1e-8) -> None:
    if B.shape[1] == 0:
        return
    dev = np.abs(B.conj().T @ B - np.eye(B.shape[1])).max()
    if dev > tol:
        raise NonOrthonormalBasis(f"Gram matrix deviates from identity by {dev:.2e}")


def atp_exact(initial: MixedState, sr: np.ndarray) -> float:
    """1 - sum_i <phi_i|rho|phi_i> for orthonormal columns phi_i of ``sr``."""
    check_orthonormal(sr)
    overlaps = initial.states.conj() @ sr  # (k, r)
    return float(1.0 - initial.weights @ np.sum(np.abs(overlaps) ** 2, axis=1))


def averaged_atp(regime: TransportRegime, sr: np.ndarray) -> float:
    """ATP of the maximally mixed state on the source subspace."""
    check_orthonormal(sr)
    S = list(regime.source.indices)
    return float(1.0 - np.sum(np.abs(sr[S]) ** 2) / len(S))


def max_atp(regime: TransportRegime, sr: np.ndarray, dim: int | None = None) -> tuple[float, np.ndarray]:
    """Largest ATP over pure source states and the state reaching it.

    Minimises <psi|P_sr|psi> over unit psi in the source subspace, i.e. the
    smallest eigenvalue of the compressed projector.
    """
    check_orthonormal(sr)
    S = list(regime.source.indices)
    dim = sr.shape[0] if dim is None else dim
    psi = np.zeros(dim, dtype=complex)
    if sr.shape[1] == 0:
        psi[S[0]] = 1.0
        return 1.0, psi
    B = sr[S]
    w, v = np.linalg.eigh(B @ B.conj().T)
    psi[S] = v[:, 0]
    return float(1.0 - max(w[0], 0.0)), psi


def chirality_estimate(spec: TubeSpec) -> float:
    """Loops-to-loops ATP estimate from the neighbouring-loop path states alone.

    Each bottom loop sits on two short path states; a normalised state with
    s non-zero entries holds 1/s of a loop's weight.
    """
    if not spec.analytic:
        raise ValueError(f"no estimate for chiral tube ({spec.m},{spec.n})")
    g = build_nanotube(TubeSpec(spec.m, spec.n, max(spec.length, 1)))
    paths = loop_ring(g, "bottom")
    weight = {v: 0.0 for v in g.end_loops("bottom")}
    for p in paths:
        size = 2 * (len(p) - 1) + 2
        weight[p[0]] += 1.0 / size
        weight[p[-1]] += 1.0 / size
    return 1.0 - float(np.mean(list(weight.values())))


CLOSED_FORM = {"zigzag": 1.0 - (1 / 6 + 1 / 6), "armchair": 1.0 - (1 / 4 + 1 / 8)}


# -- sr bases per setting ----------------------------------------------------

@dataclass
class SrResult:
    basis: np.ndarray  # orthonormal columns
    trapped_dim: int
    method: str
    analytic_dim: int
    oracle_dim: int | None = None


def sr_basis(graph: StateGraph, regime: TransportRegime, flavor: Flavor,
             use_oracle: bool = True, max_dim: int = ORACLE_MAX_DIM,
             spaces: list | None = None, oracle_dim: int | None = None) -> SrResult:
    """Orthonormal sink-resistant trapped basis for one setting.

    Percolated walks use the analytic basis.  The plain walk compares the
    analytic families with the spectral oracle and falls back to the oracle
    whenever the trapped dimensions differ.
    """
    avoid = [v for v in (regime.sink.vertex,) if v is not None]
    if flavor == "pcqw":
        basis = pcqw_basis(graph, avoid)
        sr = filter_sink_resistant(basis, regime.sink).matrix()
        return SrResult(sr, graph.trapped_dim, "analytic", graph.trapped_dim)
    if flavor != "cqw":
        raise ValueError(f"unknown flavor {flavor!r}")
    analytic = cqw_basis(graph, avoid)
    analytic_dim = orthonormalize([s.amplitudes for s in analytic.states]).shape[1]
    if not use_oracle or graph.dim > max_dim:
        sr = filter_sink_resistant(analytic, regime.sink).matrix()
        return SrResult(sr, analytic_dim, "analytic", analytic_dim)
    if spaces is None:
        spaces = eigenspaces(graph, max_dim)
    if oracle_dim is None:
        oracle_dim = len(spectral_oracle(graph, "cqw", max_dim, spaces=spaces))
    if oracle_dim == analytic_dim:
        sr = filter_sink_resistant(analytic, regime.sink).matrix()
        return SrResult(sr, analytic_dim, "analytic", analytic_dim, oracle_dim)
    sr = sr_oracle(graph, regime.sink, spaces).matrix()
    return SrResult(sr, oracle_dim, "oracle", analytic_dim, oracle_dim)


@dataclass
class TransportReport:
    spec: TubeSpec
    regime: str
    flavor: str
    averaged_atp: float
    max_atp: float
    max_state: np.ndarray = field(repr=False)
    trapped_dim: int
    sr_dim: int
    method: str
    error: str = ""

    def __post_init__(self):
        if not self.error:
            assert -1e-9 <= self.averaged_atp <= self.max_atp + 1e-9 <= 1 + 2e-9
            assert self.sr_dim <= self.trapped_dim

    def row(self) -> dict:
        return {
            "m": self.spec.m, "n": self.spec.n, "length": self.spec.length,
            "regime": self.regime, "flavor": self.flavor,
            "averagedATP": f"{self.averaged_atp:.12f}" if not self.error else "",
            "maxATP": f"{self.max_atp:.12f}" if not self.error else "",
            "trappedDim": self.trapped_dim, "srDim": self.sr_dim,
            "method": self.method if not self.error else f"error: {self.error}",
        }

    def to_json(self) -> str:
        d = self.row()
        d["averagedATP"] = self.averaged_atp
        d["maxATP"] = self.max_atp
        d["maxState"] = [[int(i), float(a.real), float(a.imag)]
                         for i, a in enumerate(self.max_state) if abs(a) > 1e-14]
        d["regimeName"] = REGIMES[self.regime][2]
        d["error"] = self.error
        return json.dumps(d, indent=1)


def analyze(spec: TubeSpec, regime: str, flavor: Flavor, use_oracle: bool = True,
            max_dim: int = ORACLE_MAX_DIM) -> TransportReport:
    return analyze_tube(spec, [regime], [flavor], use_oracle, max_dim)[0]


def analyze_tube(spec: TubeSpec, regimes: Sequence[str], flavors: Sequence[str],
                 use_oracle: bool = True, max_dim: int = ORACLE_MAX_DIM) -> list[TransportReport]:
    """Reports for every (regime, flavor) pair on one tube, flavor-major.

    The graph and the plain-walk eigenspaces are computed once.
    """
    g = build_nanotube(spec)
    spaces = oracle_dim = None
    if "cqw" in flavors and use_oracle and g.dim <= max_dim:
        spaces = eigenspaces(g, max_dim)
        oracle_dim = len(spectral_oracle(g, "cqw", max_dim, spaces=spaces))
    out = []
    for flavor in flavors:
        for code in regimes:
            reg = make_regime(g, code)
            res = sr_basis(g, reg, flavor, use_oracle, max_dim, spaces, oracle_dim)
            avg = averaged_atp(reg, res.basis)
            mx, psi = max_atp(reg, res.basis, g.dim)
            out.append(TransportReport(spec, code, flavor, avg, mx, psi, res.trapped_dim,
                                       res.basis.shape[1], res.method))
    return out


def sweep(specs: Sequence[TubeSpec], regimes: Sequence[str], flavors: Sequence[str],
          workers: int = 1, use_oracle: bool = True,
          max_dim: int = ORACLE_MAX_DIM) -> list[TransportReport]:
    """Reports over a grid in (spec, flavor, regime) order.

    A failing tube yields error rows and the sweep carries on.
    """
    def one(spec):
        try:
            return analyze_tube(spec, regimes, flavors, use_oracle, max_dim)
        except Exception as err:  # recorded per row
            return [failed_report(spec, r, f, err) for f in flavors for r in regimes]

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            chunks = list(pool.map(one, specs))
    else:
        chunks = [one(s) for s in specs]
    return [r for c in chunks for r in c]


def failed_report(spec: TubeSpec, regime: str, flavor: str, err: Exception) -> TransportReport:
    return TransportReport(spec, regime, flavor, float("nan"), float("nan"), np.zeros(0),
                           0, 0, "error", error=f"{type(err).__name__}: {err}")


def reports_to_csv(reports: list[TransportReport]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, CSV_COLUMNS + ["error"], lineterminator="\n")
    w.writeheader()
    for r in reports:
        row = r.row()
        row["error"] = r.error
        w.writerow(row)
    return buf.getvalue()


# -- simulation cross-check --------------------------------------------------

@dataclass
class SimulatedATP:
    atp: float
    stderr: float | None
    converged: bool
    steps: int
    trajectories: int = 0


def atp_via_simulation(initial: MixedState, setup: WalkSetup, horizon: int,
                       tolerance: float = 1e-3, window: int = 100,
                       trajectories: int = 1000, workers: int = 1) -> SimulatedATP:
    """ATP by running the walk.

    Plain walk: step until survival drops by less than ``tolerance`` over
    ``window`` steps, then report 1 - mean survival over that window.
    Percolated walk: ``trajectories`` sampled runs of ``horizon`` steps;
    ATP is 1 - mean final survival with its standard error.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if setup.percolation.active:
        curves = pcqw_trajectories(initial, setup, horizon, trajectories, workers=workers)
        final = curves[:, -1]
        mean_curve = curves.mean(axis=0)
        lo = max(0, horizon - window)
        converged = bool(mean_curve[lo] - mean_curve[-1] < tolerance)
        err = float(final.std(ddof=1) / np.sqrt(trajectories)) if trajectories > 1 else None
        return SimulatedATP(float(1.0 - final.mean()), err, converged, horizon, trajectories)
    psi = initial.states.copy()
    surv = [initial.trace()]
    for t in range(1, horizon + 1):
        psi = step_cqw(psi, setup)
        surv.append(float(initial.weights @ norm_sq(psi)))
        if t >= window and surv[t - window] - surv[t] < tolerance:
            tail = np.mean(surv[t - window:t + 1])
            return SimulatedATP(float(1.0 - tail), None, True, t)
    tail = np.mean(surv[-(window + 1):])
    return SimulatedATP(float(1.0 - tail), None, False, horizon)


def regime_setup(graph: StateGraph, regime: TransportRegime, flavor: Flavor,
                 p: float = 0.5, seed: int = 0) -> WalkSetup:
    perc = Percolation(p) if flavor == "pcqw" else Percolation()
    return WalkSetup(graph, regime.sink, perc, seed)


def report_dict(report: TransportReport) -> dict:
    d = asdict(report)
    d.pop("max_state")
    d["spec"] = asdict(report.spec)
    return d
