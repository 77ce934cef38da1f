"""Ring-confined plain-walk eigenvectors at lambda = (1 - i sqrt 8)/3 on (2n,0) tubes."""

import numpy as np

from tubewalk.lattice import TubeSpec, build_nanotube, select_subspace
from tubewalk.trapped import BOTTOM_EIGENVALUE, build_bottom_states, eigenspaces, filter_sink_resistant, TrappedBasis

x, y = abs(-2 + 1j * np.sqrt(8)), abs(1 + 1j * np.sqrt(8))
for k in (4, 6, 8):
    for L in (1, 2, 3):
        g = build_nanotube(TubeSpec(k, 0, L))
        states = build_bottom_states(g)
        s = states[0].amplitudes
        mags = np.unique(np.round(np.abs(s[np.abs(s) > 1e-12]), 10))
        ratio = mags.max() / mags.min()
        lam = [Q for lam, Q in eigenspaces(g) if abs(lam - BOTTOM_EIGENVALUE) < 1e-8]
        mult = lam[0].shape[1] if lam else 0
        sink = select_subspace(g, "top", "loops")
        sr = filter_sink_resistant(TrappedBasis(
            [type(states[0])(q, BOTTOM_EIGENVALUE, "oracle") for q in lam[0].T], g, "cqw"), sink) if lam else []
        print(f"({k},0) L={L}: support {len(s[np.abs(s) > 1e-12])}, magnitude ratio {ratio:.6f} "
              f"(|x|/|y| = {x / y:.6f}), multiplicity {mult}, sink-resistant {len(sr)}")
