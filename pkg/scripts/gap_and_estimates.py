"""Loops-to-loops averaged ATP against the closed-form chirality estimates,
and the plain/percolated gap on (2n,0) tubes against 1/(4n)."""

from tubewalk.lattice import TubeSpec
from tubewalk.transport import analyze_tube, chirality_estimate

print("chirality  L   q(pcqw)   estimate  q(cqw)    gap       1/(4n)")
for m, n in [(3, 0), (4, 0), (5, 0), (6, 0), (8, 0), (2, 2), (3, 3), (4, 4)]:
    est = chirality_estimate(TubeSpec(m, n, 1))
    for L in (2, 4, 8):
        pc, cq = analyze_tube(TubeSpec(m, n, L), ["ll"], ["pcqw", "cqw"])
        gap = pc.averaged_atp - cq.averaged_atp
        ref = f"{1 / (2 * m):.6f}" if n == 0 and m % 2 == 0 else "-"
        print(f"({m},{n})     {L:2d}  {pc.averaged_atp:.6f}  {est:.6f}  {cq.averaged_atp:.6f}  {gap:.6f}  {ref}")
