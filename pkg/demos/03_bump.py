"""A growing bump above the front threshold.

When lambda > 2 no front exists.  Instead there is a solution that,
in the far past, looks like C exp(lambda t) psi(x), with psi the principal
eigenfunction.  The script builds it, checks that C_n exp(lambda n)
settles, measures the growth rate, and watches the bump spread once it
saturates.
"""
import numpy as np

from kpplab.construct import build_bump, verify_decay_bound
from kpplab.pde import BoundarySpec, Grid1D, SimulationState, run
from kpplab.profiles import Nonlinearity, ReactionProfile, square_well
from kpplab.spectral import principal_eigen_line

prof = ReactionProfile(square_well(3.0, 1.0), Nonlinearity("linear_below_theta"))
sp = principal_eigen_line(prof.potential)
print(f"lambda = {sp.lambda_:.6f}")

result = build_bump(prof, sp)
for (n, _), z in zip(result.C_sequence, result.normalized):
    print(f"  horizon {n:3d}: C_n exp(lambda n) = {z:.7f}")

report = verify_decay_bound(result, 2.1, sp.lambda_)
print(f"u <= C exp(-|x| + 2.1 t) holds with C = {report.C:.4f} (stable: {report.stable})")

grid = Grid1D.from_bounds(-100.0, 100.0, 0.1)
u0 = np.interp(grid.x, result.x, result.final_field, left=0.0, right=0.0)
_, trace = run(SimulationState(grid, u0), prof, BoundarySpec.reflecting(), None, 20.0,
               sample_interval=5.0)
for t, w in zip(trace.t, trace.width(0.1)):
    print(f"  t = {t:5.1f}: width of {{u > 0.1}} = {w:6.2f}")
