"""Build a traveling front at a chosen speed and look at it.

The front is obtained as the limit of solutions started further and
further in the past from a supersolution, with a subsolution underneath
certifying the ordering.  Afterwards the state is run forward to measure
its speed, the spread of X(t) - ct, and the exponential tail rate.
"""
from kpplab.construct import build_sandwich_front, measure_front, select_sandwich_params
from kpplab.fronts import locate_front
from kpplab.profiles import Nonlinearity, ReactionProfile, square_well_for_eigenvalue
from kpplab.spectral import critical_speed, principal_eigen_line

prof = ReactionProfile(square_well_for_eigenvalue(1.25, 1.0), Nonlinearity("linear_below_theta"))
lam = principal_eigen_line(prof.potential).lambda_
c = 2.3
print(f"lambda = {lam:.6f}, speed window (2, {critical_speed(lam):.4f}), building c = {c}")

params = select_sandwich_params(lam, c, prof)
print(f"gamma = {params.gamma:.6f}, kappa = {params.kappa:.6f}, A = {params.A:.3g}")

state, cert = build_sandwich_front(prof, params, T_build=200.0, strict=False)
print(f"horizons used: {cert.n_used}, converged: {cert.converged}, certificate: {cert.passed}")
print(f"worst ordering violation: {max(cert.upper_ratio, cert.lower_ratio):.2f} tol (allowed 10)")
print(f"front position at t = 0: {locate_front(state.u, state.grid):.3f}")

m = measure_front(state, prof, c, 40.0, back_trace=cert.trace)
print(f"measured speed {m['c_hat']:.4f}, spread of X - ct {m['X_minus_ct_spread']:.2f}")
print(f"tail rate {m['tail_rate']:.4f} vs predicted {m['r_minus']:.4f}")
