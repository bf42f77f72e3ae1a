"""Where does the localized medium stop supporting fronts?

A square well of half width 1 sitting on a = 1 raises the principal
eigenvalue lambda of d^2/dx^2 + a(x) above 1.  Fronts with speeds in
(2, lambda / sqrt(lambda - 1)) can exist only while lambda < 2.  This
script scans the well height, prints lambda and the speed window, and
locates the height where the window closes.
"""
import math

from scipy.optimize import brentq

from kpplab.profiles import square_well
from kpplab.spectral import critical_speed, principal_eigen_line


def lam(h):
    return principal_eigen_line(square_well(h, 1.0)).lambda_


print(f"{'height':>8} {'lambda':>10} {'window':>22}")
for h in (0.5, 1.0, 1.5, 1.7, 1.8, 2.5, 3.0):
    value = lam(h)
    window = f"(2, {critical_speed(value):.4f})" if value < 2 else "empty"
    print(f"{h:8.2f} {value:10.6f} {window:>22}")

h_star = brentq(lambda h: lam(h) - 2.0, 1.5, 2.0, xtol=1e-10)
s = brentq(lambda s: s * math.tan(s) - 1.0, 1e-9, math.pi / 2 - 1e-9)
print(f"\nnumerical threshold h* = {h_star:.8f}")
print(f"closed form 1 + s^2 with s tan s = 1: {1 + s * s:.8f}")
