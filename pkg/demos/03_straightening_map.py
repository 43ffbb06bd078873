#!/usr/bin/env python3
"""The signed-distance straightening map T onto the tangent cone.

T matches signed distances to curved boundary surfaces with signed
distances to their tangent planes: it fixes the origin to second order
(JT(0) = I, |Tx - x| = O(|x|^2)) and transports Laplacians with an error
controlled by first derivatives, which is what lets cone asymptotics be
read off curved corners.
"""

import numpy as np

from blowlab import (
    apply_T,
    build_T,
    jacobian_T,
    paraboloid_surface,
    plane_surface,
    signed_distance,
    sphere_surface,
)

print("=== unit sphere through 0 (inward normal e3) ===")
sp = sphere_surface(3, 1.0)
T = build_T([sp])
print(f"  straightening radius r_T = {T.r_T:.4f}")
x = np.array([0.0, 0.0, 0.2])
print(f"  T(0.2 e3) = {apply_T(T, x)}   (axial points stay put)")
x = np.array([0.1, 0.0, 0.1])
xb = apply_T(T, x)
print(f"  d_S(x) = {signed_distance(sp, x):.10f} vs d_P(Tx) = {xb[2]:.10f}")
J = jacobian_T(T, np.zeros(3))
print(f"  max |JT(0) - I| = {np.max(np.abs(J - np.eye(3))):.2e}")

print("\n=== quadratic deviation |Tx - x| ~ C|x|^2 along a ray ===")
ray = np.array([0.5, 0.2, 0.8])
ray /= np.linalg.norm(ray)
for label, surf in (("sphere", sp), ("paraboloid", paraboloid_surface(3))):
    Ts = build_T([surf])
    ts = np.geomspace(0.004, Ts.r_T / 2, 10)
    devs = [np.linalg.norm(apply_T(Ts, t * ray) - t * ray) for t in ts]
    slope, logc = np.polyfit(np.log(ts), np.log(devs), 1)
    print(f"  {label:10s}: log-log slope = {slope:.4f}  C ~ {np.exp(logc):.3f}")

print("\n=== flat corners are fixed points: T = identity on planes ===")
T2 = build_T([plane_surface(3, [0, 0, 1]), plane_surface(3, [1, 0, 0])])
x = np.array([0.05, 0.03, 0.08])
print(f"  |T(x) - x| = {np.linalg.norm(apply_T(T2, x) - x):.2e}")

print("\n=== Laplacian transport error for f = |x|^(-1/2) ===")
h = 1e-4
for x0 in ([0.04, 0.02, 0.1], [0.02, -0.03, 0.08]):
    x0 = np.asarray(x0)

    def f(y):
        return np.linalg.norm(y) ** -0.5

    lap_comp = sum(
        (f(apply_T(T, x0 + h * e)) - 2 * f(apply_T(T, x0))
         + f(apply_T(T, x0 - h * e))) / h**2
        for e in np.eye(3))
    xb = apply_T(T, x0)
    rb = np.linalg.norm(xb)
    lap_exact = -0.25 * rb**-2.5
    scale = 0.5 * rb**-1.5 + np.linalg.norm(x0) * 0.75 * rb**-2.5
    print(f"  x = {x0}: |Lap(f o T) - Lap f(Tx)| / (|grad f| + |x||hess f|) "
          f"= {abs(lap_comp - lap_exact) / scale:.3f}")
