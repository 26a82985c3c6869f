"""The discrete spherical-uniform target measure.

Directions come from a Halton sequence pushed through the normal quantile and
normalized; radii are the regular ladder {1/n_R, ..., 1} plus origin copies.
The closed-form shell index shows which radius captures a requested mass.
"""

import numpy as np

import otcp

# quasi-uniform unit vectors: Halton block -> normal quantile -> normalize
w = otcp.halton_sequence(5, 2, skip=64)
theta = otcp.inverse_normal_cdf(w)
theta /= np.linalg.norm(theta, axis=1, keepdims=True)
print("first 5 low-discrepancy directions:\n", np.round(theta, 4))

grid = otcp.build_spherical_grid(1024, dim=2)
print(f"\nm=1024 factorization: n_R={grid.n_r}, n_S={grid.n_s}, n_o={grid.n_o}")
norms = np.linalg.norm(grid.points, axis=1)
print(f"radius ladder: {grid.radii[:4]} ... {grid.radii[-1]}")
print(f"mean of all grid points (near zero by symmetry): "
      f"{np.round(grid.points.mean(axis=0), 5)}")

# the smallest shell with cumulative mass >= 1 - alpha, against a hand count
for alpha in (0.5, 0.1, 0.02):
    j, r = otcp.grid_radius_index(grid.m, grid.n_r, grid.n_s, grid.n_o, alpha)
    mass = (grid.n_o + j * grid.n_s) / grid.m
    print(f"alpha={alpha}: shell j={j}, radius={r:.3f}, cumulative mass {mass:.4f}")

# equal-mass check: every non-origin norm sits exactly on the ladder
assert set(np.round(norms[norms > 0], 12)) <= set(np.round(grid.radii, 12))
print("\nall non-origin points sit exactly on the radius ladder")
