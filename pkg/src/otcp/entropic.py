"""Out-of-sample entropic transport maps built from Sinkhorn dual potentials.

The forward map sends a residual vector to a Gibbs-weighted average of grid
points inside the unit ball; its norm is the transport rank in [0, 1]. The
inverse map pulls grid points back to weighted averages of the fitted
residuals, which is how 2-D prediction regions are traced.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ScoreMatrix
from .errors import DimensionError, ParamError
from .sinkhorn import (
    DualPotentials,
    OtProblem,
    Standardizer,
    lse_eps,
    pairwise_sq_dists,
    sinkhorn_solve,
)
from .sphere import SphericalGrid, build_spherical_grid

_CHUNK_ENTRIES = 16_000_000  # cap on rows*points per distance block


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    top = logits.max(axis=1, keepdims=True)
    w = np.exp(logits - top)
    return w / w.sum(axis=1, keepdims=True)


@dataclass(frozen=True, eq=False)
class EntropicMap:
    """Forward/inverse entropic Brenier map between residuals and a ball grid."""

    potentials: DualPotentials
    grid: SphericalGrid
    source_std: np.ndarray      # fitted residuals in standardized coordinates
    standardizer: Standardizer
    origin: str = ""

    def __repr__(self):
        return (f"EntropicMap(dim={self.dim}, n={self.source_std.shape[0]}, "
                f"m={self.grid.m}, eps={self.epsilon:g}, "
                f"converged={self.potentials.converged})")

    @property
    def epsilon(self) -> float:
        return self.potentials.epsilon

    @property
    def dim(self) -> int:
        return self.grid.dim

    def _queries(self, z) -> tuple[np.ndarray, bool]:
        z = np.asarray(z, dtype=float)
        single = z.ndim == 1
        z = np.atleast_2d(z)
        if z.shape[1] != self.dim:
            raise DimensionError(f"expected dim {self.dim}, got {z.shape[1]}")
        if not np.isfinite(z).all():
            raise ParamError("query contains non-finite values")
        return z, single

    def gibbs_weights(self, z) -> np.ndarray:
        """Softmin weights over grid points: p_j(z) prop exp(-(||z-u_j||^2 - g_j)/eps).

        Nonnegative and summing to one per query row; z is standardized first.
        """
        z, single = self._queries(z)
        zs = self.standardizer.transform(z)
        g = self.potentials.g
        eps = self.epsilon
        out = np.empty((zs.shape[0], self.grid.m))
        step = max(1, _CHUNK_ENTRIES // self.grid.m)
        for lo in range(0, zs.shape[0], step):
            block = zs[lo:lo + step]
            logits = (g[None, :] - pairwise_sq_dists(block, self.grid.points)) / eps
            out[lo:lo + block.shape[0]] = _softmax_rows(logits)
        return out[0] if single else out

    def forward(self, z) -> np.ndarray:
        """Map residual(s) into the unit ball as a convex combination of grid points."""
        w = self.gibbs_weights(z)
        return w @ self.grid.points

    def rank(self, z):
        """Transport rank ||forward(z)|| in [0, 1]."""
        img = self.forward(z)
        out = np.linalg.norm(np.atleast_2d(img), axis=1)
        return float(out[0]) if img.ndim == 1 else out

    def inverse(self, u) -> np.ndarray:
        """Pull ball point(s) back to a convex combination of fitted residuals."""
        u = np.asarray(u, dtype=float)
        single = u.ndim == 1
        u = np.atleast_2d(u)
        if u.shape[1] != self.dim:
            raise DimensionError(f"expected dim {self.dim}, got {u.shape[1]}")
        f = self.potentials.f
        logits = (f[None, :] - pairwise_sq_dists(u, self.source_std)) / self.epsilon
        w = _softmax_rows(logits)
        img = self.standardizer.inverse_transform(w @ self.source_std)
        return img[0] if single else img

    def forward_potential(self, z_std) -> float:
        """Potential whose gradient displacement is the map: forward = z - grad.

        Evaluated at standardized queries. Uses the half-squared-cost scaling
        (half the raw soft-min of ||z-u_j||^2 - g_j), which leaves the Gibbs
        weights untouched but makes the gradient identity hold with no factor
        of two.
        """
        z_std = np.asarray(z_std, dtype=float)
        if z_std.shape != (self.dim,):
            raise DimensionError(f"expected a {self.dim}-vector")
        d2 = pairwise_sq_dists(z_std[None, :], self.grid.points)[0]
        return 0.5 * lse_eps(d2 - self.potentials.g, self.epsilon)

    def forward_std(self, z_std) -> np.ndarray:
        """Forward map in standardized coordinates (no input transform)."""
        z_std = np.atleast_2d(np.asarray(z_std, dtype=float))
        logits = (self.potentials.g[None, :]
                  - pairwise_sq_dists(z_std, self.grid.points)) / self.epsilon
        return _softmax_rows(logits) @ self.grid.points


def fit_entropic_map(scores, grid: SphericalGrid | None = None, *, m: int = 4096,
                     epsilon: float = 0.1, mode: str = "low_discrepancy",
                     seed: int = 0, tol: float = 1e-6, max_iter: int = 2000,
                     standardize: bool = True) -> EntropicMap:
    """Standardize residuals, solve the regularized OT onto the grid, wrap the maps.

    `scores` is a ScoreMatrix or plain (n, d) array. When `grid` is omitted one
    is built with m points in the matching dimension.
    """
    if isinstance(scores, ScoreMatrix):
        z, origin = scores.scores, scores.origin
    else:
        z = np.atleast_2d(np.asarray(scores, dtype=float))
        origin = ""
    if grid is None:
        grid = build_spherical_grid(m, z.shape[1], mode=mode, seed=seed)
    if grid.dim != z.shape[1]:
        raise DimensionError(f"grid dim {grid.dim} != score dim {z.shape[1]}")
    std = Standardizer.fit(z) if standardize else Standardizer.identity(z.shape[1])
    zs = std.transform(z)
    pot = sinkhorn_solve(OtProblem(zs, grid.points, epsilon), tol=tol,
                         max_iter=max_iter)
    return EntropicMap(pot, grid, zs, std, origin)
