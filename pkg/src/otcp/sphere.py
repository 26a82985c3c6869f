"""Discrete spherical-uniform target measures.

The target of the transport map is a grid of n_S unit directions scaled by n_R
equally spaced radii {1/n_R, ..., 1}, plus n_o copies of the origin, every point
carrying mass 1/m. Directions come either from a Halton sequence pushed through
the normal quantile function and normalized, or from normalized iid Gaussians.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.special import erfc

from .errors import DomainError, FactorizationError, ParamError

# first 64 primes: Halton bases for up to 64 dimensions
_PRIMES = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53,
    59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131,
    137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193, 197, 199, 211, 223,
    227, 229, 233, 239, 241, 251, 257, 263, 269, 271, 277, 281, 283, 293, 307, 311,
]


def _radical_inverse(indices: np.ndarray, base: int) -> np.ndarray:
    out = np.zeros(indices.shape, dtype=float)
    factor = 1.0 / base
    i = indices.copy()
    while i.any():
        out += (i % base) * factor
        i //= base
        factor /= base
    return out


def halton_sequence(count: int, dim: int, skip: int = 64) -> np.ndarray:
    """Halton points in (0,1)^dim for sequence indices skip+1 .. skip+count.

    Indexing is 1-based (index 1 in base 2 is 0.5), so any skip >= 0 keeps all
    coordinates strictly inside the open unit cube.
    """
    if count < 1:
        raise ParamError("count must be >= 1")
    if dim < 1 or dim > len(_PRIMES):
        raise ParamError(f"dim must be in [1, {len(_PRIMES)}]")
    if skip < 0:
        raise ParamError("skip must be >= 0")
    idx = np.arange(skip + 1, skip + count + 1, dtype=np.int64)
    return np.column_stack([_radical_inverse(idx, b) for b in _PRIMES[:dim]])


# Rational approximation of the standard normal quantile followed by one Halley
# refinement against erfc; absolute error well below 1e-9 across (0, 1).
_INCDF_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
            1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_INCDF_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
            6.680131188771972e+01, -1.328068155288572e+01)
_INCDF_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
            -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_INCDF_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
            3.754408661907416e+00)
_INCDF_PLOW = 0.02425


def _incdf_lower_half(arr: np.ndarray) -> np.ndarray:
    # quantiles for p in (0, 0.5]; x <= 0, so the erfc in the refinement is
    # evaluated on its small branch and never cancels
    x = np.empty_like(arr)
    a, b, c, d = _INCDF_A, _INCDF_B, _INCDF_C, _INCDF_D
    tail = arr < _INCDF_PLOW
    mid = ~tail
    if mid.any():
        q = arr[mid] - 0.5
        r = q * q
        num = ((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]
        den = (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
        x[mid] = q * num / den
    if tail.any():
        q = np.sqrt(-2.0 * np.log(arr[tail]))
        num = ((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]
        den = ((d[0] * q + d[1]) * q + d[2]) * q + d[3]
        x[tail] = num / (den * q + 1.0)
    # Halley refinement; skipped where exp(x^2/2) would overflow (|x| > 37,
    # i.e. p below ~1e-300, far outside the stated accuracy window)
    safe = np.abs(x) < 37.0
    e = 0.5 * erfc(-x[safe] / math.sqrt(2.0)) - arr[safe]
    u = e * math.sqrt(2.0 * math.pi) * np.exp(x[safe] ** 2 / 2.0)
    x[safe] = x[safe] - u / (1.0 + x[safe] * u / 2.0)
    return x


def inverse_normal_cdf(p):
    """Standard normal quantile, vectorized; DomainError outside (0, 1).

    The upper half reflects through the exact identity 1 - p (exact in floats
    for p >= 0.5), so accuracy is symmetric in both tails.
    """
    arr = np.asarray(p, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr).copy()
    if ((arr <= 0.0) | (arr >= 1.0)).any() or not np.isfinite(arr).all():
        raise DomainError("inverse_normal_cdf requires 0 < p < 1")
    upper = arr > 0.5
    arr[upper] = 1.0 - arr[upper]
    x = _incdf_lower_half(arr)
    x[upper] = -x[upper]
    return float(x[0]) if scalar else x.reshape(np.shape(p))


def sphere_directions(n_s: int, dim: int, mode: str = "low_discrepancy",
                      seed: int = 0) -> np.ndarray:
    """n_s unit vectors: Gaussian-mapped Halton points or normalized iid normals.

    dim=1 always alternates +1/-1 so both half-lines are covered.
    """
    if n_s < 1 or dim < 1:
        raise ParamError("need n_s >= 1 and dim >= 1")
    if dim == 1:
        signs = np.where(np.arange(n_s) % 2 == 0, 1.0, -1.0)
        return signs[:, None]
    if mode == "low_discrepancy":
        skip = 64
        raw = inverse_normal_cdf(halton_sequence(n_s, dim, skip=skip))
        norms = np.linalg.norm(raw, axis=1)
        while (norms < 1e-12).any():  # pragma: no cover - essentially unreachable
            bad = norms < 1e-12
            skip += n_s
            raw[bad] = inverse_normal_cdf(halton_sequence(int(bad.sum()), dim, skip=skip))
            norms = np.linalg.norm(raw, axis=1)
    elif mode == "iid":
        rng = np.random.default_rng(seed)
        raw = rng.standard_normal((n_s, dim))
        norms = np.linalg.norm(raw, axis=1)
        while (norms < 1e-12).any():  # pragma: no cover
            bad = norms < 1e-12
            raw[bad] = rng.standard_normal((int(bad.sum()), dim))
            norms = np.linalg.norm(raw, axis=1)
    else:
        raise ParamError(f"unknown direction mode {mode!r}")
    return raw / norms[:, None]


@dataclass(frozen=True, eq=False)
class SphericalGrid:
    """Discrete spherical-uniform measure: m = n_R * n_S + n_o equal-mass points."""

    dim: int
    n_r: int
    n_s: int
    n_o: int
    points: np.ndarray      # (m, dim), origin rows first, then shells by radius
    radii: np.ndarray       # (n_r,), {1/n_r, ..., 1}
    directions: np.ndarray  # (n_s, dim) unit vectors

    def __repr__(self):
        return (f"SphericalGrid(dim={self.dim}, m={self.m}, n_R={self.n_r}, "
                f"n_S={self.n_s}, n_o={self.n_o})")

    @property
    def m(self) -> int:
        return self.points.shape[0]


def build_spherical_grid(m: int, dim: int, factorization=None,
                         mode: str = "low_discrepancy", seed: int = 0) -> SphericalGrid:
    """Build the m-point grid; default factorization n_R = floor(sqrt(m)).

    The default puts n_R = floor(sqrt(m)), n_S = floor((m-1)/n_R) and the
    remaining n_o = m - n_R*n_S >= 1 points at the origin. An explicit
    (n_R, n_S, n_o) triple must satisfy n_R*n_S + n_o = m.
    """
    if m < 2:
        raise ParamError("need m >= 2 grid points")
    if dim < 1:
        raise ParamError("need dim >= 1")
    if factorization is None:
        n_r = math.isqrt(m)
        n_s = (m - 1) // n_r
        n_o = m - n_r * n_s
    else:
        n_r, n_s, n_o = (int(v) for v in factorization)
        if n_r < 1 or n_s < 1 or n_o < 0 or n_r * n_s + n_o != m:
            raise FactorizationError(
                f"factorization {factorization} inconsistent with m={m}")
    dirs = sphere_directions(n_s, dim, mode=mode, seed=seed)
    radii = np.arange(1, n_r + 1, dtype=float) / n_r
    shells = (radii[:, None, None] * dirs[None, :, :]).reshape(n_r * n_s, dim)
    points = np.vstack([np.zeros((n_o, dim)), shells])
    return SphericalGrid(dim, n_r, n_s, n_o, points, radii, dirs)


def grid_radius_index(n_total: int, n_r: int, n_s: int, n_o: int, alpha: float):
    """Smallest shell index j (and radius j/n_R) with cumulative mass >= 1 - alpha.

    Mass up to shell j is (n_o + j*n_S)/n_total, so j = ceil((n_total*(1-alpha)
    - n_o)/n_S) clamped to [0, n_R]. Computed in exact rational arithmetic so
    the ceiling never flips on float knife edges.
    """
    if n_r < 1 or n_s < 1 or n_o < 0 or n_r * n_s + n_o != n_total:
        raise ParamError(f"counts ({n_r}, {n_s}, {n_o}) inconsistent with n_total={n_total}")
    if not (0.0 < alpha < 1.0):
        raise ParamError("alpha must lie in (0, 1)")
    target = n_total * (1 - Fraction(alpha)) - n_o
    j = min(max(math.ceil(target / n_s), 0), n_r)
    return j, j / n_r


def grid_to_csv(grid: SphericalGrid, path) -> None:
    """One grid point per row, coordinate columns c0..c{dim-1}."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"c{j}" for j in range(grid.dim)])
        for row in grid.points:
            writer.writerow([repr(float(v)) for v in row])
