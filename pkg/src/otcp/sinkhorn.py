"""Log-domain Sinkhorn solver for entropy-regularized optimal transport.

Solves the dual of the regularized problem between two uniform empirical
measures under squared Euclidean cost. All reductions are soft-min
(log-sum-exp with a mean normalization and max-shift), so small epsilon never
overflows; no kernel matrix exponential is ever materialized outside of the
final diagnostics on small problems.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParamError, SinkhornNotConverged

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 2000


@dataclass(frozen=True, eq=False)
class Standardizer:
    """Per-dimension affine transform fixed at fit time and reused on queries."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, points: np.ndarray) -> "Standardizer":
        points = np.asarray(points, dtype=float)
        mean = points.mean(axis=0)
        scale = points.std(axis=0)
        scale = np.where(scale < 1e-12, 1.0, scale)
        return cls(mean, scale)

    @classmethod
    def identity(cls, dim: int) -> "Standardizer":
        return cls(np.zeros(dim), np.ones(dim))

    def transform(self, z: np.ndarray) -> np.ndarray:
        return (np.asarray(z, dtype=float) - self.mean) / self.scale

    def inverse_transform(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=float) * self.scale + self.mean


@dataclass(frozen=True, eq=False)
class OtProblem:
    """Uniform source (n x d) onto uniform target (m x d) with regularization eps."""

    source: np.ndarray
    target: np.ndarray
    epsilon: float

    def __post_init__(self):
        src = np.atleast_2d(np.asarray(self.source, dtype=float))
        tgt = np.atleast_2d(np.asarray(self.target, dtype=float))
        if src.shape[1] != tgt.shape[1]:
            raise DimensionError(f"source dim {src.shape[1]} != target dim {tgt.shape[1]}")
        if not (np.isfinite(src).all() and np.isfinite(tgt).all()):
            raise ParamError("OT problem contains non-finite points")
        if self.epsilon <= 0:
            raise ParamError("epsilon must be > 0")
        object.__setattr__(self, "source", src)
        object.__setattr__(self, "target", tgt)

    @property
    def n(self) -> int:
        return self.source.shape[0]

    @property
    def m(self) -> int:
        return self.target.shape[0]


@dataclass(eq=False)
class DualPotentials:
    """Converged dual vectors (f, g) with solve diagnostics."""

    f: np.ndarray
    g: np.ndarray
    epsilon: float
    problem: OtProblem
    iterations: int
    marginal_error: float
    converged: bool
    objective_trace: list | None = None

    def __repr__(self):
        return (f"DualPotentials(n={self.f.size}, m={self.g.size}, "
                f"eps={self.epsilon:g}, iterations={self.iterations}, "
                f"marginal_error={self.marginal_error:.3e}, "
                f"converged={self.converged})")


def squared_cost(z, u) -> float:
    """Squared Euclidean distance between two vectors."""
    z = np.asarray(z, dtype=float)
    u = np.asarray(u, dtype=float)
    if z.shape != u.shape:
        raise DimensionError(f"shape mismatch {z.shape} vs {u.shape}")
    diff = z - u
    return float(diff @ diff)


def pairwise_sq_dists(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """All squared distances between rows of A (n x d) and B (m x d)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise DimensionError(f"dim mismatch {A.shape[1]} vs {B.shape[1]}")
    sq = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * (A @ B.T)
    return np.maximum(sq, 0.0)


def lse_eps(values, eps: float, axis=None) -> float | np.ndarray:
    """Soft minimum -eps*log(mean(exp(-values/eps))), max-shifted for stability.

    Lies between min(values) and min(values) + eps*log(s); reduces to the value
    itself for a single entry. With axis given, reduces a matrix along it.
    """
    if eps <= 0:
        raise ParamError("eps must be > 0")
    v = np.asarray(values, dtype=float)
    if axis is None:
        v = v.ravel()
        axis = 0
    s = v.shape[axis]
    low = v.min(axis=axis, keepdims=True)
    out = -eps * (np.log(np.mean(np.exp(-(v - low) / eps), axis=axis)))
    out = out + np.squeeze(low, axis=axis)
    return float(out) if out.ndim == 0 else out


def _log_mean_exp(logits: np.ndarray, axis: int) -> np.ndarray:
    top = logits.max(axis=axis, keepdims=True)
    out = np.log(np.mean(np.exp(logits - top), axis=axis))
    return out + np.squeeze(top, axis=axis)


def _dual_value(phi: np.ndarray, psi: np.ndarray, c_over_eps: np.ndarray,
                eps: float) -> float:
    # <f, 1/n> + <g, 1/m> - eps * mean_ij exp((f_i + g_j - c_ij)/eps)
    logits = phi[:, None] + psi[None, :] - c_over_eps
    kernel_term = float(np.exp(logits).mean())
    return eps * (float(phi.mean()) + float(psi.mean()) - kernel_term)


def sinkhorn_solve(prob: OtProblem, tol: float = DEFAULT_TOL,
                   max_iter: int = DEFAULT_MAX_ITER,
                   track_objective: bool = False) -> DualPotentials:
    """Alternate soft-min updates of f and g until the coupling marginals fit.

    One iteration refreshes f rows then g columns; after the g step the column
    marginals are exact, and the worst row-sum deviation of the implied
    coupling falls out of the next f reduction for free, so convergence is
    checked every iteration at no extra cost. Stops when that deviation drops
    to tol or the iteration budget runs out, in which case a
    SinkhornNotConverged warning is emitted and the best iterate is returned.
    Potentials are gauged so mean(g) = 0. Deterministic for identical inputs.
    """
    if tol <= 0:
        raise ParamError("tol must be > 0")
    if max_iter < 1:
        raise ParamError("max_iter must be >= 1")
    n, m = prob.n, prob.m
    eps = float(prob.epsilon)
    c_over_eps = pairwise_sq_dists(prob.source, prob.target) / eps
    phi = np.zeros(n)  # f / eps
    psi = np.zeros(m)  # g / eps
    buf = np.empty_like(c_over_eps)
    trace = [] if track_objective else None

    def _soft(vec, axis):
        # -logmeanexp(vec ⊕ -c_over_eps) along axis, reusing one n x m buffer
        other = vec[None, :] if axis == 1 else vec[:, None]
        np.subtract(other, c_over_eps, out=buf)
        top = buf.max(axis=axis)
        np.subtract(buf, np.expand_dims(top, axis), out=buf)
        np.exp(buf, out=buf)
        return -(np.log(buf.mean(axis=axis)) + top)

    err = np.inf
    it = 0
    while it < max_iter:
        phi_new = _soft(psi, axis=1)
        if it > 0:
            # row sum i of P for the previous (phi, psi) iterate equals
            # exp(phi_i - phi_new_i)/n; columns were exact after its g step
            err = float(np.abs(np.expm1(phi - phi_new)).max()) / n
            if err <= tol:
                break
        it += 1
        phi = phi_new
        psi = _soft(phi, axis=0)
        if track_objective:
            trace.append(_dual_value(phi, psi, c_over_eps, eps))
    else:
        # budget exhausted: certify the final iterate with one extra reduction
        err = float(np.abs(np.expm1(phi - _soft(psi, axis=1))).max()) / n
    shift = float(psi.mean())
    f = (phi + shift) * eps
    g = (psi - shift) * eps
    converged = err <= tol
    pot = DualPotentials(f, g, eps, prob, it, err, converged, trace)
    if not converged:
        warnings.warn(
            f"Sinkhorn stopped at max_iter={max_iter} with marginal error "
            f"{err:.3e} > tol={tol:.1e}", SinkhornNotConverged, stacklevel=2)
    return pot


def coupling_log_matrix(pot: DualPotentials) -> np.ndarray:
    """log P_ij of the implied coupling P = (1/(nm)) exp((f+g-c)/eps)."""
    prob = pot.problem
    c = pairwise_sq_dists(prob.source, prob.target)
    return (pot.f[:, None] + pot.g[None, :] - c) / pot.epsilon - np.log(prob.n * prob.m)


def coupling_matrix(pot: DualPotentials) -> np.ndarray:
    """Dense coupling matrix; intended for small diagnostic problems."""
    return np.exp(coupling_log_matrix(pot))


def coupling_marginal_error(pot: DualPotentials) -> float:
    """Worst absolute deviation of coupling row sums from 1/n and column sums from 1/m."""
    log_p = coupling_log_matrix(pot)
    top_r = log_p.max(axis=1, keepdims=True)
    rows = np.exp(top_r[:, 0]) * np.exp(log_p - top_r).sum(axis=1)
    top_c = log_p.max(axis=0, keepdims=True)
    cols = np.exp(top_c[0]) * np.exp(log_p - top_c).sum(axis=0)
    n, m = pot.problem.n, pot.problem.m
    return float(max(np.abs(rows - 1.0 / n).max(), np.abs(cols - 1.0 / m).max()))


def dual_objective(pot: DualPotentials) -> float:
    """Dual value <f,1/n> + <g,1/m> - eps*mean_ij exp((f_i+g_j-c_ij)/eps)."""
    prob = pot.problem
    eps = pot.epsilon
    c_over_eps = pairwise_sq_dists(prob.source, prob.target) / eps
    return _dual_value(pot.f / eps, pot.g / eps, c_over_eps, eps)
