"""Conformity scores, split-conformal calibration, and 2-D prediction regions.

Every score function maps an (x, y) pair to a scalar; calibration ranks the
scores of held-out pairs and keeps the ceil((1-alpha)(n+1))-th order statistic
as the threshold, which yields the finite-sample marginal coverage guarantee
under exchangeability. The transport-rank score reduces a vector residual to
the norm of its image under a fitted entropic map, so the same univariate
machinery applies unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .data import Dataset, KnnQuantilePredictor, Regressor, ScoreMatrix
from .entropic import EntropicMap
from .errors import (
    DimensionError,
    MethodError,
    NotFittedError,
    ParamError,
    ProvenanceError,
    SingularError,
)

SCORE_KINDS = ("abs_univariate", "merge_l2", "merge_mahalanobis", "mcp_max", "otcp")


# ---------------------------------------------------------------------------
# Score functions
# ---------------------------------------------------------------------------

class ScoreFunction:
    """Base conformity score; subclasses define the row-wise evaluation."""

    kind = "base"

    def __init__(self, d: int, fit_tags=()):
        self.d = int(d)
        self.fit_tags = frozenset(t for t in fit_tags if t)

    def _check_pair(self, x, y):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.atleast_2d(np.asarray(y, dtype=float))
        if y.shape[1] != self.d:
            raise DimensionError(f"expected {self.d}-dimensional responses")
        return x, y

    def score(self, x, y) -> float:
        X, Y = self._check_pair(x, y)
        return float(self.score_rows(X, Y)[0])

    def score_rows(self, X, Y) -> np.ndarray:
        """Scores of paired rows (X_i, Y_i)."""
        raise NotImplementedError

    def score_candidates(self, x, Y) -> np.ndarray:
        """Scores of many candidate responses for a single input."""
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        X = np.repeat(np.atleast_2d(np.asarray(x, dtype=float)), Y.shape[0], axis=0)
        return self.score_rows(X, Y)

    def center(self, x) -> np.ndarray:
        """Representative center of the region at x (used for sizing bounds)."""
        raise NotImplementedError


class _RegressionScore(ScoreFunction):
    def __init__(self, regressor: Regressor):
        if regressor.d is None:
            raise NotFittedError("regressor must be fitted first")
        super().__init__(regressor.d, [regressor.fit_tag])
        self.regressor = regressor

    def _residual_rows(self, X, Y):
        X, Y = self._check_pair(X, Y)
        return Y - self.regressor.predict_rows(X)

    def score_candidates(self, x, Y):
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        resid = Y - self.regressor.predict(x)[None, :]
        return self._score_residuals(resid)

    def score_rows(self, X, Y):
        return self._score_residuals(self._residual_rows(X, Y))

    def _score_residuals(self, resid) -> np.ndarray:
        raise NotImplementedError

    def center(self, x):
        return self.regressor.predict(x)


class AbsoluteResidualScore(_RegressionScore):
    """|yhat(x) - y| for univariate targets."""

    kind = "abs_univariate"

    def __init__(self, regressor):
        super().__init__(regressor)
        if self.d != 1:
            raise DimensionError("abs_univariate requires d = 1")

    def _score_residuals(self, resid):
        return np.abs(resid[:, 0])


class EuclideanResidualScore(_RegressionScore):
    """||yhat(x) - y||_2, collapsing the residual vector to one number."""

    kind = "merge_l2"

    def _score_residuals(self, resid):
        return np.linalg.norm(resid, axis=1)


class MahalanobisResidualScore(_RegressionScore):
    """||W (yhat(x) - y)||_2 with W the inverse square root of a residual covariance."""

    kind = "merge_mahalanobis"

    def __init__(self, regressor, whitener: np.ndarray):
        super().__init__(regressor)
        W = np.asarray(whitener, dtype=float)
        if W.shape != (self.d, self.d):
            raise DimensionError(f"whitener must be {self.d}x{self.d}")
        self.whitener = W

    def _score_residuals(self, resid):
        return np.linalg.norm(resid @ self.whitener.T, axis=1)


class MaxIntervalScore(ScoreFunction):
    """Worst per-dimension quantile-interval violation, max_i max(lo_i-y_i, y_i-hi_i)."""

    kind = "mcp_max"

    def __init__(self, quantile_predictor: KnnQuantilePredictor):
        if quantile_predictor.d is None:
            raise NotFittedError("quantile predictor must be fitted first")
        super().__init__(quantile_predictor.d, [quantile_predictor.fit_tag])
        self.quantile_predictor = quantile_predictor

    def score_rows(self, X, Y):
        X, Y = self._check_pair(X, Y)
        lo, hi = self.quantile_predictor.bounds_rows(X)
        return np.maximum(lo - Y, Y - hi).max(axis=1)

    def score_candidates(self, x, Y):
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        lo, hi = self.quantile_predictor.predict_bounds(x)
        return np.maximum(lo[None, :] - Y, Y - hi[None, :]).max(axis=1)

    def center(self, x):
        lo, hi = self.quantile_predictor.predict_bounds(x)
        return (lo + hi) / 2.0


class TransportRankScore(_RegressionScore):
    """Transport rank of the residual vector: ||T(y - yhat(x))|| in [0, 1]."""

    kind = "otcp"

    def __init__(self, regressor, transport_map: EntropicMap):
        super().__init__(regressor)
        if transport_map.dim != self.d:
            raise DimensionError("transport map dimension does not match targets")
        self.transport_map = transport_map
        self.fit_tags = self.fit_tags | frozenset(
            t for t in [transport_map.origin] if t)

    def _score_residuals(self, resid):
        return np.atleast_1d(self.transport_map.rank(resid))


def make_score_function(kind: str, regressor=None, quantile_predictor=None,
                        transport_map=None, whitener=None) -> ScoreFunction:
    """Build a score function from its fitted components."""
    if kind == "abs_univariate":
        return AbsoluteResidualScore(regressor)
    if kind == "merge_l2":
        return EuclideanResidualScore(regressor)
    if kind == "merge_mahalanobis":
        if whitener is None:
            raise ParamError("merge_mahalanobis needs a whitening matrix")
        return MahalanobisResidualScore(regressor, whitener)
    if kind == "mcp_max":
        if quantile_predictor is None:
            raise ParamError("mcp_max needs a quantile predictor")
        return MaxIntervalScore(quantile_predictor)
    if kind == "otcp":
        if transport_map is None:
            raise ParamError("otcp needs a fitted transport map")
        return TransportRankScore(regressor, transport_map)
    raise ParamError(f"unknown score kind {kind!r}; choose from {SCORE_KINDS}")


def estimate_covariance(resid, ridge: float = 0.0) -> np.ndarray:
    """Inverse square root of (sample covariance + ridge*I) via eigendecomposition."""
    if isinstance(resid, ScoreMatrix):
        resid = resid.scores
    Z = np.atleast_2d(np.asarray(resid, dtype=float))
    if ridge < 0:
        raise ParamError("ridge must be >= 0")
    centered = Z - Z.mean(axis=0)
    denom = max(Z.shape[0] - 1, 1)
    cov = centered.T @ centered / denom + ridge * np.eye(Z.shape[1])
    vals, vecs = np.linalg.eigh(cov)
    if vals.min() <= 1e-12:
        raise SingularError(
            f"covariance singular: smallest eigenvalue {vals.min():.3e} after ridge={ridge}")
    return (vecs * (1.0 / np.sqrt(vals))) @ vecs.T


def default_mahalanobis_ridge(resid) -> float:
    """Ridge of 1e-6 * trace(cov)/d, guarding near-singular residual covariances."""
    if isinstance(resid, ScoreMatrix):
        resid = resid.scores
    Z = np.atleast_2d(np.asarray(resid, dtype=float))
    var = Z.var(axis=0, ddof=1).sum()
    return 1e-6 * float(var) / Z.shape[1]


# ---------------------------------------------------------------------------
# Calibration
# ---------------------------------------------------------------------------

def conformal_threshold(cal_scores, alpha: float) -> float:
    """The k-th smallest calibration score with k = ceil((1-alpha)(n+1)).

    Returns +inf when k exceeds n (alpha below 1/(n+1)), meaning the region is
    the whole space. The ceiling is evaluated in exact rational arithmetic so
    float rounding cannot shift the rank.
    """
    scores = np.asarray(cal_scores, dtype=float).ravel()
    n = scores.size
    if n < 1:
        raise ParamError("need at least one calibration score")
    if not (0.0 < alpha < 1.0):
        raise ParamError("alpha must lie in (0, 1)")
    k = math.ceil((n + 1) * (1 - Fraction(alpha)))
    if k > n:
        return math.inf
    return float(np.sort(scores)[k - 1])


def pit_values(cal_scores, test_score):
    """Empirical CDF of the calibration scores at the test score(s), on {0,1/n,...,1}."""
    sorted_scores = np.sort(np.asarray(cal_scores, dtype=float).ravel())
    n = sorted_scores.size
    if n < 1:
        raise ParamError("need at least one calibration score")
    t = np.asarray(test_score, dtype=float)
    ranks = np.searchsorted(sorted_scores, np.atleast_1d(t), side="right") / n
    return float(ranks[0]) if t.ndim == 0 else ranks


@dataclass(eq=False)
class CalibratedPredictor:
    """A score function plus its calibrated threshold and diagnostics."""

    score_fn: ScoreFunction
    alpha: float
    threshold: float
    cal_scores: np.ndarray          # sorted
    residual_low: np.ndarray | None  # per-dim bounds of y - center(x) on calib
    residual_high: np.ndarray | None
    band: tuple[float, float] | None = None  # two-sided PIT band, optional

    def __repr__(self):
        return (f"CalibratedPredictor(kind={self.score_fn.kind!r}, "
                f"alpha={self.alpha:g}, threshold={self.threshold:.6g}, "
                f"n_cal={self.n_cal})")

    @property
    def n_cal(self) -> int:
        return self.cal_scores.size

    @property
    def d(self) -> int:
        return self.score_fn.d

    def pit(self, score):
        return pit_values(self.cal_scores, score)

    def contains(self, x, y) -> bool:
        return bool(self.contains_rows(np.atleast_2d(np.asarray(x, dtype=float)),
                                       np.atleast_2d(np.asarray(y, dtype=float)))[0])

    def contains_rows(self, X, Y) -> np.ndarray:
        scores = self.score_fn.score_rows(X, Y)
        if self.band is not None:
            pit = self.pit(scores)
            return (pit >= self.band[0]) & (pit <= self.band[1])
        return scores <= self.threshold

    def contains_candidates(self, x, Y) -> np.ndarray:
        scores = self.score_fn.score_candidates(x, Y)
        if self.band is not None:
            pit = self.pit(scores)
            return (pit >= self.band[0]) & (pit <= self.band[1])
        return scores <= self.threshold

    def threshold_at(self, alpha: float) -> float:
        """Threshold recomputed at a different miscoverage level from the same scores."""
        return conformal_threshold(self.cal_scores, alpha)


def calibrate(score_fn: ScoreFunction, calib: Dataset, alpha: float,
              allow_same_data: bool = False, band: tuple[float, float] | None = None
              ) -> CalibratedPredictor:
    """Score every calibration pair and keep the conformal threshold.

    Refuses calibration data whose provenance tag matches a tag the score
    function was fitted on, unless allow_same_data is set (the
    permutation-invariant single-split variant).
    """
    if calib.d != score_fn.d:
        raise DimensionError("calibration targets do not match the score function")
    if calib.tag and calib.tag in score_fn.fit_tags and not allow_same_data:
        raise ProvenanceError(
            f"score function was fitted on {calib.tag!r}; pass allow_same_data=True "
            "to calibrate on the same split anyway")
    scores = score_fn.score_rows(calib.features, calib.targets)
    threshold = conformal_threshold(scores, alpha)
    try:
        centers = np.vstack([score_fn.center(x) for x in calib.features])
        resid = calib.targets - centers
        low, high = resid.min(axis=0), resid.max(axis=0)
    except NotImplementedError:  # pragma: no cover
        low = high = None
    return CalibratedPredictor(score_fn, float(alpha), threshold,
                               np.sort(scores), low, high, band)


# ---------------------------------------------------------------------------
# 2-D regions
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Region2D:
    """Closed polygon tracing the prediction-set boundary at one input point."""

    x: np.ndarray
    alpha: float
    vertices: np.ndarray  # (k, 2), first row repeated last
    method: str
    reordered: bool = False  # True when the pullback needed angular re-sorting

    @property
    def area(self) -> float:
        v = self.vertices
        return float(abs(np.sum(v[:-1, 0] * v[1:, 1] - v[1:, 0] * v[:-1, 1])) / 2.0)


def _close(vertices: np.ndarray) -> np.ndarray:
    return np.vstack([vertices, vertices[:1]])


def region_contour_2d(pred: CalibratedPredictor, x, n_angles: int = 128,
                      threshold: float | None = None) -> Region2D:
    """Trace the d=2 prediction-set boundary at input x.

    Transport-rank predictors pull the radius-threshold sphere shell back
    through the inverse map and re-sort the vertices by angle around their
    centroid; Euclidean, Mahalanobis, and interval scores emit their exact
    circle, ellipse, and rectangle. Univariate scores have no 2-D region.
    """
    if pred.d != 2:
        raise MethodError("region contours are defined for d = 2 only")
    if n_angles < 8:
        raise ParamError("need at least 8 contour vertices")
    r = pred.threshold if threshold is None else threshold
    if not math.isfinite(r):
        raise MethodError("threshold is infinite (region is the whole plane)")
    fn = pred.score_fn
    x = np.asarray(x, dtype=float)
    theta = np.linspace(0.0, 2.0 * math.pi, n_angles, endpoint=False)
    circle = np.column_stack([np.cos(theta), np.sin(theta)])

    if fn.kind == "merge_l2":
        verts = fn.center(x)[None, :] + r * circle
        return Region2D(x, pred.alpha, _close(verts), fn.kind)
    if fn.kind == "merge_mahalanobis":
        half = np.linalg.inv(fn.whitener)  # maps the unit ball to the ellipse
        verts = fn.center(x)[None, :] + (r * circle) @ half.T
        return Region2D(x, pred.alpha, _close(verts), fn.kind)
    if fn.kind == "mcp_max":
        lo, hi = fn.quantile_predictor.predict_bounds(x)
        lo, hi = lo - r, hi + r
        if (hi <= lo).any():
            raise MethodError("interval region is empty at this threshold")
        corners = np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]])
        per_edge = max(n_angles // 4, 2)
        edges = []
        for a, b in zip(corners, np.roll(corners, -1, axis=0)):
            frac = np.linspace(0.0, 1.0, per_edge, endpoint=False)[:, None]
            edges.append(a[None, :] * (1 - frac) + b[None, :] * frac)
        return Region2D(x, pred.alpha, _close(np.vstack(edges)), fn.kind)
    if fn.kind == "otcp":
        shell = r * circle
        pulled = fn.transport_map.inverse(shell) + fn.center(x)[None, :]
        centroid = pulled.mean(axis=0)
        ang = np.arctan2(pulled[:, 1] - centroid[1], pulled[:, 0] - centroid[0])
        # a pullback that is already angle-monotone (up to direction and one
        # wraparound) traces a simple curve; anything else gets re-sorted and
        # flagged
        steps = np.diff(ang, append=ang[:1])
        monotone = (steps < 0).sum() == 1 or (steps > 0).sum() == 1
        order = np.argsort(ang, kind="stable")
        return Region2D(x, pred.alpha, _close(pulled[order]), fn.kind,
                        reordered=not monotone)
    raise MethodError(f"no 2-D region for score kind {fn.kind!r}")
