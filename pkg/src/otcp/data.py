"""Datasets, deterministic splits, synthetic generators, and simple predictors.

Everything downstream consumes (features, targets) pairs: features feed a point
or quantile predictor, targets minus predictions become the vector-valued
conformity residuals.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, NotFittedError, ParamError, ParseError, SplitError

SPLIT_NAMES = ("train", "ot_fit", "calib", "test")


@dataclass(frozen=True, eq=False)
class Dataset:
    """A regression dataset: n rows of p features and d targets."""

    features: np.ndarray
    targets: np.ndarray
    feature_names: list[str] = field(default_factory=list)
    target_names: list[str] = field(default_factory=list)
    tag: str | None = None

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        Y = np.asarray(self.targets, dtype=float)
        if X.ndim != 2 or Y.ndim != 2:
            raise DimensionError("features and targets must be 2-D arrays")
        if X.shape[0] != Y.shape[0]:
            raise DimensionError(
                f"row mismatch: {X.shape[0]} feature rows vs {Y.shape[0]} target rows"
            )
        if X.shape[0] < 1 or X.shape[1] < 1 or Y.shape[1] < 1:
            raise DimensionError("need n >= 1, p >= 1, d >= 1")
        if not (np.isfinite(X).all() and np.isfinite(Y).all()):
            raise ParamError("dataset contains NaN or Inf entries")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "targets", Y)
        if not self.feature_names:
            object.__setattr__(self, "feature_names", [f"x{j}" for j in range(X.shape[1])])
        if not self.target_names:
            object.__setattr__(self, "target_names", [f"y{j}" for j in range(Y.shape[1])])

    def __repr__(self):
        return (f"Dataset(n={self.n}, p={self.p}, d={self.d}, "
                f"tag={self.tag!r})")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    @property
    def d(self) -> int:
        return self.targets.shape[1]

    def take(self, idx: np.ndarray, tag: str | None = None) -> "Dataset":
        return Dataset(
            self.features[idx], self.targets[idx], list(self.feature_names),
            list(self.target_names), tag,
        )


@dataclass(frozen=True)
class SplitSpec:
    """Fractions (train, ot_fit, calib, test) plus the shuffle seed."""

    fractions: tuple[float, float, float, float] = (0.4, 0.2, 0.2, 0.2)
    seed: int = 0

    def __post_init__(self):
        if len(self.fractions) != 4:
            raise ParamError("need exactly four split fractions")
        if any(f < 0 or f > 1 for f in self.fractions):
            raise ParamError("split fractions must lie in [0, 1]")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ParamError(f"split fractions sum to {sum(self.fractions)}, expected 1")


@dataclass(frozen=True, eq=False)
class ScoreMatrix:
    """An n x d matrix of vector-valued conformity residuals with provenance."""

    scores: np.ndarray
    origin: str = ""

    def __post_init__(self):
        Z = np.asarray(self.scores, dtype=float)
        if Z.ndim != 2 or Z.shape[1] < 1:
            raise DimensionError("scores must be an n x d matrix with d >= 1")
        if not np.isfinite(Z).all():
            raise ParamError("score matrix contains NaN or Inf")
        object.__setattr__(self, "scores", Z)


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------

def load_dataset_csv(path, d_out: int, tag: str | None = None) -> Dataset:
    """Load a headered CSV whose trailing `d_out` columns are the targets.

    Every data cell must parse as a finite float; the first offending cell
    raises ParseError carrying its (row, col), with row 1 = first data row.
    """
    if d_out < 1:
        raise ParamError("d_out must be >= 1")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty CSV file", row=0, col=0) from None
        ncols = len(header)
        if ncols <= d_out:
            raise DimensionError(f"CSV has {ncols} columns, need more than d_out={d_out}")
        rows = []
        for r, record in enumerate(reader, start=1):
            if len(record) != ncols:
                raise ParseError(f"row {r} has {len(record)} cells, expected {ncols}",
                                 row=r, col=len(record))
            vals = []
            for c, cell in enumerate(record):
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(f"row {r}, column {c}: non-numeric cell {cell!r}",
                                     row=r, col=c) from None
                if not math.isfinite(v):
                    raise ParseError(f"row {r}, column {c}: non-finite cell {cell!r}",
                                     row=r, col=c)
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise ParseError("CSV has a header but no data rows", row=0, col=0)
    data = np.asarray(rows, dtype=float)
    p = ncols - d_out
    return Dataset(data[:, :p], data[:, p:], header[:p], header[p:], tag)


def write_dataset_csv(ds: Dataset, path) -> None:
    """Write a Dataset as RFC-4180 CSV (header row, targets last); round-trips exactly."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(ds.feature_names) + list(ds.target_names))
        for xi, yi in zip(ds.features, ds.targets):
            writer.writerow([repr(float(v)) for v in xi] + [repr(float(v)) for v in yi])


# ---------------------------------------------------------------------------
# Splitting
# ---------------------------------------------------------------------------

def split_dataset(ds: Dataset, spec: SplitSpec):
    """Partition into (train, ot_fit, calib, test) by a seeded shuffle.

    Split i gets floor(fraction_i * n) rows (a 1e-9 nudge guards decimal
    fractions against float rounding); leftover rows go to train. The same
    spec always produces the same partition.
    """
    n = ds.n
    if n < 4:
        raise ParamError("need at least 4 rows to split")
    sizes = [int(math.floor(f * n + 1e-9)) for f in spec.fractions]
    remainder = n - sum(sizes)
    sizes[0] += remainder
    if sizes[2] < 1 or sizes[3] < 1:
        raise SplitError(f"calib/test splits empty for n={n}, fractions={spec.fractions}")
    for name, frac, size in zip(SPLIT_NAMES, spec.fractions, sizes):
        if frac > 0 and size < 1:
            raise SplitError(f"{name} split empty for n={n}, fractions={spec.fractions}")
    perm = np.random.default_rng(spec.seed).permutation(n)
    out = []
    start = 0
    for name, size in zip(SPLIT_NAMES, sizes):
        idx = np.sort(perm[start:start + size])
        out.append(ds.take(idx, tag=f"{ds.tag or 'ds'}@seed{spec.seed}:{name}"))
        start += size
    return tuple(out)


def split_indices(n: int, spec: SplitSpec):
    """Index sets of the four splits, in (train, ot_fit, calib, test) order."""
    sizes = [int(math.floor(f * n + 1e-9)) for f in spec.fractions]
    sizes[0] += n - sum(sizes)
    perm = np.random.default_rng(spec.seed).permutation(n)
    out, start = [], 0
    for size in sizes:
        out.append(np.sort(perm[start:start + size]))
        start += size
    return tuple(out)


# ---------------------------------------------------------------------------
# Synthetic generators
# ---------------------------------------------------------------------------

def _mean_function(X: np.ndarray, d: int, slope: float) -> np.ndarray:
    # shared conditional mean: slope * (mean feature - 1/2), identical per output dim
    m = slope * (X.mean(axis=1) - 0.5)
    return np.repeat(m[:, None], d, axis=1)


def _check_spd(cov: np.ndarray, d: int) -> np.ndarray:
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (d, d):
        raise ParamError(f"covariance must be {d}x{d}, got {cov.shape}")
    if not np.allclose(cov, cov.T, atol=1e-12):
        raise ParamError("covariance must be symmetric")
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise ParamError("covariance must be positive definite") from None


def synth_dataset(kind: str, n: int, d: int = 2, params: dict | None = None,
                  seed: int = 0, tag: str | None = None) -> Dataset:
    """Seeded synthetic data: uniform features, mean function plus shaped noise.

    kinds:
      gaussian -- noise ~ N(0, cov) (params: cov (default I), slope, p)
      banana   -- d=2 curved residuals: (t, c*(t^2 - spread^2)) + vertical noise
      mixture  -- Gaussian mixture noise (params: means, weights, covs|cov)

    Feature, noise, and mixture-assignment streams are seeded independently, so
    a one-component zero-mean mixture reproduces the gaussian case bit-for-bit.
    """
    if n < 1:
        raise ParamError("n must be >= 1")
    params = dict(params or {})
    p = int(params.get("p", 1))
    slope = float(params.get("slope", 1.0))
    ss_x, ss_noise, ss_assign = np.random.SeedSequence(seed).spawn(3)
    rng_x = np.random.default_rng(ss_x)
    rng_noise = np.random.default_rng(ss_noise)
    X = rng_x.uniform(0.0, 1.0, size=(n, p))

    if kind == "gaussian":
        cov = params.get("cov", np.eye(d))
        L = _check_spd(cov, d)
        noise = rng_noise.standard_normal((n, d)) @ L.T
    elif kind == "banana":
        if d != 2:
            raise ParamError("banana generator is fixed at d=2")
        spread = float(params.get("spread", 1.0))
        curvature = float(params.get("curvature", 1.0))
        vnoise = float(params.get("noise", 0.3))
        Z = rng_noise.standard_normal((n, 2))
        t = spread * Z[:, 0]
        noise = np.column_stack([t, curvature * (t**2 - spread**2) + vnoise * Z[:, 1]])
    elif kind == "mixture":
        means = np.asarray(params.get("means", np.zeros((1, d))), dtype=float)
        if means.ndim != 2 or means.shape[1] != d:
            raise ParamError(f"mixture means must be k x {d}")
        k = means.shape[0]
        weights = np.asarray(params.get("weights", np.full(k, 1.0 / k)), dtype=float)
        if weights.shape != (k,) or (weights < 0).any() or abs(weights.sum() - 1.0) > 1e-9:
            raise ParamError("mixture weights must be nonnegative and sum to 1")
        covs = params.get("covs")
        if covs is None:
            covs = [params.get("cov", np.eye(d))] * k
        Ls = [_check_spd(np.asarray(c, dtype=float), d) for c in covs]
        Z = rng_noise.standard_normal((n, d))
        assign = np.random.default_rng(ss_assign).choice(k, size=n, p=weights)
        noise = np.empty((n, d))
        for comp in range(k):
            rows = assign == comp
            noise[rows] = means[comp] + Z[rows] @ Ls[comp].T
    else:
        raise ParamError(f"unknown synthetic kind {kind!r}")

    Y = _mean_function(X, d, slope) + noise
    return Dataset(X, Y, tag=tag or f"synth:{kind}:{seed}")


# ---------------------------------------------------------------------------
# Point and quantile predictors
# ---------------------------------------------------------------------------

class Regressor:
    """Base point predictor; subclasses fill predict_rows."""

    kind = "base"

    def __init__(self):
        self.fit_tag: str | None = None
        self.p: int | None = None
        self.d: int | None = None

    def _check_fitted(self):
        if self.p is None:
            raise NotFittedError(f"{self.kind} regressor is not fitted")

    def predict(self, x) -> np.ndarray:
        return self.predict_rows(np.atleast_2d(np.asarray(x, dtype=float)))[0]

    def predict_rows(self, X) -> np.ndarray:
        raise NotImplementedError


def _knn_indices(train_X: np.ndarray, X: np.ndarray, k: int) -> np.ndarray:
    # squared distances, stable argsort so equal distances favor lower index
    d2 = ((X[:, None, :] - train_X[None, :, :]) ** 2).sum(axis=2)
    return np.argsort(d2, axis=1, kind="stable")[:, :k]


class KnnMeanRegressor(Regressor):
    kind = "knn_mean"

    def __init__(self, k: int):
        super().__init__()
        self.k = int(k)
        self._X = None
        self._Y = None

    def fit(self, train: Dataset) -> "KnnMeanRegressor":
        if self.k < 1 or self.k > train.n:
            raise ParamError(f"k={self.k} outside [1, n_train={train.n}]")
        self._X, self._Y = train.features, train.targets
        self.p, self.d, self.fit_tag = train.p, train.d, train.tag
        return self

    def predict_rows(self, X) -> np.ndarray:
        self._check_fitted()
        X = np.asarray(X, dtype=float)
        if X.shape[1] != self.p:
            raise DimensionError(f"expected {self.p} features, got {X.shape[1]}")
        idx = _knn_indices(self._X, X, self.k)
        return self._Y[idx].mean(axis=1)


class RidgeRegressor(Regressor):
    """Least squares with an L2 penalty on the non-intercept coefficients."""

    kind = "ridge_linear"

    def __init__(self, lam: float = 0.0):
        super().__init__()
        if lam < 0:
            raise ParamError("ridge penalty must be >= 0")
        self.lam = float(lam)
        self.coef = None  # (p + 1, d), last row is the intercept

    def fit(self, train: Dataset) -> "RidgeRegressor":
        X = np.column_stack([train.features, np.ones(train.n)])
        penalty = self.lam * np.eye(train.p + 1)
        penalty[-1, -1] = 0.0
        self.coef = np.linalg.solve(X.T @ X + penalty, X.T @ train.targets)
        self.p, self.d, self.fit_tag = train.p, train.d, train.tag
        return self

    def predict_rows(self, X) -> np.ndarray:
        self._check_fitted()
        X = np.asarray(X, dtype=float)
        if X.shape[1] != self.p:
            raise DimensionError(f"expected {self.p} features, got {X.shape[1]}")
        return np.column_stack([X, np.ones(X.shape[0])]) @ self.coef


def fit_regressor(train: Dataset, kind: str = "knn_mean", **params) -> Regressor:
    if kind == "knn_mean":
        return KnnMeanRegressor(params.get("k", 10)).fit(train)
    if kind == "ridge_linear":
        return RidgeRegressor(params.get("lam", 0.0)).fit(train)
    raise ParamError(f"unknown regressor kind {kind!r}")


class KnnQuantilePredictor:
    """Per-dimension empirical quantiles of the k nearest neighbors' targets."""

    kind = "knn_quantile"

    def __init__(self, k: int, alpha_lo: float, alpha_hi: float):
        # closed endpoints allowed: (0, 1) degrades to per-dimension min/max
        if not (0.0 <= alpha_lo < alpha_hi <= 1.0):
            raise ParamError(f"need 0 <= alpha_lo < alpha_hi <= 1, got ({alpha_lo}, {alpha_hi})")
        self.k = int(k)
        self.alpha_lo = float(alpha_lo)
        self.alpha_hi = float(alpha_hi)
        self._X = None
        self._Y = None
        self.fit_tag = None
        self.p = None
        self.d = None

    def fit(self, train: Dataset) -> "KnnQuantilePredictor":
        if self.k < 1 or self.k > train.n:
            raise ParamError(f"k={self.k} outside [1, n_train={train.n}]")
        self._X, self._Y = train.features, train.targets
        self.p, self.d, self.fit_tag = train.p, train.d, train.tag
        return self

    def predict_bounds(self, x):
        lo, hi = self.bounds_rows(np.atleast_2d(np.asarray(x, dtype=float)))
        return lo[0], hi[0]

    def bounds_rows(self, X):
        if self._X is None:
            raise NotFittedError("quantile predictor is not fitted")
        X = np.asarray(X, dtype=float)
        if X.shape[1] != self.p:
            raise DimensionError(f"expected {self.p} features, got {X.shape[1]}")
        idx = _knn_indices(self._X, X, self.k)
        neigh = self._Y[idx]  # (q, k, d)
        # linear interpolation of order statistics (type-7 quantile)
        lo = np.quantile(neigh, self.alpha_lo, axis=1, method="linear")
        hi = np.quantile(neigh, self.alpha_hi, axis=1, method="linear")
        return lo, hi


def fit_quantile_predictor(train: Dataset, k: int, alpha_lo: float,
                           alpha_hi: float) -> KnnQuantilePredictor:
    return KnnQuantilePredictor(k, alpha_lo, alpha_hi).fit(train)


def residuals(ds: Dataset, reg: Regressor) -> ScoreMatrix:
    """Signed residual vectors y_i - yhat(x_i), tagged with their provenance."""
    pred = reg.predict_rows(ds.features)
    if pred.shape != ds.targets.shape:
        raise DimensionError("regressor output dimension does not match targets")
    return ScoreMatrix(ds.targets - pred, origin=f"{ds.tag or 'ds'}|{reg.kind}")
