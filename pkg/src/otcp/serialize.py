"""Versioned JSON artifacts for fitted maps and calibrated predictors.

Arrays are stored as nested lists with repr-precision floats, so a round trip
reproduces every value exactly. Predictor files embed everything needed to
score and contour without refitting: regressor state, whitener, quantile
predictor, or the full transport map (potentials, grid, standardized source,
standardizer).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .conformal import (
    AbsoluteResidualScore,
    CalibratedPredictor,
    EuclideanResidualScore,
    MahalanobisResidualScore,
    MaxIntervalScore,
    TransportRankScore,
)
from .data import Dataset, KnnMeanRegressor, KnnQuantilePredictor, RidgeRegressor
from .entropic import EntropicMap
from .errors import ParamError
from .sinkhorn import DualPotentials, OtProblem, Standardizer
from .sphere import SphericalGrid

MAP_FORMAT = "entropic-map"
PREDICTOR_FORMAT = "conformal-predictor"
VERSION = 1


def _arr(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def _check_header(doc: dict, expected: str):
    if doc.get("format") != expected or doc.get("version") != VERSION:
        raise ParamError(
            f"expected {expected} v{VERSION}, got {doc.get('format')} v{doc.get('version')}")


# ---------------------------------------------------------------------------
# Regressor / quantile predictor state
# ---------------------------------------------------------------------------

def _regressor_to_dict(reg) -> dict:
    if isinstance(reg, KnnMeanRegressor):
        return {"kind": reg.kind, "k": reg.k, "X": _arr(reg._X), "Y": _arr(reg._Y),
                "tag": reg.fit_tag}
    if isinstance(reg, RidgeRegressor):
        return {"kind": reg.kind, "lam": reg.lam, "coef": _arr(reg.coef),
                "p": reg.p, "d": reg.d, "tag": reg.fit_tag}
    raise ParamError(f"cannot serialize regressor kind {type(reg).__name__}")


def _regressor_from_dict(doc: dict):
    if doc["kind"] == "knn_mean":
        X, Y = np.asarray(doc["X"]), np.asarray(doc["Y"])
        return KnnMeanRegressor(doc["k"]).fit(Dataset(X, Y, tag=doc.get("tag")))
    if doc["kind"] == "ridge_linear":
        reg = RidgeRegressor(doc["lam"])
        reg.coef = np.asarray(doc["coef"], dtype=float)
        reg.p, reg.d, reg.fit_tag = doc["p"], doc["d"], doc.get("tag")
        return reg
    raise ParamError(f"unknown regressor kind {doc['kind']!r}")


def _quantile_to_dict(qp: KnnQuantilePredictor) -> dict:
    return {"k": qp.k, "alpha_lo": qp.alpha_lo, "alpha_hi": qp.alpha_hi,
            "X": _arr(qp._X), "Y": _arr(qp._Y), "tag": qp.fit_tag}


def _quantile_from_dict(doc: dict) -> KnnQuantilePredictor:
    ds = Dataset(np.asarray(doc["X"]), np.asarray(doc["Y"]), tag=doc.get("tag"))
    return KnnQuantilePredictor(doc["k"], doc["alpha_lo"], doc["alpha_hi"]).fit(ds)


# ---------------------------------------------------------------------------
# Entropic map
# ---------------------------------------------------------------------------

def map_to_dict(emap: EntropicMap) -> dict:
    grid = emap.grid
    return {
        "format": MAP_FORMAT, "version": VERSION,
        "epsilon": emap.epsilon,
        "f": _arr(emap.potentials.f), "g": _arr(emap.potentials.g),
        "iterations": emap.potentials.iterations,
        "marginal_error": emap.potentials.marginal_error,
        "converged": emap.potentials.converged,
        "source_std": _arr(emap.source_std),
        "standardizer": {"mean": _arr(emap.standardizer.mean),
                         "scale": _arr(emap.standardizer.scale)},
        "grid": {"dim": grid.dim, "n_r": grid.n_r, "n_s": grid.n_s, "n_o": grid.n_o,
                 "points": _arr(grid.points), "radii": _arr(grid.radii),
                 "directions": _arr(grid.directions)},
        "origin": emap.origin,
    }


def map_from_dict(doc: dict) -> EntropicMap:
    _check_header(doc, MAP_FORMAT)
    g = doc["grid"]
    grid = SphericalGrid(g["dim"], g["n_r"], g["n_s"], g["n_o"],
                         np.asarray(g["points"], dtype=float),
                         np.asarray(g["radii"], dtype=float),
                         np.asarray(g["directions"], dtype=float))
    source_std = np.asarray(doc["source_std"], dtype=float)
    prob = OtProblem(source_std, grid.points, doc["epsilon"])
    pot = DualPotentials(np.asarray(doc["f"], dtype=float),
                         np.asarray(doc["g"], dtype=float),
                         doc["epsilon"], prob, doc["iterations"],
                         doc["marginal_error"], doc["converged"])
    std = Standardizer(np.asarray(doc["standardizer"]["mean"], dtype=float),
                       np.asarray(doc["standardizer"]["scale"], dtype=float))
    return EntropicMap(pot, grid, source_std, std, doc.get("origin", ""))


def save_map(emap: EntropicMap, path) -> None:
    Path(path).write_text(json.dumps(map_to_dict(emap)) + "\n", encoding="utf-8")


def load_map(path) -> EntropicMap:
    return map_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# ---------------------------------------------------------------------------
# Calibrated predictors
# ---------------------------------------------------------------------------

def _score_fn_to_dict(fn) -> dict:
    doc = {"kind": fn.kind}
    if isinstance(fn, MaxIntervalScore):
        doc["quantile_predictor"] = _quantile_to_dict(fn.quantile_predictor)
        return doc
    doc["regressor"] = _regressor_to_dict(fn.regressor)
    if isinstance(fn, MahalanobisResidualScore):
        doc["whitener"] = _arr(fn.whitener)
    if isinstance(fn, TransportRankScore):
        doc["map"] = map_to_dict(fn.transport_map)
    return doc


def _score_fn_from_dict(doc: dict):
    kind = doc["kind"]
    if kind == "mcp_max":
        return MaxIntervalScore(_quantile_from_dict(doc["quantile_predictor"]))
    reg = _regressor_from_dict(doc["regressor"])
    if kind == "abs_univariate":
        return AbsoluteResidualScore(reg)
    if kind == "merge_l2":
        return EuclideanResidualScore(reg)
    if kind == "merge_mahalanobis":
        return MahalanobisResidualScore(reg, np.asarray(doc["whitener"], dtype=float))
    if kind == "otcp":
        return TransportRankScore(reg, map_from_dict(doc["map"]))
    raise ParamError(f"unknown score kind {kind!r}")


def predictor_to_dict(pred: CalibratedPredictor) -> dict:
    return {
        "format": PREDICTOR_FORMAT, "version": VERSION,
        "alpha": pred.alpha, "threshold": pred.threshold,
        "cal_scores": _arr(pred.cal_scores),
        "residual_low": None if pred.residual_low is None else _arr(pred.residual_low),
        "residual_high": None if pred.residual_high is None else _arr(pred.residual_high),
        "band": list(pred.band) if pred.band else None,
        "score": _score_fn_to_dict(pred.score_fn),
    }


def predictor_from_dict(doc: dict) -> CalibratedPredictor:
    _check_header(doc, PREDICTOR_FORMAT)
    low = doc.get("residual_low")
    high = doc.get("residual_high")
    band = doc.get("band")
    return CalibratedPredictor(
        _score_fn_from_dict(doc["score"]), doc["alpha"], doc["threshold"],
        np.asarray(doc["cal_scores"], dtype=float),
        None if low is None else np.asarray(low, dtype=float),
        None if high is None else np.asarray(high, dtype=float),
        tuple(band) if band else None)


def save_predictor(pred: CalibratedPredictor, path) -> None:
    Path(path).write_text(json.dumps(predictor_to_dict(pred)) + "\n", encoding="utf-8")


def load_predictor(path) -> CalibratedPredictor:
    return predictor_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
