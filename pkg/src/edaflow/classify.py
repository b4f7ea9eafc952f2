"""Six from-scratch binary classifiers on 11-dimensional feature vectors.

Kinds: dt (CART), lr (logistic regression), gsvm (RBF soft-margin SVM via
SMO), knn, bt (bagged trees), sknn (random-subspace KNN). High risk is the
positive class; every tie (votes, probability exactly 0.5, decision value 0)
resolves to High.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DataError
from .features import FEATURE_NAMES, FeatureMatrix
from .signal_io import RiskLabel

MODEL_HEADER = "EDAFLOW-MODEL-1"
ALGO_KINDS = ("dt", "lr", "gsvm", "knn", "bt", "sknn")


@dataclass(frozen=True)
class AlgoSpec:
    kind: str
    seed: int = 0
    # knn / sknn
    k: int = 5
    # dt / bt
    max_depth: int = 20
    min_leaf: int = 5
    n_trees: int = 30
    # lr
    lr_lambda: float = 1e-4
    lr_tol: float = 1e-6
    lr_max_iter: int = 5000
    # gsvm
    svm_c: float = 1.0
    svm_gamma: Optional[float] = None  # default 1/(d * var of standardized features)
    svm_tol: float = 1e-3
    # sknn
    n_members: int = 30
    subspace_dim: int = 6

    def __post_init__(self):
        if self.kind not in ALGO_KINDS:
            raise ValueError(f"unknown classifier kind {self.kind!r}")
        if self.k < 1 or self.n_trees < 1 or self.n_members < 1 or self.subspace_dim < 1:
            raise ValueError("counts must be at least 1")
        if self.svm_c <= 0 or self.lr_lambda < 0:
            raise ValueError("invalid regularization parameters")


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray  # features with zero training variance map to 0

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        constant = std == 0
        return cls(mean=mean, std=np.where(constant, 1.0, std), constant=constant)

    def transform(self, X: np.ndarray) -> np.ndarray:
        Z = (X - self.mean) / self.std
        if self.constant.any():
            Z = np.where(self.constant, 0.0, Z)
        return Z


@dataclass
class TrainedModel:
    kind: str
    standardizer: Standardizer
    params: dict
    spec: AlgoSpec


# ---------------------------------------------------------------- decision tree

def _gini(counts: np.ndarray) -> float:
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return float(1.0 - (p**2).sum())


def _best_split(X: np.ndarray, y: np.ndarray, min_leaf: int):
    """Lowest-Gini split; ties break on lowest feature index, then lowest threshold."""
    n, d = X.shape
    node_counts = np.array([np.sum(y == 0), np.sum(y == 1)], dtype=float)
    node_gini = _gini(node_counts)
    best = None
    for feat in range(d):
        order = np.argsort(X[:, feat], kind="stable")
        xs = X[order, feat]
        ys = y[order]
        hi_prefix = np.cumsum(ys == 1)
        lo_prefix = np.cumsum(ys == 0)
        # candidate split after position i (1-based left size)
        sizes = np.arange(1, n)
        valid = (xs[1:] > xs[:-1]) & (sizes >= min_leaf) & (n - sizes >= min_leaf)
        if not valid.any():
            continue
        left_hi = hi_prefix[:-1][valid]
        left_lo = lo_prefix[:-1][valid]
        left_n = sizes[valid]
        right_hi = hi_prefix[-1] - left_hi
        right_lo = lo_prefix[-1] - left_lo
        right_n = n - left_n
        gl = 1.0 - ((left_lo / left_n) ** 2 + (left_hi / left_n) ** 2)
        gr = 1.0 - ((right_lo / right_n) ** 2 + (right_hi / right_n) ** 2)
        weighted = (left_n * gl + right_n * gr) / n
        i = int(np.argmin(weighted))  # first minimum -> lowest threshold
        if weighted[i] < node_gini - 1e-12 and (best is None or weighted[i] < best[0] - 1e-12):
            pos = np.nonzero(valid)[0][i]
            thr = 0.5 * (xs[pos] + xs[pos + 1])
            best = (float(weighted[i]), feat, float(thr))
    return best


def _leaf(y: np.ndarray) -> dict:
    hi = int(np.sum(y == 1))
    lo = len(y) - hi
    return {"leaf": int(RiskLabel.HIGH) if hi >= lo else int(RiskLabel.LOW)}


def _grow_tree(X: np.ndarray, y: np.ndarray, depth: int, spec: AlgoSpec) -> dict:
    if depth >= spec.max_depth or len(y) < 2 * spec.min_leaf or len(np.unique(y)) < 2:
        return _leaf(y)
    best = _best_split(X, y, spec.min_leaf)
    if best is None:
        return _leaf(y)
    _, feat, thr = best
    left = X[:, feat] <= thr
    return {
        "feature": feat,
        "threshold": thr,
        "left": _grow_tree(X[left], y[left], depth + 1, spec),
        "right": _grow_tree(X[~left], y[~left], depth + 1, spec),
    }


def _tree_predict(node: dict, x: np.ndarray) -> int:
    while "leaf" not in node:
        node = node["left"] if x[node["feature"]] <= node["threshold"] else node["right"]
    return node["leaf"]


# ---------------------------------------------------------- logistic regression

def _fit_logistic(X: np.ndarray, y: np.ndarray, lam: float, tol: float, max_iter: int):
    """Full-batch gradient descent with Armijo backtracking; returns (w, b, losses)."""
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0

    def loss(w, b):
        z = X @ w + b
        # log(1 + exp(-y*z)) with y in {-1,+1}, stable form
        yz = np.where(y == 1, z, -z)
        return float(np.mean(np.logaddexp(0.0, -yz)) + lam * (w @ w))

    losses = [loss(w, b)]
    step = 1.0
    for _ in range(max_iter):
        p = 1.0 / (1.0 + np.exp(-(X @ w + b)))
        err = p - (y == 1)
        gw = X.T @ err / n + 2.0 * lam * w
        gb = float(err.mean())
        gnorm2 = float(gw @ gw + gb * gb)
        if np.sqrt(gnorm2) < tol:
            break
        step = min(step * 2.0, 1e4)
        cur = losses[-1]
        while step > 1e-16:
            cand = loss(w - step * gw, b - step * gb)
            if cand <= cur - 1e-4 * step * gnorm2:
                break
            step *= 0.5
        w = w - step * gw
        b = b - step * gb
        losses.append(loss(w, b))
    return w, b, losses


# ----------------------------------------------------------------- RBF SVM (SMO)

def _rbf_matrix(X: np.ndarray, Z: np.ndarray, gamma: float) -> np.ndarray:
    d2 = ((X[:, None, :] - Z[None, :, :]) ** 2).sum(axis=2)
    return np.exp(-gamma * d2)


def _fit_svm(X: np.ndarray, y_pm: np.ndarray, C: float, gamma: float, tol: float,
             seed: int, max_passes: int = 200):
    """SMO pairwise coordinate ascent on the soft-margin dual."""
    n = len(y_pm)
    K = _rbf_matrix(X, X, gamma)
    alpha = np.zeros(n)
    b = 0.0
    E = -y_pm.astype(float)  # f(x_i) - y_i with alpha = 0, b = 0
    rng = np.random.default_rng(seed)

    def take_step(i, j):
        nonlocal b, E
        if i == j:
            return False
        if y_pm[i] != y_pm[j]:
            L = max(0.0, alpha[j] - alpha[i])
            Hb = min(C, C + alpha[j] - alpha[i])
        else:
            L = max(0.0, alpha[i] + alpha[j] - C)
            Hb = min(C, alpha[i] + alpha[j])
        if Hb - L < 1e-12:
            return False
        eta = 2.0 * K[i, j] - K[i, i] - K[j, j]
        if eta >= 0:
            return False
        aj_new = np.clip(alpha[j] - y_pm[j] * (E[i] - E[j]) / eta, L, Hb)
        if abs(aj_new - alpha[j]) < 1e-12:
            return False
        ai_new = alpha[i] + y_pm[i] * y_pm[j] * (alpha[j] - aj_new)
        da_i = ai_new - alpha[i]
        da_j = aj_new - alpha[j]
        b1 = b - E[i] - y_pm[i] * da_i * K[i, i] - y_pm[j] * da_j * K[i, j]
        b2 = b - E[j] - y_pm[i] * da_i * K[i, j] - y_pm[j] * da_j * K[j, j]
        if 0 < ai_new < C:
            b_new = b1
        elif 0 < aj_new < C:
            b_new = b2
        else:
            b_new = 0.5 * (b1 + b2)
        E += y_pm[i] * da_i * K[i] + y_pm[j] * da_j * K[j] + (b_new - b)
        alpha[i], alpha[j] = ai_new, aj_new
        b = b_new
        return True

    for _ in range(max_passes):
        changed = 0
        for i in range(n):
            r = E[i] * y_pm[i]
            if (r < -tol and alpha[i] < C) or (r > tol and alpha[i] > 0):
                non_bound = np.nonzero((alpha > 0) & (alpha < C))[0]
                if non_bound.size:
                    j = int(non_bound[np.argmax(np.abs(E[i] - E[non_bound]))])
                    if take_step(i, j):
                        changed += 1
                        continue
                j = int(rng.integers(n))
                if take_step(i, j):
                    changed += 1
        if changed == 0:
            break
    return alpha, b


# -------------------------------------------------------------------- training

def _check_two_classes(y: np.ndarray, kind: str):
    if len(np.unique(y)) < 2:
        raise DataError(f"{kind} training requires both classes present")


def train(data: FeatureMatrix, spec: AlgoSpec) -> TrainedModel:
    """Fit the standardizer on training rows, then the requested classifier."""
    if len(data) < 2:
        raise DataError(f"need at least 2 training rows, got {len(data)}")
    std = Standardizer.fit(data.values)
    X = std.transform(data.values)
    y = np.asarray(data.labels, dtype=int)
    kind = spec.kind

    if kind == "knn":
        params = {"X": X, "y": y, "k": min(spec.k, len(y))}
    elif kind == "dt":
        _check_two_classes(y, kind)
        params = {"tree": _grow_tree(X, y, 0, spec)}
    elif kind == "lr":
        _check_two_classes(y, kind)
        y_pm = np.where(y == 1, 1, -1)
        w, b, losses = _fit_logistic(X, y_pm, spec.lr_lambda, spec.lr_tol, spec.lr_max_iter)
        params = {"w": w, "b": b, "losses": losses}
    elif kind == "gsvm":
        _check_two_classes(y, kind)
        y_pm = np.where(y == 1, 1, -1)
        gamma = spec.svm_gamma
        if gamma is None:
            var = float(X.var())
            gamma = 1.0 / (X.shape[1] * var) if var > 0 else 1.0
        alpha, b = _fit_svm(X, y_pm, spec.svm_c, gamma, spec.svm_tol, spec.seed)
        sv = alpha > 1e-12
        params = {"sv_x": X[sv], "sv_coef": (alpha * y_pm)[sv], "b": b, "gamma": gamma,
                  "alpha": alpha, "y_pm": y_pm}
    elif kind == "bt":
        _check_two_classes(y, kind)
        trees = []
        n = len(y)
        for m in range(spec.n_trees):
            rng = np.random.default_rng(spec.seed + m)
            idx = rng.integers(0, n, n)
            trees.append(_grow_tree(X[idx], y[idx], 0, spec))
        params = {"trees": trees}
    elif kind == "sknn":
        _check_two_classes(y, kind)
        d = X.shape[1]
        members = []
        for m in range(spec.n_members):
            rng = np.random.default_rng(spec.seed + m)
            feats = np.sort(rng.choice(d, size=min(spec.subspace_dim, d), replace=False))
            members.append({"features": feats, "X": X[:, feats], "y": y,
                            "k": min(spec.k, len(y))})
        params = {"members": members}
    else:  # pragma: no cover - guarded by AlgoSpec
        raise ValueError(kind)
    return TrainedModel(kind=kind, standardizer=std, params=params, spec=spec)


# ------------------------------------------------------------------ prediction

def _knn_vote(Xtr: np.ndarray, ytr: np.ndarray, k: int, Z: np.ndarray) -> np.ndarray:
    d2 = ((Z[:, None, :] - Xtr[None, :, :]) ** 2).sum(axis=2)
    nn = np.argpartition(d2, min(k, d2.shape[1]) - 1, axis=1)[:, :k]
    hi = (ytr[nn] == 1).sum(axis=1)
    return np.where(hi * 2 >= k, int(RiskLabel.HIGH), int(RiskLabel.LOW))


def predict_batch(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    """Labels (RiskLabel values) for each row of X."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != len(model.standardizer.mean):
        raise ValueError(
            f"dimension mismatch: expected {len(model.standardizer.mean)} features, "
            f"got {X.shape[1]}"
        )
    if not np.isfinite(X).all():
        raise ValueError("non-finite feature values")
    Z = model.standardizer.transform(X)
    p = model.params
    kind = model.kind
    if kind == "knn":
        return _knn_vote(p["X"], p["y"], p["k"], Z)
    if kind == "dt":
        return np.array([_tree_predict(p["tree"], z) for z in Z])
    if kind == "lr":
        prob = 1.0 / (1.0 + np.exp(-(Z @ p["w"] + p["b"])))
        return np.where(prob >= 0.5, int(RiskLabel.HIGH), int(RiskLabel.LOW))
    if kind == "gsvm":
        dec = _rbf_matrix(Z, p["sv_x"], p["gamma"]) @ p["sv_coef"] + p["b"]
        return np.where(dec >= 0, int(RiskLabel.HIGH), int(RiskLabel.LOW))
    if kind == "bt":
        votes = np.array([[_tree_predict(t, z) for t in p["trees"]] for z in Z])
        hi = (votes == 1).sum(axis=1)
        return np.where(hi * 2 >= len(p["trees"]), int(RiskLabel.HIGH), int(RiskLabel.LOW))
    if kind == "sknn":
        votes = np.stack([
            _knn_vote(m["X"], m["y"], m["k"], Z[:, m["features"]]) for m in p["members"]
        ])
        hi = (votes == 1).sum(axis=0)
        return np.where(hi * 2 >= len(p["members"]), int(RiskLabel.HIGH), int(RiskLabel.LOW))
    raise ValueError(kind)  # pragma: no cover


def predict(model: TrainedModel, x) -> RiskLabel:
    return RiskLabel(int(predict_batch(model, np.asarray(x, dtype=float)[None, :])[0]))


def svm_decision_values(model: TrainedModel, X_std: np.ndarray) -> np.ndarray:
    """Decision function on already-standardized inputs (for KKT checks)."""
    p = model.params
    return _rbf_matrix(X_std, p["sv_x"], p["gamma"]) @ p["sv_coef"] + p["b"]


# --------------------------------------------------------------- serialization

def _encode(obj):
    if isinstance(obj, np.ndarray):
        return {"__nd__": obj.tolist()}
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, dict):
        return {k: _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    return obj


def _decode(obj):
    if isinstance(obj, dict):
        if "__nd__" in obj:
            return np.asarray(obj["__nd__"])
        return {k: _decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    return obj


def save_model(model: TrainedModel, path) -> None:
    doc = {
        "header": MODEL_HEADER,
        "kind": model.kind,
        "spec": {k: v for k, v in model.spec.__dict__.items()},
        "standardizer": {
            "mean": _encode(model.standardizer.mean),
            "std": _encode(model.standardizer.std),
            "constant": _encode(model.standardizer.constant.astype(int)),
        },
        "params": _encode(model.params),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_model(path) -> TrainedModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("header") != MODEL_HEADER:
        raise DataError(f"{path}: not a {MODEL_HEADER} file")
    std = Standardizer(
        mean=np.asarray(_decode(doc["standardizer"]["mean"])),
        std=np.asarray(_decode(doc["standardizer"]["std"])),
        constant=np.asarray(_decode(doc["standardizer"]["constant"])).astype(bool),
    )
    params = _decode(doc["params"])
    if doc["kind"] == "knn":
        params["y"] = params["y"].astype(int)
    elif doc["kind"] == "sknn":
        for m in params["members"]:
            m["features"] = m["features"].astype(int)
            m["y"] = m["y"].astype(int)
    return TrainedModel(kind=doc["kind"], standardizer=std, params=params,
                        spec=AlgoSpec(**doc["spec"]))
