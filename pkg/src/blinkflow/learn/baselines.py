"""Baseline classifiers: kNN and linear SVM on metric features, MLP and a 1-D
LSTM on resampled timeseries, plus subject-grouped grid search."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, TrainingFailureError
from .optim import Adam, clip_by_global_norm

METHODS = ("knn", "linear_svm", "mlp", "lstm1d")

DEFAULT_GRIDS = {
    "knn": {"k": [1, 3, 5, 7]},
    "linear_svm": {"lam": [1e-3, 1e-2, 1e-1, 1.0]},
    "mlp": {"hidden": [8, 32], "weight_decay": [0.0, 1e-3]},
    "lstm1d": {"hidden": [4, 8]},
}


def standardize(train: np.ndarray, test: np.ndarray):
    """Scale with the training mean/std; zero-variance columns keep scale 1."""
    mu = train.mean(axis=0)
    sd = train.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    return (train - mu) / sd, (test - mu) / sd


def _vote(labels: np.ndarray, n_classes: int) -> int:
    # argmax picks the smallest class index among tied counts
    return int(np.argmax(np.bincount(labels, minlength=n_classes)))


def knn_predict(X_train, y_train, X_test, k: int, n_classes: int | None = None) -> np.ndarray:
    X_train = np.atleast_2d(np.asarray(X_train, dtype=float))
    X_test = np.atleast_2d(np.asarray(X_test, dtype=float))
    y_train = np.asarray(y_train, dtype=int)
    if not 1 <= k <= len(y_train):
        raise ConfigurationError(f"k={k} must lie in [1, {len(y_train)}]")
    n_classes = n_classes or int(y_train.max()) + 1
    d2 = ((X_test[:, None, :] - X_train[None, :, :]) ** 2).sum(axis=-1)
    nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return np.array([_vote(y_train[row], n_classes) for row in nearest])


# -- linear SVM ---------------------------------------------------------------


@dataclass
class LinearSVM:
    """Hinge-loss linear classifier, one-vs-rest for more than two classes."""

    W: np.ndarray  # (n_models, n_features)
    b: np.ndarray

    def decision(self, X):
        return np.atleast_2d(X) @ self.W.T + self.b

    def predict(self, X):
        s = self.decision(X)
        if self.W.shape[0] == 1:
            return (s[:, 0] > 0).astype(int)
        return np.argmax(s, axis=1)


def _pegasos(X, s, lam, epochs, rng):
    """Pegasos subgradient descent on lam/2 |w|^2 + mean hinge(s * Xw).

    The bias is learned as the weight of an appended constant feature.
    """
    Xa = np.hstack([X, np.ones((X.shape[0], 1))])
    w = np.zeros(Xa.shape[1])
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(Xa.shape[0]):
            t += 1
            eta = 1.0 / (lam * t)
            margin = s[i] * (Xa[i] @ w)
            w *= 1 - eta * lam
            if margin < 1:
                w += eta * s[i] * Xa[i]
    return w[:-1], w[-1]


def fit_linear_svm(X, y, n_classes=None, lam=1e-2, epochs=100, seed=0) -> LinearSVM:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=int)
    n_classes = n_classes or int(y.max()) + 1
    if lam <= 0:
        raise ConfigurationError("lam must be positive")
    rng = np.random.default_rng(seed)
    targets = [1] if n_classes == 2 else range(n_classes)
    W, B = [], []
    for c in targets:
        s = np.where(y == c, 1.0, -1.0)
        w, b = _pegasos(X, s, lam, epochs, rng)
        W.append(w)
        B.append(b)
    return LinearSVM(np.array(W), np.array(B))


# -- MLP ----------------------------------------------------------------------


def _softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def init_mlp(n_in, hidden, n_classes, seed=0) -> dict:
    rng = np.random.default_rng(seed)
    a1, a2 = 1 / np.sqrt(n_in), 1 / np.sqrt(hidden)
    return {
        "W1": rng.uniform(-a1, a1, (hidden, n_in)),
        "b1": np.zeros(hidden),
        "W2": rng.uniform(-a2, a2, (n_classes, hidden)),
        "b2": np.zeros(n_classes),
    }


def mlp_forward(params, X):
    h = np.tanh(X @ params["W1"].T + params["b1"])
    return _softmax(h @ params["W2"].T + params["b2"])


def mlp_grad(params, X, y, weight_decay=0.0):
    """Mean cross-entropy (+ L2 on weights) and its gradient."""
    X = np.atleast_2d(X)
    y = np.asarray(y, dtype=int)
    n = X.shape[0]
    h = np.tanh(X @ params["W1"].T + params["b1"])
    p = _softmax(h @ params["W2"].T + params["b2"])
    loss = -np.mean(np.log(p[np.arange(n), y]))
    loss += 0.5 * weight_decay * ((params["W1"] ** 2).sum() + (params["W2"] ** 2).sum())
    dz = p.copy()
    dz[np.arange(n), y] -= 1
    dz /= n
    dh = dz @ params["W2"] * (1 - h * h)
    grads = {
        "W2": dz.T @ h + weight_decay * params["W2"],
        "b2": dz.sum(axis=0),
        "W1": dh.T @ X + weight_decay * params["W1"],
        "b1": dh.sum(axis=0),
    }
    return float(loss), grads


def fit_mlp(X, y, n_classes, hidden=16, weight_decay=0.0, epochs=300, lr=1e-2, seed=0, clip=5.0):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    params = init_mlp(X.shape[1], hidden, n_classes, seed)
    opt = Adam(params, lr=lr)
    for epoch in range(epochs):
        loss, grads = mlp_grad(params, X, y, weight_decay)
        if not np.isfinite(loss):
            raise TrainingFailureError("MLP loss is not finite", epoch)
        clip_by_global_norm(grads, clip)
        opt.step(grads)
    return params


# -- 1-D LSTM -----------------------------------------------------------------


def init_lstm1d(hidden, n_classes, seed=0, forget_bias=1.0) -> dict:
    rng = np.random.default_rng(seed)
    a = 1 / np.sqrt(1 + hidden)
    b = np.zeros(4 * hidden)
    b[hidden:2 * hidden] = forget_bias
    return {
        "W_x": rng.uniform(-a, a, 4 * hidden),
        "W_h": rng.uniform(-a, a, (4 * hidden, hidden)),
        "b": b,
        "V": rng.uniform(-1 / np.sqrt(hidden), 1 / np.sqrt(hidden), (n_classes, hidden)),
        "c": np.zeros(n_classes),
    }


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _lstm1d_scan(params, X, keep):
    """Gate order: input, forget, output, candidate. X is (B, T) scalars."""
    B, T = X.shape
    H = params["W_h"].shape[1]
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    hs, cache = [], []
    for t in range(T):
        z = X[:, t:t + 1] * params["W_x"] + h @ params["W_h"].T + params["b"]
        ig, fg, og = _sigmoid(z[:, :H]), _sigmoid(z[:, H:2 * H]), _sigmoid(z[:, 2 * H:3 * H])
        g = np.tanh(z[:, 3 * H:])
        c_prev, h_prev = c, h
        c = fg * c_prev + ig * g
        tc = np.tanh(c)
        h = og * tc
        hs.append(h)
        if keep:
            cache.append((ig, fg, og, g, c_prev, h_prev, tc))
    return hs, cache


def lstm1d_forward(params, X, pooling="mean"):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    hs, _ = _lstm1d_scan(params, X, keep=False)
    pooled = np.mean(hs, axis=0) if pooling == "mean" else hs[-1]
    return _softmax(pooled @ params["V"].T + params["c"])


def lstm1d_grad(params, X, y, pooling="mean"):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=int)
    B, T = X.shape
    H = params["W_h"].shape[1]
    hs, cache = _lstm1d_scan(params, X, keep=True)
    pooled = np.mean(hs, axis=0) if pooling == "mean" else hs[-1]
    p = _softmax(pooled @ params["V"].T + params["c"])
    loss = float(-np.mean(np.log(p[np.arange(B), y])))
    dlog = p.copy()
    dlog[np.arange(B), y] -= 1
    dlog /= B
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    grads["V"] = dlog.T @ pooled
    grads["c"] = dlog.sum(axis=0)
    dpool = dlog @ params["V"]
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    for t in reversed(range(T)):
        ig, fg, og, g, c_prev, h_prev, tc = cache[t]
        dh = dh_next + (dpool / T if pooling == "mean" else (dpool if t == T - 1 else 0.0))
        dc = dc_next + dh * og * (1 - tc * tc)
        dz = np.concatenate(
            [dc * g * ig * (1 - ig), dc * c_prev * fg * (1 - fg), dh * tc * og * (1 - og), dc * ig * (1 - g * g)],
            axis=1,
        )
        grads["W_x"] += dz.T @ X[:, t]
        grads["W_h"] += dz.T @ h_prev
        grads["b"] += dz.sum(axis=0)
        dh_next = dz @ params["W_h"]
        dc_next = dc * fg
    return loss, grads


def fit_lstm1d(X, y, n_classes, hidden=8, epochs=40, lr=1e-2, seed=0, clip=5.0, batch_size=8, pooling="mean"):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=int)
    params = init_lstm1d(hidden, n_classes, seed)
    opt = Adam(params, lr=lr)
    rng = np.random.default_rng(seed + 1)
    for epoch in range(epochs):
        perm = rng.permutation(len(y))
        for k in range(0, len(y), batch_size):
            idx = perm[k:k + batch_size]
            loss, grads = lstm1d_grad(params, X[idx], y[idx], pooling)
            if not np.isfinite(loss):
                raise TrainingFailureError("1-D LSTM loss is not finite", epoch)
            clip_by_global_norm(grads, clip)
            opt.step(grads)
    return params


# -- fit/predict with grid search ---------------------------------------------


def _fit_predict_once(method, Xtr, ytr, Xte, n_classes, hp, seed):
    if method == "knn":
        return knn_predict(Xtr, ytr, Xte, hp["k"], n_classes)
    if method == "linear_svm":
        return fit_linear_svm(Xtr, ytr, n_classes, lam=hp["lam"], seed=seed).predict(Xte)
    if method == "mlp":
        params = fit_mlp(Xtr, ytr, n_classes, hidden=hp["hidden"], weight_decay=hp["weight_decay"], seed=seed)
        return np.argmax(mlp_forward(params, Xte), axis=1)
    if method == "lstm1d":
        params = fit_lstm1d(Xtr, ytr, n_classes, hidden=hp["hidden"], seed=seed)
        return np.argmax(lstm1d_forward(params, Xte), axis=1)
    raise ConfigurationError(f"unknown baseline {method!r}")


def _grid_points(grid: dict):
    keys = sorted(grid)
    for values in itertools.product(*(grid[k] for k in keys)):
        yield dict(zip(keys, values))


def inner_split(groups, seed=0, frac=0.25):
    """Hold out a seeded subset of training subjects for validation."""
    subjects = sorted(set(groups))
    if len(subjects) < 2:
        return None
    rng = np.random.default_rng(seed)
    n_val = max(1, int(round(frac * len(subjects))))
    val = set(rng.permutation(subjects)[:n_val].tolist())
    mask = np.array([g in val for g in groups])
    return np.flatnonzero(~mask), np.flatnonzero(mask)


def grid_search(method, Xtr, ytr, groups, n_classes, grid=None, seed=0):
    """Best hyperparameters by accuracy on held-out training subjects.

    Ties keep the earliest grid point (keys sorted, values in given order).
    """
    grid = DEFAULT_GRIDS[method] if grid is None else grid
    points = list(_grid_points(grid))
    if method == "knn":
        points = [p for p in points if p["k"] <= len(ytr)]
        if not points:
            raise ConfigurationError("every k in the grid exceeds the training size")
    split = inner_split(groups, seed)
    if len(points) == 1 or split is None:
        return points[0], {}
    tr, va = split
    if method == "knn":
        points = [p for p in points if p["k"] <= len(tr)] or points[:1]
    scores = {}
    best, best_acc = points[0], -1.0
    for hp in points:
        pred = _fit_predict_once(method, Xtr[tr], ytr[tr], Xtr[va], n_classes, hp, seed)
        acc = float(np.mean(pred == ytr[va]))
        scores[str(hp)] = acc
        if acc > best_acc:
            best, best_acc = hp, acc
    return best, scores


def baseline_fit_predict(method, Xtr, ytr, Xte, n_classes, groups=None, grid=None, seed=0):
    """Standardize with training statistics, tune on a train-only split, refit, predict.

    Feature inputs are standardized per column; timeseries inputs with one
    global mean/std so the waveform shape is preserved.
    """
    if method not in METHODS:
        raise ConfigurationError(f"unknown baseline {method!r}")
    Xtr = np.asarray(Xtr, dtype=float)
    Xte = np.asarray(Xte, dtype=float)
    ytr = np.asarray(ytr, dtype=int)
    if method in ("knn", "linear_svm"):
        Xtr, Xte = standardize(Xtr, Xte)
    else:
        mu, sd = Xtr.mean(), Xtr.std() or 1.0
        Xtr, Xte = (Xtr - mu) / sd, (Xte - mu) / sd
    if method == "knn" and grid is not None:
        bad = [k for k in grid.get("k", []) if not 1 <= k <= len(ytr)]
        if bad:
            raise ConfigurationError(f"k values {bad} outside [1, {len(ytr)}]")
    groups = list(groups) if groups is not None else [str(i) for i in range(len(ytr))]
    hp, _ = grid_search(method, Xtr, ytr, groups, n_classes, grid, seed)
    return _fit_predict_once(method, Xtr, ytr, Xte, n_classes, hp, seed), hp
