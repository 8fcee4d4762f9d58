"""Two-dimensional LSTM classifier for spectrogram inputs.

Cell ``(i, j)`` sees its scalar input ``x[i, j]`` together with the hidden
states of ``(i-1, j)`` ("up", previous time step) and ``(i, j-1)`` ("left",
previous frequency bin); states outside the grid are zero. Each predecessor
has its own forget gate::

    c = f_up * c_up + f_left * c_left + i * g
    h = o * tanh(c)

Hidden states are pooled (mean over all cells, or the final cell) and fed to
a dense softmax layer. Cells on one anti-diagonal ``i + j = d`` do not depend
on each other, so the scan walks diagonals and processes each one (and the
whole batch) with a single matrix product per predecessor.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

from ..errors import ConfigurationError, NumericOverflowError, TrainingFailureError
from .optim import Adam, clip_by_global_norm

FORMAT_VERSION = 1
POOLINGS = ("mean", "last")
PARAM_NAMES = ("W_x", "W_up", "W_left", "b", "V", "c")


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 100
    seed: int = 0
    clip: float = 5.0
    pooling: str = "mean"
    batch_size: int = 1
    hidden_size: int = 16

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigurationError("learning_rate must be positive")
        if self.epochs < 1:
            raise ConfigurationError("epochs must be >= 1")
        if self.pooling not in POOLINGS:
            raise ConfigurationError(f"pooling must be one of {POOLINGS}")
        if self.batch_size < 1 or self.hidden_size < 1:
            raise ConfigurationError("batch_size and hidden_size must be >= 1")


class MdLstmModel:
    """Parameters of the 2D LSTM layer and its softmax head.

    Gate rows are stacked in the order input, forget-up, forget-left,
    output, cell candidate (``5 * hidden_size`` rows in total).
    """

    def __init__(self, params: dict, pooling: str = "mean"):
        if pooling not in POOLINGS:
            raise ConfigurationError(f"pooling must be one of {POOLINGS}")
        H = params["W_up"].shape[1]
        K = params["V"].shape[0]
        expected = {
            "W_x": (5 * H,), "W_up": (5 * H, H), "W_left": (5 * H, H),
            "b": (5 * H,), "V": (K, H), "c": (K,),
        }
        for name, shape in expected.items():
            if params[name].shape != shape:
                raise ConfigurationError(f"{name} has shape {params[name].shape}, expected {shape}")
            if not np.all(np.isfinite(params[name])):
                raise ConfigurationError(f"{name} contains non-finite values")
        self.params = {k: np.array(params[k], dtype=float) for k in PARAM_NAMES}
        self.pooling = pooling

    @property
    def hidden_size(self) -> int:
        return self.params["W_up"].shape[1]

    @property
    def n_classes(self) -> int:
        return self.params["V"].shape[0]

    def copy(self) -> "MdLstmModel":
        return MdLstmModel({k: v.copy() for k, v in self.params.items()}, self.pooling)

    def to_json(self) -> str:
        return json.dumps(
            {
                "format_version": FORMAT_VERSION,
                "kind": "mdlstm2d",
                "hidden_size": self.hidden_size,
                "n_classes": self.n_classes,
                "pooling": self.pooling,
                "shapes": {k: list(v.shape) for k, v in self.params.items()},
                "weights": {k: [float(f"{x:.9g}") for x in v.ravel()] for k, v in self.params.items()},
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "MdLstmModel":
        obj = json.loads(text)
        if obj.get("format_version") != FORMAT_VERSION:
            raise ConfigurationError(f"unsupported checkpoint version {obj.get('format_version')}")
        params = {
            k: np.array(obj["weights"][k], dtype=float).reshape(obj["shapes"][k]) for k in PARAM_NAMES
        }
        return cls(params, obj["pooling"])


def init_mdlstm(hidden_size=16, n_classes=2, seed=0, pooling="mean", forget_bias=-1.0) -> MdLstmModel:
    """Uniform(+-1/sqrt(fan_in)) weights from a seeded generator.

    Fan-in is counted per weight block: 1 for the scalar cell input, ``H``
    for each predecessor state. Forget-gate biases start at ``forget_bias``;
    with two predecessors, gates at 0.5 each would let the cell state grow
    along every diagonal.
    """
    rng = np.random.default_rng(seed)
    H, K = hidden_size, n_classes
    a = 1 / np.sqrt(H)
    b = np.zeros(5 * H)
    b[H:3 * H] = forget_bias
    params = {
        "W_x": rng.uniform(-1.0, 1.0, 5 * H),
        "W_up": rng.uniform(-a, a, (5 * H, H)),
        "W_left": rng.uniform(-a, a, (5 * H, H)),
        "b": b,
        "V": rng.uniform(-1 / np.sqrt(H), 1 / np.sqrt(H), (K, H)),
        "c": np.zeros(K),
    }
    return MdLstmModel(params, pooling)


@lru_cache(maxsize=32)
def _plan(T: int, F: int):
    """Per diagonal: (row index array, column index array, offset into previous)."""
    plan = []
    prev_lo = 0
    for d in range(T + F - 1):
        lo, hi = max(0, d - T + 1), min(F - 1, d)
        jj = np.arange(lo, hi + 1)
        ii = d - jj
        plan.append((ii, jj, lo - prev_lo + 1))
        prev_lo = lo
    return plan


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _scan(model: MdLstmModel, x: np.ndarray, keep: bool):
    p = model.params
    H = model.hidden_size
    B, T, F = x.shape
    plan = _plan(T, F)
    Wu_T, Wl_T, Wx, b = p["W_up"].T, p["W_left"].T, p["W_x"], p["b"]
    pooled = np.zeros((B, H))
    prev_h = np.zeros((3, B, H))
    prev_c = np.zeros((3, B, H))
    cache = []
    for ii, jj, a in plan:
        L = ii.size
        hu, hl = prev_h[a:a + L], prev_h[a - 1:a - 1 + L]
        cu, cl = prev_c[a:a + L], prev_c[a - 1:a - 1 + L]
        xd = x[:, ii, jj].T  # (L, B)
        z = xd[:, :, None] * Wx + hu @ Wu_T + hl @ Wl_T + b
        act = np.empty_like(z)
        act[..., :4 * H] = _sigmoid(z[..., :4 * H])
        act[..., 4 * H:] = np.tanh(z[..., 4 * H:])
        ig, fu, fl, og, g = (act[..., k * H:(k + 1) * H] for k in range(5))
        c = fu * cu + fl * cl + ig * g
        tc = np.tanh(c)
        h = og * tc
        ph = np.zeros((L + 2, B, H))
        pc = np.zeros((L + 2, B, H))
        ph[1:L + 1], pc[1:L + 1] = h, c
        if keep:
            cache.append((xd, act, tc, prev_h, prev_c, a))
        if model.pooling == "mean":
            pooled += h.sum(axis=0)
        prev_h, prev_c = ph, pc
    if model.pooling == "mean":
        pooled /= T * F
    else:
        pooled = prev_h[1]
    logits = pooled @ p["V"].T + p["c"]
    if not (np.all(np.isfinite(logits)) and np.all(np.isfinite(pooled))):
        raise NumericOverflowError("non-finite activations in the 2D LSTM scan")
    return logits, pooled, cache


def _as_batch(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3:
        raise ConfigurationError(f"expected (T, F) or (B, T, F) input, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ConfigurationError("input contains non-finite values")
    return x


def mdlstm_forward(model: MdLstmModel, x) -> np.ndarray:
    """Class probabilities for one ``(T, F)`` input or a ``(B, T, F)`` batch."""
    single = np.ndim(x) == 2
    logits, _, _ = _scan(model, _as_batch(x), keep=False)
    probs = _softmax(logits)
    return probs[0] if single else probs


def cross_entropy(probs: np.ndarray, target) -> float:
    target = np.atleast_1d(target)
    probs = np.atleast_2d(probs)
    return float(-np.mean(np.log(probs[np.arange(target.size), target])))


def mdlstm_grad(model: MdLstmModel, x, target):
    """Mean cross-entropy over the batch and its gradient for every parameter."""
    x = _as_batch(x)
    target = np.atleast_1d(np.asarray(target, dtype=int))
    B, T, F = x.shape
    if target.shape != (B,):
        raise ConfigurationError("one target per input is required")
    p = model.params
    H = model.hidden_size
    logits, pooled, cache = _scan(model, x, keep=True)
    probs = _softmax(logits)
    loss = float(-np.mean(np.log(probs[np.arange(B), target])))

    dlogits = probs.copy()
    dlogits[np.arange(B), target] -= 1.0
    dlogits /= B
    grads = {k: np.zeros_like(v) for k, v in p.items()}
    grads["V"] = dlogits.T @ pooled
    grads["c"] = dlogits.sum(axis=0)
    dpooled = dlogits @ p["V"]

    Wu, Wl = p["W_up"], p["W_left"]
    dWx, dWu, dWl, db = grads["W_x"], grads["W_up"], grads["W_left"], grads["b"]
    dh_mean = dpooled / (T * F) if model.pooling == "mean" else None
    # gradient flowing into the padded state arrays of the diagonal being visited
    dph = np.zeros((3, B, H))
    dpc = np.zeros((3, B, H))
    if model.pooling == "last":
        dph[1] += dpooled
    for xd, act, tc, prev_h, prev_c, a in reversed(cache):
        L = xd.shape[0]
        ig, fu, fl, og, g = (act[..., k * H:(k + 1) * H] for k in range(5))
        dh = dph[1:L + 1]
        if dh_mean is not None:
            dh = dh + dh_mean
        dc = dpc[1:L + 1] + dh * og * (1.0 - tc * tc)
        hu, hl = prev_h[a:a + L], prev_h[a - 1:a - 1 + L]
        cu, cl = prev_c[a:a + L], prev_c[a - 1:a - 1 + L]
        dz = np.empty_like(act)
        dz[..., 0:H] = dc * g * ig * (1 - ig)
        dz[..., H:2 * H] = dc * cu * fu * (1 - fu)
        dz[..., 2 * H:3 * H] = dc * cl * fl * (1 - fl)
        dz[..., 3 * H:4 * H] = dh * tc * og * (1 - og)
        dz[..., 4 * H:] = dc * ig * (1 - g * g)
        dz2 = dz.reshape(-1, 5 * H)
        dWx += np.einsum("lbk,lb->k", dz, xd)
        dWu += dz2.T @ hu.reshape(-1, H)
        dWl += dz2.T @ hl.reshape(-1, H)
        db += dz2.sum(axis=0)
        n_prev = prev_h.shape[0]
        dph = np.zeros((n_prev, B, H))
        dpc = np.zeros((n_prev, B, H))
        dph[a:a + L] += dz @ Wu
        dph[a - 1:a - 1 + L] += dz @ Wl
        dpc[a:a + L] += dc * fu
        dpc[a - 1:a - 1 + L] += dc * fl
    return loss, grads


def _batches(n: int, size: int, rng: np.random.Generator):
    perm = rng.permutation(n)
    return [perm[k:k + size] for k in range(0, n, size)]


def train(model: MdLstmModel, X, y, cfg: TrainConfig, callback=None):
    """Adam on shuffled mini-batches; returns ``(model, per-epoch mean losses)``.

    The model is updated in place. Shuffling draws from ``cfg.seed`` so an
    identical seed and dataset reproduce the weights bit for bit.
    """
    X = _as_batch(X)
    y = np.asarray(y, dtype=int)
    if X.shape[0] == 0:
        raise ConfigurationError("empty training set")
    rng = np.random.default_rng(cfg.seed + 1)
    opt = Adam(model.params, lr=cfg.learning_rate)
    history = []
    for epoch in range(cfg.epochs):
        losses = []
        for idx in _batches(X.shape[0], cfg.batch_size, rng):
            try:
                loss, grads = mdlstm_grad(model, X[idx], y[idx])
            except NumericOverflowError as exc:
                raise TrainingFailureError(str(exc), epoch) from exc
            if not np.isfinite(loss):
                raise TrainingFailureError("loss is not finite", epoch)
            clip_by_global_norm(grads, cfg.clip)
            opt.step(grads)
            losses.append(loss * idx.size)
        history.append(float(sum(losses) / X.shape[0]))
        if callback is not None:
            callback(epoch, history[-1], model)
    return model, history


def fit_mdlstm(X, y, n_classes: int, cfg: TrainConfig | None = None, callback=None):
    cfg = cfg or TrainConfig()
    model = init_mdlstm(cfg.hidden_size, n_classes, cfg.seed, cfg.pooling)
    return train(model, X, y, cfg, callback)


def predict_proba(model: MdLstmModel, X, batch_size: int = 16) -> np.ndarray:
    X = _as_batch(X)
    return np.concatenate([mdlstm_forward(model, X[k:k + batch_size]) for k in range(0, X.shape[0], batch_size)])


def predict(model: MdLstmModel, X) -> np.ndarray:
    # argmax resolves ties to the smallest class index
    return np.argmax(predict_proba(model, X), axis=1)


def config_dict(cfg: TrainConfig) -> dict:
    return asdict(cfg)
