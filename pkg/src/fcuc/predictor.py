"""Frequency-metrics predictor: features, sparse MLP training, active sampling, neuron bounds."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np


class PredictorError(ValueError):
    pass


# ---------------------------------------------------------------- features


def disturbance_block(u, p) -> np.ndarray:
    """One-hot block holding the largest committed output at its unit's position.

    Ties go to the lowest index; all-off states give a zero block.
    """
    u = np.asarray(u, dtype=float)
    p = np.asarray(p, dtype=float)
    out = np.zeros_like(p)
    on = u > 0.5
    if not on.any():
        return out
    masked = np.where(on, p, -np.inf)
    k = int(np.argmax(masked))
    out[k] = p[k]
    return out


def feature_vector(u, p) -> np.ndarray:
    """``[u, disturbance block, P]`` for one hour."""
    u = np.asarray(u, dtype=float)
    p = np.asarray(p, dtype=float)
    if u.shape != p.shape or u.ndim != 1:
        raise PredictorError("commitment and dispatch must be equal-length vectors")
    return np.concatenate([u, disturbance_block(u, p), p])


def split_features(x, n_gen: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    return x[:n_gen], x[n_gen:2 * n_gen], x[2 * n_gen:3 * n_gen]


def feature_box(p_max) -> tuple[np.ndarray, np.ndarray]:
    """Input box used for bound propagation: u in [0,1], disturbance and P in [0, P_max]."""
    p_max = np.asarray(p_max, dtype=float)
    n = p_max.size
    lo = np.zeros(3 * n)
    hi = np.concatenate([np.ones(n), p_max, p_max])
    return lo, hi


@dataclass
class LabeledSample:
    x: np.ndarray
    delta_f_max_hz: float
    rocof_max_hz_s: float
    f_sec: int

    def to_json(self) -> dict:
        return {"x": [float(v) for v in self.x], "delta_f_max_hz": float(self.delta_f_max_hz),
                "rocof_max_hz_s": float(self.rocof_max_hz_s), "f_sec": int(self.f_sec)}


def security_flag(delta_f_max: float, rocof_max: float, dev_lim: float = 0.5, rocof_lim: float = 0.5) -> int:
    return int(delta_f_max <= dev_lim and rocof_max <= rocof_lim)


def save_dataset(samples, path) -> None:
    with open(path, "w") as fh:
        for s in samples:
            fh.write(json.dumps(s.to_json()) + "\n")


def load_dataset(path) -> list[LabeledSample]:
    out = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                d = json.loads(line)
                out.append(LabeledSample(np.asarray(d["x"], dtype=float), d["delta_f_max_hz"],
                                         d["rocof_max_hz_s"], int(d["f_sec"])))
    return out


def dataset_arrays(samples) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack samples into (X, Y, f_sec); Y columns are (deviation, RoCoF)."""
    if not samples:
        raise PredictorError("empty dataset")
    X = np.array([s.x for s in samples], dtype=float)
    Y = np.array([[s.delta_f_max_hz, s.rocof_max_hz_s] for s in samples], dtype=float)
    sec = np.array([s.f_sec for s in samples], dtype=int)
    return X, Y, sec


# ---------------------------------------------------------------- network


@dataclass
class MlpPredictor:
    """ReLU MLP with two linear heads (deviation, RoCoF).

    ``weights[q]`` has shape (fan_in, fan_out) so a layer reads ``z @ W + b``.
    ``head_w`` stacks the two heads as columns (deviation first).
    With ``monotone`` set, every weight after the first layer is kept
    non-negative, so both outputs are non-decreasing in each hidden activation.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    head_w: np.ndarray
    head_b: np.ndarray
    masks: list[np.ndarray]
    x_min: np.ndarray
    x_max: np.ndarray
    lb: list[np.ndarray] = field(default_factory=list)
    ub: list[np.ndarray] = field(default_factory=list)
    eps: list[np.ndarray] = field(default_factory=list)
    active: list[np.ndarray] = field(default_factory=list)
    fingerprint: str = ""
    monotone: bool = False

    @property
    def sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def n_inputs(self) -> int:
        return self.weights[0].shape[0]

    @property
    def n_hidden_layers(self) -> int:
        return len(self.weights)

    def project(self) -> None:
        """Clip weights after the first layer at zero when ``monotone``."""
        if not self.monotone:
            return
        for q in range(1, len(self.weights)):
            self.weights[q] = np.maximum(self.weights[q], 0.0)
        self.head_w = np.maximum(self.head_w, 0.0)

    def layer_sparsity(self) -> list[float]:
        return [float(np.mean(w == 0.0)) for w in self.weights]

    def scale(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-feature (a, c) with scaled = a * x + c (min-max to [0,1]; constant features shift only)."""
        span = self.x_max - self.x_min
        a = np.where(span > 0, 1.0 / np.where(span > 0, span, 1.0), 1.0)
        return a, -a * self.x_min

    def folded_first_layer(self) -> tuple[np.ndarray, np.ndarray]:
        """First-layer affine map acting on raw features."""
        a, c = self.scale()
        W = self.weights[0]
        return W * a[:, None], c @ W + self.biases[0]


def init_predictor(n_inputs: int, hidden=(32, 32), seed: int = 0, monotone: bool = False) -> MlpPredictor:
    """Fan-in scaled Gaussian initialisation; identity scaling until ``fit_scaling``.

    A monotone net starts from the magnitudes of the same draws after layer 1.
    """
    rng = np.random.default_rng(seed)
    sizes = [n_inputs, *hidden]
    weights, biases = [], []
    for a, b in zip(sizes[:-1], sizes[1:]):
        weights.append(rng.standard_normal((a, b)) * math.sqrt(2.0 / a))
        biases.append(np.zeros(b))
    head_w = rng.standard_normal((sizes[-1], 2)) * math.sqrt(1.0 / sizes[-1])
    if monotone:
        # small positive heads; large ones get clipped to zero in the first steps and never recover
        weights[1:] = [np.abs(w) / math.sqrt(2.0) for w in weights[1:]]
        head_w = 0.1 * np.abs(head_w)
    return MlpPredictor(
        weights=weights, biases=biases, head_w=head_w, head_b=np.zeros(2),
        masks=[np.ones_like(w) for w in weights],
        x_min=np.zeros(n_inputs), x_max=np.ones(n_inputs), monotone=monotone,
    )


def fit_scaling(m: MlpPredictor, X: np.ndarray, box=None) -> None:
    """Per-feature min/max scaling from the samples, or from ``box`` when given.

    Scaling to the physical box keeps every reachable input inside the unit
    cube, so interval bounds stay close to the preactivations seen in training.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    m.x_min = X.min(axis=0)
    m.x_max = X.max(axis=0)
    if box is not None:
        lo, hi = (np.asarray(b, dtype=float) for b in box)
        m.x_min = np.minimum(m.x_min, lo)
        m.x_max = np.maximum(m.x_max, hi)


def _check_dim(m: MlpPredictor, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape[-1] != m.n_inputs:
        raise PredictorError(f"feature dimension {X.shape[-1]} does not match input layer {m.n_inputs}")
    return X


def preactivations(m: MlpPredictor, X) -> list[np.ndarray]:
    """Hidden preactivations ẑ_q for a batch, one (N, width) array per layer."""
    X = np.atleast_2d(_check_dim(m, X))
    a, c = m.scale()
    z = X * a + c
    out = []
    for W, b in zip(m.weights, m.biases):
        zh = z @ W + b
        out.append(zh)
        z = np.maximum(zh, 0.0)
    return out


def predict(m: MlpPredictor, X) -> np.ndarray:
    """Batch forward pass; returns (N, 2) with columns (deviation Hz, RoCoF Hz/s)."""
    X = np.atleast_2d(_check_dim(m, X))
    zs = preactivations(m, X)
    z = np.maximum(zs[-1], 0.0) if zs else X
    return z @ m.head_w + m.head_b


def forward(m: MlpPredictor, x) -> tuple[float, float]:
    x = _check_dim(m, x)
    if x.ndim != 1:
        raise PredictorError("forward takes a single feature vector")
    y = predict(m, x[None, :])[0]
    return float(y[0]), float(y[1])


# ---------------------------------------------------------------- training


def loss_and_grads(m: MlpPredictor, X: np.ndarray, Y: np.ndarray):
    """Mean over samples of the summed two-head squared error, with its gradients.

    Returns (loss, dW list, db list, d head_w, d head_b).
    """
    a, c = m.scale()
    zs = [X * a + c]
    pre = []
    for W, b in zip(m.weights, m.biases):
        zh = zs[-1] @ W + b
        pre.append(zh)
        zs.append(np.maximum(zh, 0.0))
    out = zs[-1] @ m.head_w + m.head_b
    err = out - Y
    n = X.shape[0]
    loss = float(np.sum(err ** 2) / n)
    g = 2.0 * err / n
    dhw = zs[-1].T @ g
    dhb = g.sum(axis=0)
    g = g @ m.head_w.T
    dW = [None] * len(m.weights)
    db = [None] * len(m.weights)
    for q in range(len(m.weights) - 1, -1, -1):
        g = g * (pre[q] > 0)
        dW[q] = zs[q].T @ g
        db[q] = g.sum(axis=0)
        if q:
            g = g @ m.weights[q].T
    return loss, dW, db, dhw, dhb


def mse_loss(m: MlpPredictor, X, Y) -> float:
    return loss_and_grads(m, np.asarray(X, float), np.asarray(Y, float))[0]


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 64
    lr: float = 1e-3
    momentum: float = 0.9


@dataclass
class PruneSchedule:
    s0: float = 0.0
    s_final: float = 0.8
    e0: int = 20
    delta_e: int = 10
    steps: int = 10
    epochs: int = 200
    batch_size: int = 64
    lr: float = 1e-3

    def __post_init__(self):
        if not 0.0 <= self.s0 <= self.s_final < 1.0:
            raise ValueError("need 0 <= s0 <= s_final < 1")
        if self.steps < 1 or self.delta_e < 1 or self.e0 < 1:
            raise ValueError("steps, delta_e and e0 must be >= 1")
        if self.e0 + self.steps * self.delta_e > self.epochs:
            raise ValueError("pruning window extends past the last epoch")

    @property
    def end(self) -> int:
        return self.e0 + self.steps * self.delta_e


def sparsity_at_epoch(sched: PruneSchedule, e: float) -> float:
    """Cubic ramp from s0 at e0 to s_final after ``steps`` pruning steps."""
    if not sched.e0 <= e <= sched.end:
        raise PredictorError(f"epoch {e} outside pruning window [{sched.e0}, {sched.end}]")
    frac = 1.0 - (e - sched.e0) / (sched.steps * sched.delta_e)
    return sched.s_final + (sched.s0 - sched.s_final) * frac ** 3


def magnitude_mask(w: np.ndarray, mask: np.ndarray, sparsity: float) -> np.ndarray:
    """Mask zeroing the ``round(sparsity * size)`` smallest-magnitude entries.

    Already-masked entries rank first so a mask never re-grows; ties break on flat index.
    """
    k = int(round(sparsity * w.size))
    key = np.where(mask.ravel() > 0, np.abs(w.ravel()), -1.0)
    order = np.argsort(key, kind="stable")
    new = np.ones(w.size)
    new[order[:k]] = 0.0
    new = np.minimum(new, mask.ravel())
    return new.reshape(w.shape)


class _Momentum:
    def __init__(self, m: MlpPredictor, lr: float, beta: float):
        self.lr, self.beta = lr, beta
        self.vw = [np.zeros_like(w) for w in m.weights]
        self.vb = [np.zeros_like(b) for b in m.biases]
        self.vhw = np.zeros_like(m.head_w)
        self.vhb = np.zeros_like(m.head_b)

    def step(self, m: MlpPredictor, dW, db, dhw, dhb) -> None:
        for q in range(len(m.weights)):
            self.vw[q] = self.beta * self.vw[q] - self.lr * dW[q] * m.masks[q]
            self.vb[q] = self.beta * self.vb[q] - self.lr * db[q]
            m.weights[q] = (m.weights[q] + self.vw[q]) * m.masks[q]
            m.biases[q] = m.biases[q] + self.vb[q]
        self.vhw = self.beta * self.vhw - self.lr * dhw
        self.vhb = self.beta * self.vhb - self.lr * dhb
        m.head_w = m.head_w + self.vhw
        m.head_b = m.head_b + self.vhb
        m.project()


def _epoch(m: MlpPredictor, opt: _Momentum, X, Y, batch: int, rng) -> float:
    order = rng.permutation(X.shape[0])
    for i in range(0, X.shape[0], batch):
        idx = order[i:i + batch]
        _, dW, db, dhw, dhb = loss_and_grads(m, X[idx], Y[idx])
        opt.step(m, dW, db, dhw, dhb)
    return mse_loss(m, X, Y)


def train_dense(m: MlpPredictor, X, Y, cfg: TrainConfig | None = None, seed: int = 0) -> list[float]:
    """Mini-batch momentum SGD; returns the full-batch loss after each epoch."""
    cfg = cfg or TrainConfig()
    X = _check_dim(m, np.atleast_2d(np.asarray(X, float)))
    Y = np.asarray(Y, float).reshape(-1, 2)
    if X.shape[0] == 0:
        raise PredictorError("empty dataset")
    rng = np.random.default_rng(seed)
    opt = _Momentum(m, cfg.lr, cfg.momentum)
    return [_epoch(m, opt, X, Y, cfg.batch_size, rng) for _ in range(cfg.epochs)]


def train_sparse(m: MlpPredictor, X, Y, sched: PruneSchedule, seed: int = 0,
                 momentum: float = 0.9) -> list[float]:
    """Continue training a pre-trained net while ramping per-layer sparsity.

    Epochs are numbered 1..E; at e0 + k*delta_e (k = 0..steps) every hidden
    layer's mask is recomputed to the scheduled sparsity before that epoch's
    updates. Heads are never pruned.
    """
    X = _check_dim(m, np.atleast_2d(np.asarray(X, float)))
    Y = np.asarray(Y, float).reshape(-1, 2)
    if X.shape[0] == 0:
        raise PredictorError("empty dataset")
    rng = np.random.default_rng(seed)
    opt = _Momentum(m, sched.lr, momentum)
    prune_at = {sched.e0 + k * sched.delta_e for k in range(sched.steps + 1)}
    losses = []
    for e in range(1, sched.epochs + 1):
        if e in prune_at:
            s = sparsity_at_epoch(sched, e)
            for q, w in enumerate(m.weights):
                m.masks[q] = magnitude_mask(w, m.masks[q], s)
                m.weights[q] = w * m.masks[q]
                opt.vw[q] = opt.vw[q] * m.masks[q]
        losses.append(_epoch(m, opt, X, Y, sched.batch_size, rng))
    return losses


# ---------------------------------------------------------------- discriminator


@dataclass
class Discriminator:
    """One-hidden-layer classifier giving p(secure | x)."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float
    x_min: np.ndarray
    x_max: np.ndarray

    def posterior(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, float))
        span = np.where(self.x_max > self.x_min, self.x_max - self.x_min, 1.0)
        h = np.maximum(((X - self.x_min) / span) @ self.w1 + self.b1, 0.0)
        return _sigmoid(h @ self.w2 + self.b2)


def _sigmoid(s: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * s))


def train_discriminator(X, f_sec, seed: int = 0, hidden: int = 16, epochs: int = 300,
                        lr: float = 0.05, batch_size: int = 64) -> Discriminator:
    """Cross-entropy training with momentum SGD."""
    X = np.atleast_2d(np.asarray(X, float))
    y = np.asarray(f_sec, float).ravel()
    if X.shape[0] == 0:
        raise PredictorError("empty dataset")
    if np.unique(y).size < 2:
        raise PredictorError("discriminator needs both secure and insecure samples")
    rng = np.random.default_rng(seed)
    n = X.shape[1]
    d = Discriminator(
        w1=rng.standard_normal((n, hidden)) * math.sqrt(2.0 / n), b1=np.zeros(hidden),
        w2=rng.standard_normal(hidden) * math.sqrt(1.0 / hidden), b2=0.0,
        x_min=X.min(axis=0), x_max=X.max(axis=0),
    )
    span = np.where(d.x_max > d.x_min, d.x_max - d.x_min, 1.0)
    Xs = (X - d.x_min) / span
    v = [np.zeros_like(d.w1), np.zeros_like(d.b1), np.zeros_like(d.w2), 0.0]
    for _ in range(epochs):
        order = rng.permutation(X.shape[0])
        for i in range(0, X.shape[0], batch_size):
            idx = order[i:i + batch_size]
            xb, yb = Xs[idx], y[idx]
            pre = xb @ d.w1 + d.b1
            h = np.maximum(pre, 0.0)
            p = _sigmoid(h @ d.w2 + d.b2)
            g = (p - yb) / idx.size
            grads = [None, None, h.T @ g, float(g.sum())]
            gh = np.outer(g, d.w2) * (pre > 0)
            grads[0] = xb.T @ gh
            grads[1] = gh.sum(axis=0)
            for j in range(4):
                v[j] = 0.9 * v[j] - lr * grads[j]
            d.w1, d.b1, d.w2, d.b2 = d.w1 + v[0], d.b1 + v[1], d.w2 + v[2], d.b2 + v[3]
    return d


def binary_entropy(p) -> np.ndarray:
    """Entropy (nats) of a Bernoulli posterior, symmetric in p <-> 1-p."""
    p = np.clip(np.asarray(p, float), 0.0, 1.0)
    q = np.minimum(p, 1.0 - p)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(q * np.log(q) + (1.0 - q) * np.log1p(-q))
    return np.where(q > 0, h, 0.0)


def select_by_posterior(post, k_sec: int, k_insec: int) -> tuple[np.ndarray, np.ndarray]:
    """Highest-entropy ``k_sec`` and lowest-entropy ``k_insec`` indices, disjoint, ties to the lowest index.

    Entropies are ranked after rounding to 12 decimals so that p and 1-p,
    which differ by float rounding, tie exactly.
    """
    post = np.asarray(post, float).ravel()
    n = post.size
    if n == 0:
        raise PredictorError("empty pool")
    if k_sec < 0 or k_insec < 0 or k_sec + k_insec > n:
        raise PredictorError(f"cannot select {k_sec}+{k_insec} samples from a pool of {n}")
    h = np.round(binary_entropy(post), 12)
    high = np.argsort(-h, kind="stable")[:k_sec]
    taken = np.zeros(n, dtype=bool)
    taken[high] = True
    rest = np.flatnonzero(~taken)
    low = rest[np.argsort(h[rest], kind="stable")[:k_insec]]
    return high, low


def select_samples(d: Discriminator, pool, k_sec: int, k_insec: int) -> tuple[np.ndarray, np.ndarray]:
    pool = np.atleast_2d(np.asarray(pool, float))
    if pool.shape[0] == 0 or pool.size == 0:
        raise PredictorError("empty pool")
    return select_by_posterior(d.posterior(pool), k_sec, k_insec)


# ---------------------------------------------------------------- bounds and activity


def compute_neuron_bounds(m: MlpPredictor, lo, hi) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Interval propagation of a raw-feature box through the hidden layers."""
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    if lo.shape != (m.n_inputs,) or hi.shape != (m.n_inputs,):
        raise PredictorError("box dimension does not match input layer")
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise PredictorError("box bounds must be finite")
    if np.any(lo > hi):
        raise PredictorError("box has lo > hi")
    a, c = m.scale()
    zl, zh = a * lo + c, a * hi + c  # a > 0 keeps the order
    LB, UB = [], []
    for W, b in zip(m.weights, m.biases):
        Wp, Wn = np.maximum(W, 0.0), np.minimum(W, 0.0)
        l = zl @ Wp + zh @ Wn + b
        u = zh @ Wp + zl @ Wn + b
        LB.append(l)
        UB.append(u)
        zl, zh = np.maximum(l, 0.0), np.maximum(u, 0.0)
    return LB, UB


def positivity_index(m: MlpPredictor, X, rule: str = "fraction") -> list[np.ndarray]:
    """Per-neuron activity index over a sample set.

    ``rule="fraction"`` gives the share of samples with positive preactivation.
    ``rule="printed"`` evaluates mean(ẑ) - mean|ẑ - mean(ẑ)|, which is not a
    percentage and is kept only for comparison.
    """
    X = np.atleast_2d(np.asarray(X, float))
    if X.shape[0] == 0:
        raise PredictorError("positivity index needs data")
    zs = preactivations(m, X)
    if rule == "fraction":
        return [np.mean(z > 0, axis=0) for z in zs]
    if rule == "printed":
        return [z.mean(axis=0) - np.abs(z - z.mean(axis=0)).mean(axis=0) for z in zs]
    raise PredictorError(f"unknown positivity rule {rule!r}")


def select_active_neurons(eps, gamma: float) -> list[np.ndarray]:
    return [np.asarray(e) >= gamma for e in eps]


def validation_accuracy(m: MlpPredictor, X, Y, tolerance: float) -> tuple[float, float]:
    """Percent of samples predicted within relative ``tolerance``: (RoCoF, deviation)."""
    if tolerance <= 0:
        raise PredictorError("tolerance must be positive")
    Y = np.asarray(Y, float).reshape(-1, 2)
    if Y.shape[0] == 0:
        raise PredictorError("empty validation set")
    pred = predict(m, X)
    scale = np.where(Y == 0.0, 1.0, np.abs(Y))
    ok = np.abs(pred - Y) <= tolerance * scale
    return 100.0 * float(ok[:, 1].mean()), 100.0 * float(ok[:, 0].mean())


def tolerance_sweep(m: MlpPredictor, X, Y, tolerances=(0.10, 0.09, 0.08, 0.07, 0.06, 0.05)) -> list[dict]:
    rows = []
    for tol in tolerances:
        r, d = validation_accuracy(m, X, Y, tol)
        rows.append({"tolerance": tol, "rocof_pct": r, "deviation_pct": d})
    return rows


def split_indices(n: int, holdout: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded (train, held-out) index split."""
    order = np.random.default_rng(seed).permutation(n)
    k = int(round(holdout * n))
    return np.sort(order[k:]), np.sort(order[:k])


# ---------------------------------------------------------------- persistence


def config_fingerprint(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, default=str).encode()).hexdigest()[:16]


def predictor_to_dict(m: MlpPredictor) -> dict:
    lst = lambda arrs: [a.tolist() for a in arrs]  # noqa: E731
    return {
        "sizes": m.sizes,
        "weights": lst(m.weights),
        "biases": lst(m.biases),
        "head_w": m.head_w.tolist(),
        "head_b": m.head_b.tolist(),
        "masks": lst(m.masks),
        "x_min": m.x_min.tolist(),
        "x_max": m.x_max.tolist(),
        "lb": lst(m.lb),
        "ub": lst(m.ub),
        "eps": lst(m.eps),
        "active": [a.astype(int).tolist() for a in m.active],
        "fingerprint": m.fingerprint,
        "monotone": m.monotone,
    }


def predictor_from_dict(d: dict) -> MlpPredictor:
    arr = lambda xs: [np.asarray(x, float) for x in xs]  # noqa: E731
    m = MlpPredictor(
        weights=arr(d["weights"]), biases=arr(d["biases"]),
        head_w=np.asarray(d["head_w"], float), head_b=np.asarray(d["head_b"], float),
        masks=arr(d["masks"]), x_min=np.asarray(d["x_min"], float), x_max=np.asarray(d["x_max"], float),
        lb=arr(d.get("lb", [])), ub=arr(d.get("ub", [])), eps=arr(d.get("eps", [])),
        active=[np.asarray(a, bool) for a in d.get("active", [])],
        fingerprint=d.get("fingerprint", ""), monotone=bool(d.get("monotone", False)),
    )
    if m.sizes != list(d["sizes"]):
        raise PredictorError("layer sizes in model file disagree with its weights")
    return m


def save_predictor(m: MlpPredictor, path) -> None:
    with open(path, "w") as fh:
        json.dump(predictor_to_dict(m), fh)
        fh.write("\n")


def load_predictor(path) -> MlpPredictor:
    with open(path) as fh:
        return predictor_from_dict(json.load(fh))


def train_config_dict(cfg: TrainConfig, sched: PruneSchedule, hidden, seed: int) -> dict:
    return {"train": asdict(cfg), "prune": asdict(sched), "hidden": list(hidden), "seed": seed}
