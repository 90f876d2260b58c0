"""Coordinate-network texture imitation.

A small MLP learns the mapping (world position, base texture color) ->
stylized color from the texels a pipeline run actually painted, then predicts
colors for the texels no viewpoint covered. Positions are frequency-encoded
so the network can express sharp spatial variation; the base color input lets
it reuse real-texture structure (edges, material boundaries) at zero cost.

Everything is float64 numpy. Optimization is Adam on a mean-squared-error
loss over sigmoid outputs in [0, 1].
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

_MAGIC = b"DPIM"
_VERSION = 1


def positional_encoding(points: np.ndarray, num_freqs: int) -> np.ndarray:
    """[sin(2^k pi x), cos(2^k pi x)] for k < num_freqs, per coordinate.

    ``points`` is (N, 3) in [-1, 1]; output is (N, 6 * num_freqs).
    """
    pts = np.asarray(points, dtype=np.float64)
    out = np.empty((len(pts), 6 * num_freqs))
    for k in range(num_freqs):
        arg = pts * (np.pi * (2.0 ** k))
        out[:, 6 * k : 6 * k + 3] = np.sin(arg)
        out[:, 6 * k + 3 : 6 * k + 6] = np.cos(arg)
    return out


@dataclass
class ImitatorParams:
    num_freqs: int = 6
    hidden_width: int = 128
    num_layers: int = 4      # weight matrices, including the output layer
    learning_rate: float = 1e-3
    batch_size: int = 8192
    iterations: int = 5000
    holdout_fraction: float = 0.05
    seed: int = 0

    def layer_dims(self) -> list[int]:
        if self.num_layers < 2:
            raise ValueError("need at least an input and an output layer")
        return (
            [6 * self.num_freqs + 3]
            + [self.hidden_width] * (self.num_layers - 1)
            + [3]
        )


@dataclass
class Imitator:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    num_freqs: int
    aabb_min: np.ndarray
    aabb_max: np.ndarray

    def normalize(self, points: np.ndarray) -> np.ndarray:
        extent = np.maximum(self.aabb_max - self.aabb_min, 1e-12)
        return 2.0 * (np.asarray(points, dtype=np.float64) - self.aabb_min) / extent - 1.0

    def features(self, points: np.ndarray, colors: np.ndarray) -> np.ndarray:
        enc = positional_encoding(self.normalize(points), self.num_freqs)
        return np.concatenate([enc, np.asarray(colors, dtype=np.float64)], axis=1)

    def predict(self, points: np.ndarray, colors: np.ndarray) -> np.ndarray:
        """Stylized colors in [0, 1] for world points with base colors in [0, 1]."""
        out, _ = forward(self.weights, self.biases, self.features(points, colors))
        return out


def init_network(params: ImitatorParams) -> tuple[list[np.ndarray], list[np.ndarray]]:
    rng = np.random.default_rng(params.seed)
    dims = params.layer_dims()
    weights, biases = [], []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / d_in), size=(d_in, d_out)))
        biases.append(np.zeros(d_out))
    return weights, biases


def forward(
    weights: list[np.ndarray], biases: list[np.ndarray], x: np.ndarray
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Hidden layers ReLU, output sigmoid. Returns (output, activations);
    activations[i] is the input to layer i, for backprop."""
    acts = [x]
    h = x
    last = len(weights) - 1
    for i, (w, b) in enumerate(zip(weights, biases)):
        z = h @ w + b
        h = expit(z) if i == last else np.maximum(z, 0.0)
        if i != last:
            acts.append(h)
    return h, acts


def loss_and_grads(
    weights: list[np.ndarray],
    biases: list[np.ndarray],
    x: np.ndarray,
    target: np.ndarray,
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """MSE loss and its gradients w.r.t. every weight and bias."""
    pred, acts = forward(weights, biases, x)
    diff = pred - target
    loss = float(np.mean(diff * diff))
    # d(mse)/d(pred) composed with the sigmoid derivative
    delta = (2.0 / diff.size) * diff * pred * (1.0 - pred)
    grads_w: list[np.ndarray] = [None] * len(weights)
    grads_b: list[np.ndarray] = [None] * len(weights)
    for i in range(len(weights) - 1, -1, -1):
        grads_w[i] = acts[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ weights[i].T) * (acts[i] > 0.0)
    return loss, grads_w, grads_b


class AdamState:
    def __init__(self, weights: list[np.ndarray], biases: list[np.ndarray]) -> None:
        self.m = [np.zeros_like(p) for p in weights + biases]
        self.v = [np.zeros_like(p) for p in weights + biases]
        self.t = 0

    def step(
        self,
        weights: list[np.ndarray],
        biases: list[np.ndarray],
        grads_w: list[np.ndarray],
        grads_b: list[np.ndarray],
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> None:
        self.t += 1
        params = weights + biases
        grads = grads_w + grads_b
        bc1 = 1.0 - beta1 ** self.t
        bc2 = 1.0 - beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * (g * g)
            p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def train_imitator(
    points: np.ndarray,
    base_colors: np.ndarray,
    target_colors: np.ndarray,
    params: ImitatorParams | None = None,
    aabb: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[Imitator, dict]:
    """Fit the network on painted texels.

    ``points`` (N, 3) world positions, ``base_colors`` and ``target_colors``
    (N, 3) in [0, 1]. ``aabb`` fixes the normalization box (defaults to the
    sample bounds). A holdout split is carved off before training; its loss
    lands in the returned history for generalization checks.
    """
    params = params or ImitatorParams()
    points = np.asarray(points, dtype=np.float64)
    base_colors = np.asarray(base_colors, dtype=np.float64)
    target_colors = np.asarray(target_colors, dtype=np.float64)
    n = len(points)
    if n == 0:
        raise ValueError("no supervision samples to train on")
    if aabb is None:
        aabb = (points.min(axis=0), points.max(axis=0))
    weights, biases = init_network(params)
    net = Imitator(
        weights=weights,
        biases=biases,
        num_freqs=params.num_freqs,
        aabb_min=np.asarray(aabb[0], dtype=np.float64),
        aabb_max=np.asarray(aabb[1], dtype=np.float64),
    )

    rng = np.random.default_rng(params.seed)
    perm = rng.permutation(n)
    n_hold = int(round(n * params.holdout_fraction))
    hold_idx = perm[:n_hold]
    train_idx = perm[n_hold:]
    if len(train_idx) == 0:
        raise ValueError("holdout fraction leaves no training samples")

    feats = net.features(points, base_colors)
    x_hold, t_hold = feats[hold_idx], target_colors[hold_idx]
    x_train, t_train = feats[train_idx], target_colors[train_idx]

    adam = AdamState(weights, biases)
    history = {"train_loss": [], "holdout_loss": [], "holdout_every": 100}
    batch = min(params.batch_size, len(train_idx))
    for it in range(params.iterations):
        pick = rng.integers(0, len(train_idx), size=batch)
        loss, gw, gb = loss_and_grads(weights, biases, x_train[pick], t_train[pick])
        adam.step(weights, biases, gw, gb, params.learning_rate)
        history["train_loss"].append(loss)
        if n_hold and (it % history["holdout_every"] == 0 or it == params.iterations - 1):
            pred, _ = forward(weights, biases, x_hold)
            history["holdout_loss"].append(float(np.mean((pred - t_hold) ** 2)))
    return net, history


def imitate_all(
    net: Imitator,
    positions: np.ndarray,
    valid: np.ndarray,
    base_atlas: np.ndarray,
    chunk: int = 65536,
) -> np.ndarray:
    """Predict a full atlas (uint8) over valid texels; invalid texels are 0."""
    out = np.zeros(valid.shape + (3,), dtype=np.uint8)
    idx = np.flatnonzero(valid.ravel())
    pts = positions.reshape(-1, 3)
    cols = base_atlas.reshape(-1, 3).astype(np.float64) / 255.0
    for s in range(0, len(idx), chunk):
        sel = idx[s : s + chunk]
        pred = net.predict(pts[sel], cols[sel])
        out.reshape(-1, 3)[sel] = np.clip(pred * 255.0 + 0.5, 0, 255).astype(np.uint8)
    return out


def fuse_imitated(
    atlas: np.ndarray, imitated: np.ndarray, painted: np.ndarray, valid: np.ndarray
) -> int:
    """Fill every valid-but-unpainted texel from the imitated atlas, in
    place. Returns the number of texels filled."""
    fill = valid & ~painted
    atlas[fill] = imitated[fill]
    painted[fill] = True
    return int(fill.sum())


def save_checkpoint(net: Imitator, path: str) -> None:
    """Binary checkpoint: header (dims, frequencies, bounds), then row-major
    float64 weight matrices and bias vectors, all little-endian."""
    dims = [net.weights[0].shape[0]] + [w.shape[1] for w in net.weights]
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<III", _VERSION, net.num_freqs, len(dims)))
        fh.write(struct.pack(f"<{len(dims)}I", *dims))
        fh.write(np.asarray(net.aabb_min, dtype="<f8").tobytes())
        fh.write(np.asarray(net.aabb_max, dtype="<f8").tobytes())
        for w, b in zip(net.weights, net.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_checkpoint(path: str) -> Imitator:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{path} is not an imitator checkpoint")
        version, num_freqs, n_dims = struct.unpack("<III", fh.read(12))
        if version != _VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        dims = struct.unpack(f"<{n_dims}I", fh.read(4 * n_dims))

        def read_f64(count):
            raw = fh.read(8 * count)
            if len(raw) != 8 * count:
                raise ValueError(f"{path} is truncated")
            return np.frombuffer(raw, dtype="<f8").astype(np.float64)

        aabb_min = read_f64(3)
        aabb_max = read_f64(3)
        weights, biases = [], []
        for d_in, d_out in zip(dims[:-1], dims[1:]):
            weights.append(read_f64(d_in * d_out).reshape(d_in, d_out))
            biases.append(read_f64(d_out))
        if fh.read(1):
            raise ValueError(f"{path} has trailing data")
    return Imitator(
        weights=weights,
        biases=biases,
        num_freqs=num_freqs,
        aabb_min=aabb_min,
        aabb_max=aabb_max,
    )
