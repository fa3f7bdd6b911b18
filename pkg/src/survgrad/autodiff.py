"""Dense-network engine with reverse-mode differentiation.

Networks are plain sequences of (weight, bias, activation) layers stored as
64-bit numpy arrays. A forward pass records a tape of intermediates; the tape
can then be replayed backward to obtain gradients with respect to either the
parameters (training) or the inputs (attribution).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError

ACTIVATIONS = ("relu", "tanh", "identity")

NET_FORMAT = "survgrad-net"
NET_FORMAT_VERSION = 1


@dataclass
class DenseLayer:
    weight: np.ndarray  # (fan_in, fan_out)
    bias: np.ndarray  # (fan_out,)
    activation: str

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[1],):
            raise ShapeError(
                f"layer weight {self.weight.shape} and bias {self.bias.shape} do not chain"
            )
        if self.activation not in ACTIVATIONS:
            raise ShapeError(f"unknown activation {self.activation!r}")


@dataclass
class DenseNet:
    """Sequential dense net; dropout (inverted) applies to hidden activations only."""

    layers: list[DenseLayer]
    dropout: float = 0.0

    def __post_init__(self):
        if not self.layers:
            raise ShapeError("network needs at least one layer")
        if not 0.0 <= self.dropout < 1.0:
            raise ShapeError(f"dropout must be in [0, 1), got {self.dropout}")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.weight.shape[1] != b.weight.shape[0]:
                raise ShapeError(
                    f"layer widths do not chain: {a.weight.shape} -> {b.weight.shape}"
                )

    @property
    def input_width(self) -> int:
        return self.layers[0].weight.shape[0]

    @property
    def output_width(self) -> int:
        return self.layers[-1].weight.shape[1]

    def copy(self) -> "DenseNet":
        return DenseNet(
            [DenseLayer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers],
            self.dropout,
        )

    def parameters(self) -> list[np.ndarray]:
        out = []
        for l in self.layers:
            out.extend((l.weight, l.bias))
        return out

    def to_json_dict(self) -> dict:
        return {
            "format": NET_FORMAT,
            "version": NET_FORMAT_VERSION,
            "dropout": self.dropout,
            "layers": [
                {
                    "rows": int(l.weight.shape[0]),
                    "cols": int(l.weight.shape[1]),
                    "weight": l.weight.ravel().tolist(),  # row-major
                    "bias": l.bias.tolist(),
                    "activation": l.activation,
                }
                for l in self.layers
            ],
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "DenseNet":
        if doc.get("format") != NET_FORMAT:
            raise ValueError(f"not a {NET_FORMAT} document")
        if doc.get("version") != NET_FORMAT_VERSION:
            raise ValueError(f"unsupported net format version {doc.get('version')}")
        layers = [
            DenseLayer(
                np.array(l["weight"], dtype=np.float64).reshape(l["rows"], l["cols"]),
                np.array(l["bias"], dtype=np.float64),
                l["activation"],
            )
            for l in doc["layers"]
        ]
        return cls(layers, doc["dropout"])

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, sort_keys=True)

    @classmethod
    def load(cls, path) -> "DenseNet":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))


def init_dense_net(
    sizes: list[int],
    activation: str = "relu",
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
    final_activation: str = "identity",
) -> DenseNet:
    """Build a net with uniform Kaiming-style fan-in init.

    ``sizes`` lists the widths input -> hidden... -> output. Hidden layers use
    ``activation``; the last layer uses ``final_activation``.
    """
    if rng is None:
        rng = np.random.default_rng()
    if len(sizes) < 2:
        raise ShapeError("need at least input and output widths")
    layers = []
    for i, (fan_in, fan_out) in enumerate(zip(sizes, sizes[1:])):
        bound = np.sqrt(6.0 / fan_in)
        w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        act = final_activation if i == len(sizes) - 2 else activation
        layers.append(DenseLayer(w, np.zeros(fan_out), act))
    return DenseNet(layers, dropout)


@dataclass
class Tape:
    """Forward intermediates for one batch: enough to replay backward."""

    layers: list[DenseLayer]
    inputs: list[np.ndarray]  # input to each layer (post-dropout of previous)
    acts: list[np.ndarray]  # pre-dropout activation of each layer
    masks: list[np.ndarray | None]  # dropout mask per layer (None in eval / last layer)
    batch_shape: tuple


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    return z


def _activation_grad(act: np.ndarray, kind: str) -> np.ndarray:
    # derivative expressed through the activation value itself
    if kind == "relu":
        return (act > 0.0).astype(np.float64)
    if kind == "tanh":
        return 1.0 - act * act
    return np.ones_like(act)


def forward(
    net: DenseNet,
    batch: np.ndarray,
    mode: str = "eval",
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, Tape]:
    """Run the net over a batch, recording a tape.

    In ``train`` mode inverted dropout masks are drawn from ``rng`` for every
    hidden layer; ``eval`` mode is a pure function of (parameters, batch).
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2:
        raise ShapeError(f"batch must be 2-D, got shape {batch.shape}")
    if batch.shape[1] != net.input_width:
        raise ShapeError(
            f"batch has {batch.shape[1]} columns, net expects {net.input_width}"
        )
    train = mode == "train"
    if train and net.dropout > 0.0 and rng is None:
        raise ValueError("train mode with dropout needs an rng")

    inputs, acts, masks = [], [], []
    a = batch
    last = len(net.layers) - 1
    for i, layer in enumerate(net.layers):
        inputs.append(a)
        z = a @ layer.weight + layer.bias
        h = _activate(z, layer.activation)
        acts.append(h)
        mask = None
        if train and net.dropout > 0.0 and i < last:
            keep = rng.random(h.shape) >= net.dropout
            mask = keep / (1.0 - net.dropout)  # inverted dropout: eval needs no rescaling
            h = h * mask
        masks.append(mask)
        a = h
    tape = Tape(net.layers, inputs, acts, masks, batch.shape)
    return a, tape


def _backprop(tape: Tape, upstream: np.ndarray, need_params: bool, need_inputs: bool):
    out_width = tape.layers[-1].weight.shape[1]
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != (tape.batch_shape[0], out_width):
        raise ShapeError(
            f"upstream shape {upstream.shape} does not match output "
            f"({tape.batch_shape[0]}, {out_width})"
        )
    param_grads = [None] * len(tape.layers) if need_params else None
    dh = upstream
    for i in range(len(tape.layers) - 1, -1, -1):
        layer = tape.layers[i]
        if tape.masks[i] is not None:
            dh = dh * tape.masks[i]
        dz = dh * _activation_grad(tape.acts[i], layer.activation)
        if need_params:
            param_grads[i] = (tape.inputs[i].T @ dz, dz.sum(axis=0))
        if i > 0 or need_inputs:
            dh = dz @ layer.weight.T
    input_grads = dh if need_inputs else None
    return param_grads, input_grads


def backward_params(tape: Tape, upstream: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Gradients of L = sum(upstream * output) w.r.t. every (weight, bias)."""
    grads, _ = _backprop(tape, upstream, need_params=True, need_inputs=False)
    return grads


def backward_inputs(tape: Tape, upstream: np.ndarray) -> np.ndarray:
    """Gradient of L = sum(upstream * output) w.r.t. the batch, row by row."""
    _, grads = _backprop(tape, upstream, need_params=False, need_inputs=True)
    return grads


@dataclass
class AdamState:
    """First/second moment accumulators, one pair per (weight, bias)."""

    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_net(cls, net: DenseNet) -> "AdamState":
        state = cls()
        for layer in net.layers:
            state.m.append((np.zeros_like(layer.weight), np.zeros_like(layer.bias)))
            state.v.append((np.zeros_like(layer.weight), np.zeros_like(layer.bias)))
        return state


def adam_step(
    net: DenseNet,
    grads: list[tuple[np.ndarray, np.ndarray]],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[DenseNet, AdamState]:
    """One Adam update with bias correction. Mutates ``net`` and ``state`` in place."""
    if len(grads) != len(net.layers):
        raise ShapeError(f"got {len(grads)} gradients for {len(net.layers)} layers")
    state.step += 1
    t = state.step
    for i, (layer, (gw, gb)) in enumerate(zip(net.layers, grads)):
        if gw.shape != layer.weight.shape or gb.shape != layer.bias.shape:
            raise ShapeError(f"gradient shapes do not match layer {i}")
        for param, grad, m, v in (
            (layer.weight, gw, state.m[i][0], state.v[i][0]),
            (layer.bias, gb, state.m[i][1], state.v[i][1]),
        ):
            m *= beta1
            m += (1.0 - beta1) * grad
            v *= beta2
            v += (1.0 - beta2) * grad * grad
            m_hat = m / (1.0 - beta1**t)
            v_hat = v / (1.0 - beta2**t)
            param -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return net, state
