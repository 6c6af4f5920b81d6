"""Fully connected network with hand-written reverse mode and Adam."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import InvalidArgument


class TrainingDivergence(FloatingPointError):
    """Non-finite loss or gradient during training."""


class StaleCache(RuntimeError):
    """A forward cache was used after the parameters changed."""


ACTIVATIONS = ("relu", "identity")


@dataclass
class MlpParams:
    """Weights are stored ``(fan_in, fan_out)`` so a batch is ``x @ W + b``."""

    sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "relu"
    version: int = field(default=0, compare=False)

    def __post_init__(self):
        self.sizes = tuple(int(s) for s in self.sizes)
        if self.activation not in ACTIVATIONS:
            raise InvalidArgument(f"unknown activation {self.activation!r}")
        if len(self.weights) != len(self.sizes) - 1 or len(self.biases) != len(self.weights):
            raise InvalidArgument("layer count does not match sizes")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.sizes[k], self.sizes[k + 1]) or b.shape != (self.sizes[k + 1],):
                raise InvalidArgument(f"layer {k} has shape {w.shape}/{b.shape}, expected sizes {self.sizes}")

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def arrays(self) -> list[np.ndarray]:
        """All parameter arrays in a fixed order: W0, b0, W1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> MlpParams:
        return MlpParams(self.sizes, [w.copy() for w in self.weights], [b.copy() for b in self.biases],
                         self.activation, self.version)


def init_mlp(sizes, rng: np.random.Generator, activation: str = "relu", out_scale: float = 0.01) -> MlpParams:
    """He-normal hidden layers; the output layer is shrunk by ``out_scale``
    so an untrained net predicts values close to zero."""
    sizes = tuple(int(s) for s in sizes)
    if len(sizes) < 2:
        raise InvalidArgument("need at least an input and an output size")
    weights, biases = [], []
    for k in range(len(sizes) - 1):
        std = np.sqrt(2.0 / sizes[k])
        if k == len(sizes) - 2:
            std *= out_scale
        weights.append(rng.standard_normal((sizes[k], sizes[k + 1])) * std)
        biases.append(np.zeros(sizes[k + 1]))
    return MlpParams(sizes, weights, biases, activation)


@dataclass
class Cache:
    inputs: list[np.ndarray]  # input to each layer
    pre: list[np.ndarray]  # pre-activations of hidden layers
    version: int
    squeeze: bool


def _act(z: np.ndarray, kind: str) -> np.ndarray:
    return np.maximum(z, 0.0) if kind == "relu" else z


def mlp_forward(params: MlpParams, x: np.ndarray) -> tuple[np.ndarray, Cache]:
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    h = x[None, :] if squeeze else x
    if h.ndim != 2 or h.shape[1] != params.sizes[0]:
        raise InvalidArgument(f"input width {h.shape[-1]} != first layer width {params.sizes[0]}")
    inputs, pre = [], []
    last = len(params.weights) - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        inputs.append(h)
        z = h @ w + b
        if k < last:
            pre.append(z)
            h = _act(z, params.activation)
        else:
            h = z
    return (h[0] if squeeze else h), Cache(inputs, pre, params.version, squeeze)


@dataclass
class MlpGrads:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    inputs: np.ndarray | None = None

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out


def mlp_backward(params: MlpParams, cache: Cache, grad_out: np.ndarray, need_input_grad: bool = False) -> MlpGrads:
    """Gradients of ``sum(grad_out * output)`` with respect to every parameter."""
    if cache.version != params.version:
        raise StaleCache("forward cache predates the latest parameter update")
    g = np.asarray(grad_out, dtype=float)
    if cache.squeeze:
        g = g[None, :]
    if g.shape != (cache.inputs[0].shape[0], params.sizes[-1]):
        raise InvalidArgument(f"output gradient shape {g.shape} does not match the forward pass")
    n = len(params.weights)
    gw: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    gb: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    for k in range(n - 1, -1, -1):
        gw[k] = cache.inputs[k].T @ g
        gb[k] = g.sum(axis=0)
        if k > 0 or need_input_grad:
            g = g @ params.weights[k].T
            if k > 0 and params.activation == "relu":
                g = g * (cache.pre[k - 1] > 0)
    gin = None
    if need_input_grad:
        gin = g[0] if cache.squeeze else g
    return MlpGrads(gw, gb, gin)


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: MlpParams) -> AdamState:
        arrs = params.arrays()
        return cls([np.zeros_like(a) for a in arrs], [np.zeros_like(a) for a in arrs], 0)


def adam_step(params: MlpParams, grads: MlpGrads, state: AdamState, lr: float = 1e-3,
              betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8) -> tuple[MlpParams, AdamState]:
    """One bias-corrected Adam update, applied in place.

    ``p -= lr * m_hat / (sqrt(v_hat) + eps)``
    """
    garr = grads.arrays()
    parr = params.arrays()
    if len(garr) != len(parr) or any(g.shape != p.shape for g, p in zip(garr, parr)):
        raise InvalidArgument("gradient shapes do not match parameters")
    for g in garr:
        if not np.all(np.isfinite(g)):
            raise TrainingDivergence("non-finite gradient")
    b1, b2 = betas
    state.t += 1
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for p, g, m, v in zip(parr, garr, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    params.version += 1
    return params, state
