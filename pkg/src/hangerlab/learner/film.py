"""Fully connected noise predictor with FiLM timestep conditioning.

The trunk maps ``[obs, x_t]`` through ReLU layers.  The timestep embedding
goes through a one-layer ReLU encoder; each hidden trunk layer is then
modulated per channel as ``a * (1 + gamma) + beta`` with ``(gamma, beta)``
a linear function of the encoded timestep.  The modulation weights start at
zero, so an untrained net is a plain MLP with near-zero output.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import InvalidArgument
from .mlp import MlpParams, StaleCache, init_mlp


@dataclass
class FilmParams:
    """Trunk weights plus the timestep encoder and per-layer FiLM maps.

    ``film_w[k]`` has shape ``(time_hidden, 2 * width_k)``: the first half
    of its output is ``gamma``, the second ``beta``.
    """

    trunk: MlpParams
    time_w: np.ndarray  # (temb_dim, time_hidden)
    time_b: np.ndarray
    film_w: list[np.ndarray]
    film_b: list[np.ndarray]
    version: int = field(default=0, compare=False)

    def __post_init__(self):
        if self.trunk.activation != "relu":
            raise InvalidArgument("the FiLM trunk uses ReLU layers")
        hidden = self.trunk.sizes[1:-1]
        th = self.time_w.shape[1]
        if self.time_b.shape != (th,) or len(self.film_w) != len(hidden) or len(self.film_b) != len(hidden):
            raise InvalidArgument("timestep encoder or FiLM layers do not match the trunk")
        for w, b, width in zip(self.film_w, self.film_b, hidden):
            if w.shape != (th, 2 * width) or b.shape != (2 * width,):
                raise InvalidArgument(f"FiLM map of shape {w.shape} does not fit a layer of width {width}")

    @property
    def sizes(self) -> tuple[int, ...]:
        return self.trunk.sizes

    @property
    def temb_dim(self) -> int:
        return self.time_w.shape[0]

    @property
    def n_params(self) -> int:
        return sum(a.size for a in self.arrays())

    def arrays(self) -> list[np.ndarray]:
        """Trunk arrays, then the encoder, then ``film_w[k], film_b[k]`` per layer."""
        out = self.trunk.arrays() + [self.time_w, self.time_b]
        for w, b in zip(self.film_w, self.film_b):
            out += [w, b]
        return out

    def copy(self) -> FilmParams:
        return FilmParams(self.trunk.copy(), self.time_w.copy(), self.time_b.copy(),
                          [w.copy() for w in self.film_w], [b.copy() for b in self.film_b], self.version)


def init_film(sizes, temb_dim: int, time_hidden: int, rng: np.random.Generator,
              out_scale: float = 0.01) -> FilmParams:
    """He-normal trunk and encoder; zero FiLM maps."""
    trunk = init_mlp(sizes, rng, "relu", out_scale)
    time_w = rng.standard_normal((temb_dim, time_hidden)) * np.sqrt(2.0 / temb_dim)
    hidden = trunk.sizes[1:-1]
    return FilmParams(trunk, time_w, np.zeros(time_hidden),
                      [np.zeros((time_hidden, 2 * w)) for w in hidden], [np.zeros(2 * w) for w in hidden])


@dataclass
class FilmCache:
    inputs: list[np.ndarray]  # input to each trunk layer
    pre: list[np.ndarray]  # trunk pre-activations
    gammas: list[np.ndarray]
    temb: np.ndarray
    enc_pre: np.ndarray
    enc: np.ndarray
    version: int


@dataclass
class FilmGrads:
    trunk_w: list[np.ndarray]
    trunk_b: list[np.ndarray]
    time_w: np.ndarray
    time_b: np.ndarray
    film_w: list[np.ndarray]
    film_b: list[np.ndarray]
    inputs: np.ndarray | None = None

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.trunk_w, self.trunk_b):
            out += [w, b]
        out += [self.time_w, self.time_b]
        for w, b in zip(self.film_w, self.film_b):
            out += [w, b]
        return out


def film_forward(params: FilmParams, x: np.ndarray, temb: np.ndarray) -> tuple[np.ndarray, FilmCache]:
    """Batched forward pass: ``x`` is ``(B, sizes[0])``, ``temb`` is ``(B, temb_dim)``."""
    x = np.asarray(x, dtype=float)
    temb = np.asarray(temb, dtype=float)
    if x.ndim != 2 or x.shape[1] != params.sizes[0]:
        raise InvalidArgument(f"input width {x.shape[-1]} != first layer width {params.sizes[0]}")
    if temb.shape != (x.shape[0], params.temb_dim):
        raise InvalidArgument(f"timestep embedding of shape {temb.shape} for a batch of {x.shape[0]}")
    enc_pre = temb @ params.time_w + params.time_b
    enc = np.maximum(enc_pre, 0.0)
    tr = params.trunk
    last = len(tr.weights) - 1
    inputs, pre, gammas = [], [], []
    h = x
    for k, (w, b) in enumerate(zip(tr.weights, tr.biases)):
        inputs.append(h)
        z = h @ w + b
        if k == last:
            h = z
            break
        pre.append(z)
        width = w.shape[1]
        f = enc @ params.film_w[k] + params.film_b[k]
        gamma, beta = f[:, :width], f[:, width:]
        gammas.append(gamma)
        h = np.maximum(z, 0.0) * (1.0 + gamma) + beta
    return h, FilmCache(inputs, pre, gammas, temb, enc_pre, enc, params.version)


def film_backward(params: FilmParams, cache: FilmCache, grad_out: np.ndarray,
                  need_input_grad: bool = False) -> FilmGrads:
    """Gradients of ``sum(grad_out * output)`` with respect to every parameter."""
    if cache.version != params.version:
        raise StaleCache("forward cache predates the latest parameter update")
    tr = params.trunk
    g = np.asarray(grad_out, dtype=float)
    if g.shape != (cache.inputs[0].shape[0], tr.sizes[-1]):
        raise InvalidArgument(f"output gradient shape {g.shape} does not match the forward pass")
    n = len(tr.weights)
    gw: list = [None] * n
    gb: list = [None] * n
    fw: list = [None] * (n - 1)
    fb: list = [None] * (n - 1)
    g_enc = np.zeros_like(cache.enc)
    for k in range(n - 1, -1, -1):
        gw[k] = cache.inputs[k].T @ g
        gb[k] = g.sum(axis=0)
        if k == 0 and not need_input_grad:
            break
        g = g @ tr.weights[k].T
        if k == 0:
            break
        # g is now d/d(output of hidden layer k-1) = a * (1 + gamma) + beta
        z = cache.pre[k - 1]
        a = np.maximum(z, 0.0)
        gf = np.concatenate([g * a, g], axis=1)
        fw[k - 1] = cache.enc.T @ gf
        fb[k - 1] = gf.sum(axis=0)
        g_enc += gf @ params.film_w[k - 1].T
        g = g * (1.0 + cache.gammas[k - 1]) * (z > 0)
    g_enc_pre = g_enc * (cache.enc_pre > 0)
    return FilmGrads(gw, gb, cache.temb.T @ g_enc_pre, g_enc_pre.sum(axis=0), fw, fb,
                     g if need_input_grad else None)
