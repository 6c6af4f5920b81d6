"""DDPM action-chunk policy over flattened occupancy grids.

The noise predictor is an MLP over ``[obs_vector, x_t]`` whose hidden
layers are FiLM-modulated by the timestep embedding ``emb(t)``; ``x_t`` is
a noised, normalized 16x4 action chunk flattened row-major.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..core import (
    ACTION_DIM,
    CHUNK_LEN,
    EXEC_LEN,
    InvalidArgument,
    Observation,
    SimConfig,
    clamp_action,
    denormalize_rows,
    normalize_observation,
    normalize_proprio,
    normalize_rows,
    observation_length,
)
from .film import FilmGrads, FilmParams, film_backward, film_forward, init_film
from .mlp import AdamState, TrainingDivergence, adam_step

COSINE_S = 0.008
MAX_BETA = 0.999
TEMB_DIM = 16
LR_SCHEDULES = ("cosine", "constant")


class ModalityMismatch(InvalidArgument):
    """Observation modality differs from what the policy was trained on."""


# ------------------------------------------------------------------ schedule


@dataclass(frozen=True)
class NoiseSchedule:
    """Arrays are indexed by ``t - 1`` for ``t = 1 .. T``."""

    T: int
    betas: np.ndarray
    alphas: np.ndarray
    alpha_bars: np.ndarray

    def alpha_bar(self, t: int) -> float:
        """``alpha_bar_t``, with ``alpha_bar_0 = 1``."""
        if t == 0:
            return 1.0
        if not 1 <= t <= self.T:
            raise InvalidArgument(f"diffusion step {t} outside 0..{self.T}")
        return float(self.alpha_bars[t - 1])


def cosine_alpha_bar(t, T: int, s: float = COSINE_S):
    """Closed-form squared-cosine cumulative signal level."""
    f = lambda u: np.cos((u / T + s) / (1.0 + s) * math.pi / 2.0) ** 2  # noqa: E731
    return f(np.asarray(t, dtype=float)) / f(0.0)


def make_schedule(T: int = 50, s: float = COSINE_S, max_beta: float = MAX_BETA) -> NoiseSchedule:
    """Squared-cosine schedule.

    ``beta_t = min(1 - abar(t)/abar(t-1), max_beta)`` and ``alpha_bar`` is
    rebuilt as the running product of ``1 - beta``.  The clip only bites at
    the last step, where the closed form reaches zero.
    """
    if int(T) != T or T < 1:
        raise InvalidArgument("T must be a positive integer")
    T = int(T)
    ab = cosine_alpha_bar(np.arange(T + 1), T, s)
    betas = np.minimum(1.0 - ab[1:] / ab[:-1], max_beta)
    alphas = 1.0 - betas
    return NoiseSchedule(T, betas, alphas, np.cumprod(alphas))


def q_sample(x0: np.ndarray, t, eps: np.ndarray, sched: NoiseSchedule) -> np.ndarray:
    """Forward process ``x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps``.

    ``t`` is a scalar or one step per row of a batched ``x0``.
    """
    x0 = np.asarray(x0, dtype=float)
    eps = np.asarray(eps, dtype=float)
    if x0.shape != eps.shape:
        raise InvalidArgument(f"x0 {x0.shape} and eps {eps.shape} differ in shape")
    t = np.asarray(t)
    if np.any(t < 1) or np.any(t > sched.T):
        raise InvalidArgument(f"diffusion step outside 1..{sched.T}")
    ab = sched.alpha_bars[t - 1]
    if ab.ndim == 1:
        if x0.ndim != 2 or len(ab) != len(x0):
            raise InvalidArgument("per-row steps need a batch of the same length")
        ab = ab[:, None]
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps


def timestep_embedding(t, dim: int = TEMB_DIM) -> np.ndarray:
    """Sinusoidal embedding; ``(dim,)`` for a scalar, ``(n, dim)`` for a vector."""
    t = np.asarray(t, dtype=float)
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / half)
    arg = t[..., None] * freqs
    return np.concatenate([np.sin(arg), np.cos(arg)], axis=-1)


# ------------------------------------------------------------------- policy


@dataclass(frozen=True)
class PolicyConfig:
    instrumented: bool = True
    chunk_len: int = CHUNK_LEN
    exec_len: int = EXEC_LEN
    obs_dim: int = 2568
    action_dim: int = ACTION_DIM
    diffusion_steps: int = 50
    widths: tuple[int, ...] = (512, 512)
    time_hidden: int = 64
    train_steps: int = 20_000
    batch_size: int = 32
    lr: float = 3e-4
    lr_schedule: str = "cosine"
    warmup_steps: int = 500
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.exec_len > self.chunk_len or self.exec_len < 1:
            raise InvalidArgument("execute length must lie in 1..chunk length")
        if self.batch_size < 1:
            raise InvalidArgument("batch size must be >= 1")
        if self.diffusion_steps < 1 or self.train_steps < 0:
            raise InvalidArgument("diffusion steps must be >= 1 and train steps >= 0")
        if self.time_hidden < 1:
            raise InvalidArgument("timestep encoder width must be >= 1")
        if self.lr_schedule not in LR_SCHEDULES or self.warmup_steps < 0:
            raise InvalidArgument(f"lr schedule must be one of {LR_SCHEDULES} with warmup >= 0")
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))

    @classmethod
    def for_sim(cls, cfg: SimConfig, instrumented: bool, **kw) -> PolicyConfig:
        return cls(instrumented=instrumented, obs_dim=observation_length(cfg, instrumented), **kw)

    def lr_at(self, step: int) -> float:
        """Learning rate for the update taken at ``step`` (0-based).

        ``cosine``: linear warmup over ``warmup_steps``, then half-cosine
        decay to zero at ``train_steps``.  ``constant``: always ``lr``.
        """
        if self.lr_schedule == "constant":
            return self.lr
        if step < self.warmup_steps:
            return self.lr * (step + 1) / self.warmup_steps
        span = max(self.train_steps - self.warmup_steps, 1)
        frac = min((step - self.warmup_steps) / span, 1.0)
        return self.lr * 0.5 * (1.0 + math.cos(math.pi * frac))

    @property
    def chunk_dim(self) -> int:
        return self.chunk_len * self.action_dim

    @property
    def input_dim(self) -> int:
        """Trunk input width; the timestep enters through FiLM."""
        return self.obs_dim + self.chunk_dim

    def to_dict(self) -> dict:
        d = asdict(self)
        d["widths"] = list(self.widths)
        d["betas"] = list(self.betas)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> PolicyConfig:
        d = dict(d)
        d["widths"] = tuple(d["widths"])
        d["betas"] = tuple(d["betas"])
        return cls(**d)


def _stream(seed: int, tag: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(tag)])))


@dataclass
class DiffusionPolicy:
    """Trainable chunked policy.

    ``rng`` is the training stream (batches, steps, noise); sampling uses
    the generator passed to :func:`sample_chunk`.
    """

    config: PolicyConfig
    sim: SimConfig
    params: FilmParams
    schedule: NoiseSchedule
    adam: AdamState
    rng: np.random.Generator = field(repr=False)
    step: int = 0
    tag: str = ""
    privileged = False

    @classmethod
    def create(cls, config: PolicyConfig, sim: SimConfig, tag: str = "") -> DiffusionPolicy:
        if config.obs_dim != observation_length(sim, config.instrumented):
            raise ModalityMismatch(
                f"obs_dim {config.obs_dim} does not match a "
                f"{'instrumented' if config.instrumented else 'vision-only'} observation")
        sizes = (config.input_dim, *config.widths, config.chunk_dim)
        params = init_film(sizes, TEMB_DIM, config.time_hidden, _stream(config.seed, 0))
        return cls(config, sim, params, make_schedule(config.diffusion_steps),
                   AdamState.zeros_like(params), _stream(config.seed, 1), 0, tag)

    @property
    def instrumented(self) -> bool:
        return self.config.instrumented

    def plan(self, obs: Observation, state, rng: np.random.Generator) -> np.ndarray:
        return sample_chunk(self, obs, rng)


# ------------------------------------------------------------------ training


@dataclass(frozen=True)
class TrainBatch:
    obs: np.ndarray  # (B, obs_dim)
    actions: np.ndarray  # (B, chunk_len * action_dim), normalized


@dataclass
class TrainingSet:
    """Every frame of a dataset with its padded future action chunk.

    Grids stay ``uint8`` until a batch is drawn.
    """

    grids: np.ndarray  # (n, 2*S*S + 2*W*W) uint8
    proprio: np.ndarray  # (n, 4) normalized
    instr: np.ndarray | None  # (n, 4)
    chunks: np.ndarray  # (n, chunk_dim) normalized

    def __len__(self) -> int:
        return len(self.chunks)

    @classmethod
    def from_episodes(cls, episodes, sim: SimConfig, instrumented: bool,
                      chunk_len: int = CHUNK_LEN) -> TrainingSet:
        grids, prop, instr, chunks = [], [], [], []
        for ep in episodes:
            if instrumented and not ep.instrumented:
                raise ModalityMismatch("instrumented training needs episodes with sensor channels")
            n = len(ep)
            grids.append(np.concatenate([ep.scene.reshape(n, -1), ep.wrist.reshape(n, -1)], axis=1))
            prop.append(np.array([normalize_proprio(p, sim) for p in ep.proprio]))
            if instrumented:
                instr.append(np.asarray(ep.instr, dtype=float))
            acts = normalize_rows(ep.actions, sim)
            # pad by repeating the final action
            idx = np.minimum(np.arange(n)[:, None] + np.arange(chunk_len)[None, :], n - 1)
            chunks.append(acts[idx].reshape(n, -1))
        return cls(
            np.concatenate(grids).astype(np.uint8),
            np.concatenate(prop),
            np.concatenate(instr) if instrumented else None,
            np.concatenate(chunks),
        )

    def obs_rows(self, idx: np.ndarray) -> np.ndarray:
        parts = [self.grids[idx].astype(float), self.proprio[idx]]
        if self.instr is not None:
            parts.append(self.instr[idx])
        return np.concatenate(parts, axis=1)

    def sample(self, rng: np.random.Generator, batch_size: int) -> TrainBatch:
        idx = rng.integers(0, len(self), size=batch_size)
        return TrainBatch(self.obs_rows(idx), self.chunks[idx])


def _check_batch(policy: DiffusionPolicy, batch: TrainBatch) -> None:
    cfg = policy.config
    if batch.obs.ndim != 2 or batch.obs.shape[1] != cfg.obs_dim:
        raise ModalityMismatch(f"batch observations have width {batch.obs.shape[-1]}, policy expects {cfg.obs_dim}")
    if batch.actions.shape != (len(batch.obs), cfg.chunk_dim):
        raise InvalidArgument(f"batch actions have shape {batch.actions.shape}")


def _net_input(obs: np.ndarray, xt: np.ndarray) -> np.ndarray:
    return np.concatenate([obs, xt], axis=1)


def loss_and_grads(policy: DiffusionPolicy, batch: TrainBatch, t: np.ndarray, eps: np.ndarray,
                   target: np.ndarray | None = None) -> tuple[float, FilmGrads]:
    """Noise-prediction MSE and its parameter gradients for fixed draws.

    ``target`` overrides ``eps`` as the regression target.
    """
    xt = q_sample(batch.actions, t, eps, policy.schedule)
    pred, cache = film_forward(policy.params, _net_input(batch.obs, xt), timestep_embedding(t))
    target = eps if target is None else target
    diff = pred - target
    loss = float(np.mean(diff * diff))
    grads = film_backward(policy.params, cache, 2.0 * diff / diff.size)
    return loss, grads


def train_step(policy: DiffusionPolicy, batch: TrainBatch, rng: np.random.Generator | None = None) -> float:
    """One Adam step on the noise-prediction loss; returns the pre-step loss."""
    _check_batch(policy, batch)
    rng = policy.rng if rng is None else rng
    B = len(batch.obs)
    t = rng.integers(1, policy.schedule.T + 1, size=B)
    eps = rng.standard_normal((B, policy.config.chunk_dim))
    loss, grads = loss_and_grads(policy, batch, t, eps)
    if not math.isfinite(loss):
        raise TrainingDivergence(f"non-finite loss at step {policy.step}")
    c = policy.config
    adam_step(policy.params, grads, policy.adam, c.lr_at(policy.step), c.betas, c.eps)
    policy.step += 1
    return loss


def train(policy: DiffusionPolicy, data: TrainingSet, steps: int | None = None,
          log_every: int = 0, callback=None) -> list[float]:
    """Run ``steps`` (default: remaining configured steps) of training.

    ``callback(policy, loss)`` runs after every step; with ``log_every`` it
    runs only every ``log_every`` steps.
    """
    steps = policy.config.train_steps - policy.step if steps is None else steps
    losses = []
    for _ in range(max(steps, 0)):
        batch = data.sample(policy.rng, policy.config.batch_size)
        loss = train_step(policy, batch)
        losses.append(loss)
        if callback is not None and (log_every <= 0 or policy.step % log_every == 0):
            callback(policy, loss)
    return losses


# ------------------------------------------------------------------ sampling


def _first_layer_split(params: FilmParams, obs_dim: int, obs_vec: np.ndarray):
    """Precompute the observation's constant contribution to layer one."""
    w0 = params.trunk.weights[0]
    return obs_vec @ w0[:obs_dim] + params.trunk.biases[0], w0[obs_dim:]


def predict_noise(policy: DiffusionPolicy, obs_vec: np.ndarray, xt: np.ndarray, t: int) -> np.ndarray:
    """Single-observation epsilon prediction, algebraically equal to
    ``film_forward(params, concat(obs, xt), emb(t))``."""
    p = policy.params
    base, w_rest = _first_layer_split(p, policy.config.obs_dim, obs_vec)
    return _predict(p, base, w_rest, xt, t)


def _predict(p: FilmParams, base: np.ndarray, w_rest: np.ndarray, xt: np.ndarray, t: int) -> np.ndarray:
    enc = np.maximum(timestep_embedding(t) @ p.time_w + p.time_b, 0.0)
    tr = p.trunk
    z = base + xt @ w_rest
    for k in range(1, len(tr.weights)):
        width = z.shape[-1]
        f = enc @ p.film_w[k - 1] + p.film_b[k - 1]
        h = np.maximum(z, 0.0) * (1.0 + f[:width]) + f[width:]
        z = h @ tr.weights[k] + tr.biases[k]
    return z


def obs_vector(policy: DiffusionPolicy, obs: Observation) -> np.ndarray:
    """Feature vector for ``obs``; refuses the wrong modality."""
    if obs.instrumented != policy.instrumented:
        raise ModalityMismatch(
            f"{'instrumented' if obs.instrumented else 'vision-only'} observation given to a "
            f"{'instrumented' if policy.instrumented else 'vision-only'} policy")
    vec = normalize_observation(obs, policy.sim)
    if vec.size != policy.config.obs_dim:
        raise ModalityMismatch(f"feature length {vec.size} != {policy.config.obs_dim}")
    return vec


def ddpm_sample(eps_fn, sched: NoiseSchedule, shape, rng: np.random.Generator,
                clip: float | None = 1.0) -> np.ndarray:
    """Ancestral sampling from ``x_T ~ N(0, I)`` down to ``x_0``.

    ``eps_fn(x_t, t)`` predicts the noise.  Each step forms the implied
    ``x0`` (clipped to ``[-clip, clip]`` unless ``clip`` is None) and draws
    from the Gaussian posterior ``q(x_{t-1} | x_t, x0)``.
    """
    x = rng.standard_normal(shape)
    for t in range(sched.T, 0, -1):
        eps_hat = eps_fn(x, t)
        ab_t = sched.alpha_bars[t - 1]
        ab_prev = sched.alpha_bar(t - 1)
        beta = sched.betas[t - 1]
        x0 = (x - math.sqrt(1.0 - ab_t) * eps_hat) / math.sqrt(ab_t)
        if clip is not None:
            x0 = np.clip(x0, -clip, clip)
        mean = (math.sqrt(ab_prev) * beta / (1.0 - ab_t)) * x0 \
            + (math.sqrt(sched.alphas[t - 1]) * (1.0 - ab_prev) / (1.0 - ab_t)) * x
        if t > 1:
            var = beta * (1.0 - ab_prev) / (1.0 - ab_t)
            x = mean + math.sqrt(var) * rng.standard_normal(x.shape)
        else:
            x = mean
    return x


def sample_normalized(policy: DiffusionPolicy, obs_vec: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One normalized chunk ``(chunk_len, action_dim)`` for a feature vector."""
    p = policy.params
    base, w_rest = _first_layer_split(p, policy.config.obs_dim, obs_vec)
    x = ddpm_sample(lambda xt, t: _predict(p, base, w_rest, xt, t), policy.schedule, policy.config.chunk_dim, rng)
    return x.reshape(policy.config.chunk_len, policy.config.action_dim)


def sample_chunk(policy: DiffusionPolicy, obs: Observation, rng: np.random.Generator) -> np.ndarray:
    """Physical ``(16, 4)`` action chunk, clamped row by row."""
    rows = denormalize_rows(sample_normalized(policy, obs_vector(policy, obs), rng), policy.sim)
    return np.array([clamp_action(r, policy.sim) for r in rows])


# ---------------------------------------------------------------- gradients


def finite_diff_check(policy: DiffusionPolicy, batch: TrainBatch, rng: np.random.Generator | None = None,
                      n_coords: int = 256, h: float = 1e-5, target: np.ndarray | None = None,
                      gradient_fn=None, floor: float = 1e-4) -> float:
    """Largest gradient error over a random subset of parameters.

    Each coordinate scores ``|g - g_fd| / max(|g|, |g_fd|, floor)``.  Below
    ``floor`` the score is an absolute error scaled by ``1/floor``: a central
    difference at ``h = 1e-5`` carries ~1e-11 of round-off, which would
    dominate a purely relative score on tiny gradients and at stationary
    points.  ``gradient_fn(policy, batch, t, eps, target)`` can
    replace the analytic gradient (used for mutation tests).
    """
    _check_batch(policy, batch)
    rng = np.random.default_rng(0) if rng is None else rng
    B = len(batch.obs)
    t = rng.integers(1, policy.schedule.T + 1, size=B)
    eps = rng.standard_normal((B, policy.config.chunk_dim))
    fn = gradient_fn or (lambda pol, b, tt, ee, tg: loss_and_grads(pol, b, tt, ee, tg)[1])
    grads = fn(policy, batch, t, eps, target).arrays()
    arrays = policy.params.arrays()
    sizes = np.array([a.size for a in arrays])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    n = min(n_coords, int(offsets[-1]))
    flat_idx = rng.choice(int(offsets[-1]), size=n, replace=False)
    worst = 0.0
    for fi in flat_idx:
        k = int(np.searchsorted(offsets, fi, side="right") - 1)
        j = int(fi - offsets[k])
        a = arrays[k].reshape(-1)
        old = a[j]
        a[j] = old + h
        lp, _ = loss_and_grads(policy, batch, t, eps, target)
        a[j] = old - h
        lm, _ = loss_and_grads(policy, batch, t, eps, target)
        a[j] = old
        fd = (lp - lm) / (2.0 * h)
        g = float(grads[k].reshape(-1)[j])
        worst = max(worst, abs(g - fd) / max(abs(g), abs(fd), floor))
    return worst
