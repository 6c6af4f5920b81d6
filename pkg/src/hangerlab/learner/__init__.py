"""Neural network, optimizer and diffusion policy."""

from .diffusion import (
    DiffusionPolicy,
    ModalityMismatch,
    NoiseSchedule,
    PolicyConfig,
    TrainBatch,
    TrainingSet,
    finite_diff_check,
    make_schedule,
    q_sample,
    sample_chunk,
    train,
    train_step,
)
from .film import FilmGrads, FilmParams, film_backward, film_forward, init_film
from .mlp import AdamState, MlpGrads, MlpParams, StaleCache, TrainingDivergence, adam_step, init_mlp, mlp_backward, mlp_forward

__all__ = [
    "AdamState", "DiffusionPolicy", "FilmGrads", "FilmParams", "MlpGrads", "MlpParams", "ModalityMismatch", "NoiseSchedule",
    "PolicyConfig", "StaleCache", "TrainBatch", "TrainingDivergence", "TrainingSet", "adam_step",
    "film_backward", "film_forward", "finite_diff_check", "init_film", "init_mlp", "make_schedule", "mlp_backward", "mlp_forward", "q_sample",
    "sample_chunk", "train", "train_step",
]
