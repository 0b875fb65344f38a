# -*- coding: utf-8 -*-

"""Run configuration records, validated on construction.
"""

import dataclasses
import logging

from merge_distill.misc import ValidationError
from .loss import LAMBDA_SCHEDULES

_LOGGER = logging.getLogger(__name__)

COPY_STRATEGIES = ('all_copies', 'best_copy', 'single_teacher')
LABEL_MODES = ('gold_only', 'gold_plus_teacher')
OPTIMIZER_NAMES = ('sgd', 'adam')


def _fail(cls, msg):
    _LOGGER.error("{}: {}.".format(cls, msg))
    raise ValidationError(msg)


def config_from_dict(cls, d):
    """Build dataclass *cls* from mapping *d*, rejecting unknown keys."""
    d = dict(d or {})
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(d) - names)
    if unknown:
        _fail(cls.__name__, "unknown key(s) {}".format(', '.join(unknown)))
    return cls(**d)


@dataclasses.dataclass(frozen=True)
class TrainingConfig:
    """Student training knobs.

    Attributes
    ----------
    total_steps : int
        Number of optimizer steps.
    batch_size : int
        Raw examples drawn per step; ``all_copies`` may emit more entries.
    top_k : int
        Teacher predictions stored per masked position.
    alpha : float
        Language sampling exponent.
    copy_strategy : str
        'all_copies', 'best_copy' or 'single_teacher'.
    label_mode : str
        'gold_only' or 'gold_plus_teacher'.
    learning_rate : float
        Optimizer step size.
    seed : int
        Run seed, every random stream derives from it.
    lambda_schedule : str
        'linear', 'cosine' or 'constant'.
    lambda_constant : float
        KD weight of the 'constant' schedule.
    optimizer : str
        'sgd' or 'adam'.
    dim, window : int
        Student embedding width and context window.
    checkpoint_every : int
        Write a checkpoint every so many steps, 0 to disable.
    reshuffle : bool
        Start a new shuffled pass when a language runs out of examples.
    """
    total_steps: int = 1000
    batch_size: int = 16
    top_k: int = 8
    alpha: float = 0.7
    copy_strategy: str = 'all_copies'
    label_mode: str = 'gold_plus_teacher'
    learning_rate: float = 0.1
    seed: int = 0
    lambda_schedule: str = 'linear'
    lambda_constant: float = 1.0
    optimizer: str = 'sgd'
    dim: int = 32
    window: int = 2
    checkpoint_every: int = 0
    reshuffle: bool = True

    def __post_init__(self):
        n = 'TrainingConfig'
        if self.total_steps < 0:
            _fail(n, "total_steps must be >= 0")
        if self.batch_size < 1:
            _fail(n, "batch_size must be >= 1")
        if self.top_k < 1:
            _fail(n, "top_k must be >= 1")
        if not (0.0 < self.alpha <= 1.0):
            _fail(n, "alpha must be in (0, 1]")
        if self.copy_strategy not in COPY_STRATEGIES:
            _fail(n, "copy_strategy must be one of {}".format(
                  ', '.join(COPY_STRATEGIES)))
        if self.label_mode not in LABEL_MODES:
            _fail(n, "label_mode must be one of {}".format(
                  ', '.join(LABEL_MODES)))
        if self.learning_rate < 0:
            _fail(n, "learning_rate must be >= 0")
        if self.lambda_schedule not in LAMBDA_SCHEDULES:
            _fail(n, "lambda_schedule must be one of {}".format(
                  ', '.join(LAMBDA_SCHEDULES)))
        if not (0.0 <= self.lambda_constant <= 1.0):
            _fail(n, "lambda_constant must be in [0, 1]")
        if self.optimizer not in OPTIMIZER_NAMES:
            _fail(n, "optimizer must be one of {}".format(
                  ', '.join(OPTIMIZER_NAMES)))
        if self.dim < 1 or self.window < 0:
            _fail(n, "dim must be >= 1 and window >= 0")
        if self.checkpoint_every < 0:
            _fail(n, "checkpoint_every must be >= 0")

    @property
    def use_teacher(self):
        return self.label_mode == 'gold_plus_teacher'

    def replace(self, **kws):
        return dataclasses.replace(self, **kws)

    @classmethod
    def from_dict(cls, d):
        return config_from_dict(cls, d)


@dataclasses.dataclass(frozen=True)
class PrepareConfig:
    """Masking and sharding knobs of the offline evaluation stage."""
    mask_rate: float = 0.15
    max_length: int = 128
    shard_size: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.mask_rate < 1.0):
            _fail('PrepareConfig', "mask_rate must be in (0, 1)")
        if self.max_length < 1 or self.shard_size < 1:
            _fail('PrepareConfig', "max_length and shard_size must be >= 1")

    def replace(self, **kws):
        return dataclasses.replace(self, **kws)

    @classmethod
    def from_dict(cls, d):
        return config_from_dict(cls, d)
