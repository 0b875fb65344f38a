#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Student optimization: example pool over prediction shards, batch
assembly with copy strategies, training step and the training loop.
"""

import dataclasses
import logging
import os

import numpy as np

from merge_distill.io.checkpoint import save_checkpoint
from merge_distill.io.output import write_loss_csv
from merge_distill.misc import DataExhaustedError
from merge_distill.misc import IntegrityError
from merge_distill.misc import TrainingError
from merge_distill.misc import ValidationError
from merge_distill.misc import derive_seed
from merge_distill.misc import make_rng
from merge_distill.misc import ordered_map
from .config import TrainingConfig
from .corpus import sample_language
from .loss import batch_objective
from .loss import lambda_at
from .loss import normalize_topk
from .optim import make_optimizer
from .student import backward
from .student import forward
from .student import init_params
from .teacher import select_best_copy

_LOGGER = logging.getLogger(__name__)


@dataclasses.dataclass
class BatchEntry:
    """One training instance: a student-space example and its teacher
    distributions (None when the example carries no prediction)."""
    example: object
    dists: list = None

    @classmethod
    def from_example(cls, ex):
        dists = None
        if ex.predictions is not None:
            dists = [normalize_topk(p, ex.teacher_id)
                     for p in ex.predictions]
        return cls(ex, dists)


class ExamplePool(object):
    """Shard records grouped by language and raw example.

    Parameters
    ----------
    shards : list of PredictionShard
        Student-space training shards, all built on one vocabulary.
    language_teachers : dict
        Language to its ordered teacher ids; derived from the shards in
        order of appearance if not set.
    reshuffle : bool
        Start a new shuffled pass when a language is exhausted, otherwise
        raise ``DataExhaustedError``.
    seed : int
        Seed of the per-pass shuffles.
    """

    def __init__(self, shards, language_teachers=None, reshuffle=True,
                 seed=0):
        shards = list(shards)
        if not shards:
            _LOGGER.error("ExamplePool: no shard.")
            raise ValidationError("at least one shard is required")
        checksums = {s.vocab_checksum for s in shards}
        if len(checksums) != 1:
            _LOGGER.error("ExamplePool: shards from {} vocabularies.".format(
                          len(checksums)))
            raise IntegrityError("shards were built on different vocabularies")
        self.vocab_checksum = checksums.pop()

        groups = {}
        teachers = {}
        for s in shards:
            for ex in s.records:
                g = groups.setdefault(ex.language, {})
                g.setdefault(int(ex.example_id), {})[ex.teacher_id] = ex
                tl = teachers.setdefault(ex.language, [])
                if ex.teacher_id not in tl:
                    tl.append(ex.teacher_id)
        if language_teachers is not None:
            teachers = {l: [str(t) for t in ts]
                        for l, ts in language_teachers.items()}
        self._teachers = teachers
        self._groups = groups
        self._ids = {l: np.array(sorted(g), dtype=np.int64)
                     for l, g in groups.items()}
        self._reshuffle = reshuffle
        self._seed = seed
        self._order = {}
        self._cursor = {}
        self._pass = {}

    @property
    def languages(self):
        return list(self._groups)

    def teachers(self, language):
        return list(self._teachers.get(language, []))

    def num_examples(self, language):
        return len(self._groups.get(language, {}))

    def _start_pass(self, language, n):
        rng = make_rng(self._seed, 'pass', language, n)
        self._order[language] = rng.permutation(self._ids[language])
        self._cursor[language] = 0
        self._pass[language] = n

    def next_group(self, language):
        """Next raw example of *language*, as teacher id to copy.

        Copies are ordered like the language's teacher list.
        """
        if language not in self._groups:
            _LOGGER.error("next_group: no example for language {}.".format(
                          language))
            raise ValidationError("no example for language {}".format(
                                  language))
        if language not in self._order:
            self._start_pass(language, 0)
        if self._cursor[language] >= self._order[language].size:
            if not self._reshuffle:
                _LOGGER.error("next_group: language {} exhausted.".format(
                              language))
                raise DataExhaustedError(
                    "language {} exhausted and reshuffle is off".format(
                        language))
            n = self._pass[language] + 1
            _LOGGER.info("next_group: language {} pass {}.".format(
                         language, n))
            self._start_pass(language, n)
        eid = int(self._order[language][self._cursor[language]])
        self._cursor[language] += 1
        copies = self._groups[language][eid]
        order = [t for t in self._teachers.get(language, []) if t in copies]
        order += [t for t in copies if t not in order]
        return {t: copies[t] for t in order}

    def copies(self, language, example_id):
        return dict(self._groups[language][int(example_id)])


def _pick(group, cfg, language_teachers):
    if cfg.copy_strategy == 'all_copies':
        return list(group.values())
    if cfg.copy_strategy == 'best_copy':
        return [select_best_copy(list(group.values()), language_teachers)]
    for t in language_teachers:
        if t in group:
            return [group[t]]
    return [next(iter(group.values()))]


def assemble_batch(pool, cfg, rng, weights):
    """Draw one training batch.

    Each of ``cfg.batch_size`` raw examples is drawn by sampling a
    language from *weights*, then taking the next example of that language;
    the copy strategy then decides which copies enter the batch.

    Parameters
    ----------
    pool : ExamplePool
        Training examples.
    cfg : TrainingConfig
        Batch size and copy strategy.
    rng : numpy.random.Generator
        Language sampling stream.
    weights : dict
        Language to sampling probability.

    Returns
    -------
    list of BatchEntry
    """
    for lang, w in weights.items():
        if w > 0 and pool.num_examples(lang) == 0:
            _LOGGER.error("assemble_batch: language {} has weight {} but "
                          "no example.".format(lang, w))
            raise ValidationError("no example for language {}".format(lang))
    batch = []
    for _ in range(cfg.batch_size):
        lang = sample_language(weights, rng)
        group = pool.next_group(lang)
        for ex in _pick(group, cfg, pool.teachers(lang)):
            batch.append(BatchEntry.from_example(ex))
    return batch


@dataclasses.dataclass
class TrainState:
    """Mutable state of a training run.

    Attributes
    ----------
    step : int
        Completed optimizer steps.
    model : StudentModel
        Student being trained.
    optimizer :
        ``SGD`` or ``Adam`` instance, holds the moments.
    rng : numpy.random.Generator
        Batch sampling stream.
    examples_seen : int
        Batch entries consumed so far.
    history : list of dict
        One loss row per step.
    """
    step: int
    model: object
    optimizer: object
    rng: object
    examples_seen: int = 0
    history: list = dataclasses.field(default_factory=list)


def init_state(cfg, vocab_size, vocab_checksum=None, model=None,
               sampling_seed=None):
    """Fresh TrainState, student initialized from the run seed.

    The batch stream is seeded from *sampling_seed*, or from the run seed
    if None.
    """
    if model is None:
        model = init_params(vocab_size, cfg.dim,
                            derive_seed(cfg.seed, 'student_init'),
                            window=cfg.window, vocab_checksum=vocab_checksum)
    return TrainState(step=0, model=model,
                      optimizer=make_optimizer(cfg.optimizer,
                                               cfg.learning_rate),
                      rng=make_rng(cfg.seed if sampling_seed is None
                                   else sampling_seed, 'batch'))


def train_step(state, batch, cfg, workers=1):
    """One optimizer update on *batch*.

    The KD weight is ``lambda_at(state.step + 1, cfg.total_steps)``, so
    the last step of a run uses the final schedule value.

    Returns
    -------
    tuple
        ``(state, LossBreakdown)``, *state* updated in place.

    Raises
    ------
    TrainingError
        Non-finite loss or parameter.
    ValidationError
        Empty batch, or teacher distributions missing in
        ``gold_plus_teacher`` mode.
    """
    if not batch:
        raise ValidationError("empty batch")
    step = state.step + 1
    lam = lambda_at(step, max(cfg.total_steps, step), cfg.lambda_schedule,
                    cfg.lambda_constant)
    m = state.model
    fw = ordered_map(lambda e: forward(m, e.example), batch, workers)
    lb, dlogits = batch_objective(batch, [z for z, _ in fw], lam,
                                  use_teacher=cfg.use_teacher)
    if not lb.is_finite():
        _LOGGER.error("train_step: non-finite loss at step {} (l_mlm={}, "
                      "l_kd={}).".format(step, lb.l_mlm, lb.l_kd_mean))
        raise TrainingError("non-finite loss at step {}".format(step))

    per_entry = ordered_map(lambda i: backward(m, fw[i][1], dlogits[i]),
                            range(len(batch)), workers)
    grads = {k: np.zeros_like(v) for k, v in m.params.items()}
    for g in per_entry:
        for k in grads:
            grads[k] += g[k]
    state.optimizer.step(m.params, grads)
    if not m.is_finite():
        _LOGGER.error("train_step: non-finite parameter at step {}.".format(
                      step))
        raise TrainingError("non-finite parameter at step {}".format(step))

    state.step = step
    state.examples_seen += len(batch)
    state.history.append({'step': step, 'lambda': lam, 'l_mlm': lb.l_mlm,
                          'l_kd': lb.l_kd_mean, 'l_all': lb.l_all,
                          'examples_seen': state.examples_seen})
    _LOGGER.debug("train_step: step {} lambda {:.4f} l_all {:.6f}".format(
                  step, lam, lb.l_all))
    return state, lb


@dataclasses.dataclass
class TrainResult:
    state: TrainState
    snapshots: dict
    checkpoints: list

    @property
    def model(self):
        return self.state.model

    @property
    def history(self):
        return self.state.history


def train(cfg, shards, weights, vocab_size, language_teachers=None,
          output_dir=None, snapshot_steps=(), model=None, workers=None,
          sampling_seed=None):
    """Run ``cfg.total_steps`` training steps.

    Parameters
    ----------
    cfg : TrainingConfig
        Run configuration.
    shards : list of PredictionShard
        Student-space training shards.
    weights : dict
        Language sampling probabilities.
    vocab_size : int
        Student vocabulary size.
    language_teachers : dict
        Language to ordered teacher ids.
    output_dir : str
        Where ``step_XXXXXXXX.ckpt``, ``final.ckpt`` and ``loss.csv`` go;
        nothing is written if None.
    snapshot_steps : list of int
        Steps after which an in-memory copy of the student is kept.
    model : StudentModel
        Initial student, initialized from the seed if None.
    workers : int
        Threads for per-example forward/backward.
    sampling_seed : int
        Seed of the language and copy draws, the run seed if None.

    Returns
    -------
    TrainResult

    Notes
    -----
    The same configuration, shards and seed give the same loss rows and
    checkpoint bytes for any worker count.
    """
    if not isinstance(cfg, TrainingConfig):
        raise ValidationError("cfg must be a TrainingConfig")
    pool = ExamplePool(shards, language_teachers, reshuffle=cfg.reshuffle,
                       seed=cfg.seed)
    state = init_state(cfg, vocab_size, pool.vocab_checksum, model,
                       sampling_seed)
    if state.model.vocab_size != vocab_size:
        raise ValidationError("model vocab size differs from vocab_size")
    snapshot_steps = set(int(s) for s in snapshot_steps)
    snapshots = {}
    checkpoints = []
    if 0 in snapshot_steps:
        snapshots[0] = state.model.copy()
    _LOGGER.info("train: {} steps, batch {}, {} / {}, {} parameters.".format(
                 cfg.total_steps, cfg.batch_size, cfg.label_mode,
                 cfg.copy_strategy, state.model.num_params))
    for _ in range(cfg.total_steps):
        batch = assemble_batch(pool, cfg, state.rng, weights)
        state, _ = train_step(state, batch, cfg, workers)
        if state.step in snapshot_steps:
            snapshots[state.step] = state.model.copy()
        if output_dir and cfg.checkpoint_every and \
                state.step % cfg.checkpoint_every == 0:
            p = os.path.join(output_dir, 'step_{:08d}.ckpt'.format(
                             state.step))
            checkpoints.append(save_checkpoint(state.model, p))
    if output_dir:
        checkpoints.append(save_checkpoint(
            state.model, os.path.join(output_dir, 'final.ckpt')))
        write_loss_csv(state.history, os.path.join(output_dir, 'loss.csv'))
    if state.history:
        _LOGGER.info("train: done, final l_all {:.6f}.".format(
                     state.history[-1]['l_all']))
    return TrainResult(state=state, snapshots=snapshots,
                       checkpoints=checkpoints)
