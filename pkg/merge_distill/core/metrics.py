#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Evaluation: MLM accuracy, KL divergence to the teacher on held-out
masks, and the relative deviation from teachers (RDT).
"""

import dataclasses
import logging
import math

import numpy as np

from merge_distill.misc import IntegrityError
from merge_distill.misc import ValidationError
from .loss import kl_divergence
from .loss import normalize_topk
from .student import forward

_LOGGER = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class RdtEntry:
    """Student score and its teachers' scores for one language."""
    language: str
    student_score: float
    teacher_scores: tuple

    def __post_init__(self):
        ts = tuple((str(t), float(s)) for t, s in self.teacher_scores)
        if not ts:
            raise ValidationError("language {} has no teacher score".format(
                                  self.language))
        object.__setattr__(self, 'teacher_scores', ts)
        object.__setattr__(self, 'student_score', float(self.student_score))


@dataclasses.dataclass(frozen=True)
class RdtInput:
    """Scores of one task.

    Attributes
    ----------
    task : str
        Task tag, e.g. 'NER'.
    entries : tuple of RdtEntry
        One entry per language.
    """
    task: str
    entries: tuple

    def __post_init__(self):
        object.__setattr__(self, 'entries', tuple(self.entries))
        if not self.entries:
            raise ValidationError("task {} has no entry".format(self.task))

    @classmethod
    def from_pairs(cls, task, pairs, teacher_id='teacher'):
        """Build from ``(language, student_score, teacher_score)`` triples."""
        return cls(task, [RdtEntry(l, s, [(teacher_id, t)])
                          for l, s, t in pairs])


def rdt(inp):
    """Relative deviation from teachers, in percent.

    ``100/N * sum (P_S - P_T) / P_T`` over all N (language, teacher)
    pairs. Positive means the student beats its teachers.

    Parameters
    ----------
    inp : RdtInput
        Scores of one task.

    Returns
    -------
    float

    Raises
    ------
    ValidationError
        A teacher score is not positive.

    Examples
    --------
    >>> r = RdtInput.from_pairs('PANX', [('all', 69.3, 58.8)])
    >>> round(rdt(r), 1)
    17.9

    Notes
    -----
    The deviation is student minus teacher, so a student that improves on
    its teachers gets a positive RDT.
    """
    total, count = 0.0, 0
    for e in inp.entries:
        for tid, pt in e.teacher_scores:
            if not pt > 0:
                _LOGGER.error("rdt: nonpositive score {} of teacher {} "
                              "({}, {}).".format(pt, tid, inp.task,
                                                 e.language))
                raise ValidationError(
                    "teacher score must be > 0, got {} for {}/{}".format(
                        pt, e.language, tid))
            total += (e.student_score - pt) / pt
            count += 1
    return 100.0 * total / count


def rdt_table(inputs):
    """RDT per task, in input order."""
    return {inp.task: rdt(inp) for inp in inputs}


def _examples(shards):
    if hasattr(shards, 'records'):
        shards = [shards]
    out = []
    for s in shards:
        out.extend(s.records if hasattr(s, 'records') else [s])
    return out


def mlm_accuracy(model, examples):
    """Fraction of masked positions where the student argmax is gold.

    Ties go to the lowest id.

    Raises
    ------
    ValidationError
        No example given.
    """
    examples = _examples(examples)
    if not examples:
        _LOGGER.error("mlm_accuracy: empty evaluation set.")
        raise ValidationError("empty evaluation set")
    hit, total = 0, 0
    for ex in examples:
        logits, _ = forward(model, ex)
        hit += int(np.sum(np.argmax(logits, axis=1) == ex.gold_ids))
        total += ex.n
    return hit / total


def _check_checksum(model, shard):
    a = getattr(shard, 'vocab_checksum', None)
    b = model.vocab_checksum
    if a is not None and b is not None and a != b:
        _LOGGER.error("kl_to_teacher: shard vocab {} differs from model "
                      "vocab {}.".format(a[:12], b[:12]))
        raise IntegrityError("shard and model vocab checksums differ")


def kl_to_teacher(model, shards):
    """Mean ``KL(Q || p_student)`` over held-out masked positions.

    Parameters
    ----------
    model : StudentModel
        Student.
    shards : PredictionShard or list
        Held-out shard(s), or a list of examples with predictions.

    Returns
    -------
    float

    Raises
    ------
    IntegrityError
        Shard and model built on different vocabularies.
    """
    if hasattr(shards, 'records'):
        shards = [shards]
    for s in shards:
        _check_checksum(model, s)
    examples = _examples(shards)
    if not examples:
        _LOGGER.error("kl_to_teacher: empty evaluation set.")
        raise ValidationError("empty evaluation set")
    total, n = 0.0, 0
    for ex in examples:
        if ex.predictions is None:
            raise ValidationError("example {} has no teacher prediction"
                                  .format(ex.example_id))
        logits, _ = forward(model, ex)
        kl = kl_divergence(logits, [normalize_topk(p)
                                    for p in ex.predictions])
        total += float(kl.sum())
        n += ex.n
    return total / n


@dataclasses.dataclass
class MetricsReport:
    """Evaluation results of one student.

    Attributes
    ----------
    mlm_top1_accuracy : float
        In [0, 1], None if not computed.
    kl_to_teacher : float
        >= 0, None if not computed.
    rdt : dict
        Task to RDT percentage.
    positions : int
        Held-out masked positions evaluated.
    """
    mlm_top1_accuracy: float = None
    kl_to_teacher: float = None
    rdt: dict = dataclasses.field(default_factory=dict)
    positions: int = 0

    def rows(self):
        """``(metric, value)`` pairs in report order."""
        out = []
        if self.mlm_top1_accuracy is not None:
            out.append(('mlm_top1_accuracy', self.mlm_top1_accuracy))
        if self.kl_to_teacher is not None:
            out.append(('kl_to_teacher', self.kl_to_teacher))
        if self.positions:
            out.append(('positions', self.positions))
        for task, v in self.rdt.items():
            out.append(('rdt:{}'.format(task), v))
        return out


def evaluate(model, shards, rdt_inputs=None):
    """Accuracy and KL on held-out *shards*, RDT of *rdt_inputs*.

    Returns
    -------
    MetricsReport
    """
    examples = _examples(shards)
    acc = mlm_accuracy(model, examples)
    kl = kl_to_teacher(model, shards)
    report = MetricsReport(mlm_top1_accuracy=acc, kl_to_teacher=kl,
                           positions=sum(ex.n for ex in examples))
    if rdt_inputs:
        report.rdt = rdt_table(rdt_inputs)
    _LOGGER.info("evaluate: accuracy {:.4f}, KL {:.4f} over {} positions."
                 .format(acc, kl, report.positions))
    if not math.isfinite(kl):
        _LOGGER.warning("evaluate: KL to teacher is not finite.")
    return report
