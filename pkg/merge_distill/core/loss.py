#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Distillation loss algebra: gold-label MLM loss, KD loss against
normalized top-k teacher distributions, their per-language combination and
the KD weight schedules.
"""

import dataclasses
import logging
import math

import numpy as np

from merge_distill.misc import ValidationError

_LOGGER = logging.getLogger(__name__)


def log_softmax(logits):
    """Row-wise log-softmax of a 2D array, float64."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - np.max(z, axis=-1, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=-1, keepdims=True))


def softmax(logits):
    return np.exp(log_softmax(logits))


@dataclasses.dataclass(frozen=True, eq=False)
class NormalizedTeacherDist:
    """Teacher distribution on its top-k support, probabilities sum to 1.

    Mass outside ``ids`` is zero.
    """
    position: int
    ids: np.ndarray
    probs: np.ndarray
    teacher_id: str = ''

    def __post_init__(self):
        ids = np.array(self.ids, dtype=np.int64).reshape(-1)
        probs = np.array(self.probs, dtype=np.float64).reshape(-1)
        if ids.size < 1 or ids.size != probs.size:
            raise ValidationError("ids and probs must have the same size >= 1")
        if np.unique(ids).size != ids.size:
            raise ValidationError("teacher ids must be distinct")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
            raise ValidationError("probs must be a distribution")
        ids.setflags(write=False)
        probs.setflags(write=False)
        object.__setattr__(self, 'ids', ids)
        object.__setattr__(self, 'probs', probs)

    @property
    def k(self):
        return int(self.ids.size)


def normalize_topk(p, teacher_id=''):
    """Softmax over the k stored logits of a top-k prediction.

    Parameters
    ----------
    p : TopKPrediction
        Stored prediction, ids in student space.

    Returns
    -------
    NormalizedTeacherDist

    Examples
    --------
    >>> from merge_distill.core.teacher import TopKPrediction
    >>> d = normalize_topk(TopKPrediction(0, [3, 7], [2.0, 0.0]))
    >>> [round(x, 4) for x in d.probs]
    [0.8808, 0.1192]
    """
    z = np.asarray(p.logits, dtype=np.float64)
    q = np.exp(z - z.max())
    return NormalizedTeacherDist(position=int(p.position), ids=p.ids,
                                 probs=q / q.sum(), teacher_id=teacher_id)


def _as_logits(logits):
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim == 1:
        z = z[None, :]
    if z.ndim != 2 or z.shape[0] < 1:
        raise ValidationError("logits must be (n, |v|) with n >= 1")
    return z


def l_mlm(logits, gold_ids, return_grad=False):
    """Gold-label MLM loss, ``-(1/n) sum_i log softmax(logits_i)[gold_i]``.

    Parameters
    ----------
    logits : Array
        Student logits, shape ``(n, |v|)``.
    gold_ids : Array
        Gold ids, one per row.
    return_grad : bool
        Also return d(loss)/d(logits).

    Returns
    -------
    float or tuple
        Loss, or ``(loss, grad)`` if *return_grad*.
    """
    z = _as_logits(logits)
    gold = np.asarray(gold_ids, dtype=np.int64).reshape(-1)
    n, V = z.shape
    if gold.size != n:
        raise ValidationError("one gold id per position is required")
    if gold.min() < 0 or gold.max() >= V:
        _LOGGER.error("l_mlm: gold id out of range [0, {}).".format(V))
        raise ValidationError("gold id out of range [0, {})".format(V))
    lp = log_softmax(z)
    loss = float(-lp[np.arange(n), gold].sum() / n)
    if not return_grad:
        return loss
    grad = np.exp(lp)
    grad[np.arange(n), gold] -= 1.0
    return loss, grad / n


def _dense_targets(dists, n, V):
    if len(dists) != n:
        _LOGGER.error("l_kd: {} teacher rows for {} positions.".format(
                      len(dists), n))
        raise ValidationError("teacher positions do not match logits")
    q = np.zeros((n, V))
    for i, d in enumerate(dists):
        if d.ids.min() < 0 or d.ids.max() >= V:
            _LOGGER.error("l_kd: teacher id out of student range.")
            raise ValidationError(
                "teacher id out of student range [0, {})".format(V))
        q[i, d.ids] = d.probs
    return q


def l_kd(logits, teacher, return_grad=False):
    """KD loss, ``-(1/n) sum_i sum_j Q_i(v_j) log softmax(logits_i)[v_j]``.

    The inner sum runs over the teacher support only.

    Parameters
    ----------
    logits : Array
        Student logits, shape ``(n, |v|)``.
    teacher : list of NormalizedTeacherDist
        One distribution per row, same order as *logits*.
    return_grad : bool
        Also return d(loss)/d(logits).
    """
    z = _as_logits(logits)
    n, V = z.shape
    q = _dense_targets(teacher, n, V)
    lp = log_softmax(z)
    loss = float(-(q * lp).sum() / n)
    if not return_grad:
        return loss
    grad = np.exp(lp) * q.sum(axis=1, keepdims=True) - q
    return loss, grad / n


def kl_divergence(logits, teacher):
    """Per-position ``KL(Q || p_student)`` over the teacher support."""
    z = _as_logits(logits)
    n, V = z.shape
    q = _dense_targets(teacher, n, V)
    lp = log_softmax(z)
    with np.errstate(divide='ignore', invalid='ignore'):
        t = np.where(q > 0, q * (np.log(q) - lp), 0.0)
    return np.maximum(t.sum(axis=1), 0.0)


def _check_lambda(lam):
    lam = float(lam)
    if not (0.0 <= lam <= 1.0):
        _LOGGER.error("lambda {} out of [0, 1].".format(lam))
        raise ValidationError("lambda must be in [0, 1], got {}".format(lam))
    return lam


def l_all(l_mlm_by_language, l_kd_by_language, lam):
    """Combine per-language losses, batch mean over languages.

    Parameters
    ----------
    l_mlm_by_language : dict
        Language to its MLM loss.
    l_kd_by_language : dict
        Language to the list of its KD losses, one per teacher; averaged
        before weighting.
    lam : float
        KD weight in [0, 1].

    Returns
    -------
    float
        ``mean_k [lam * mean(L_KD^k) + (1 - lam) * L_MLM^k]``.

    Examples
    --------
    >>> round(l_all({'en': 0.3567}, {'en': [0.9831]}, 0.5), 4)
    0.6699
    """
    lam = _check_lambda(lam)
    if not l_mlm_by_language:
        raise ValidationError("no language in batch")
    total = 0.0
    for lang, mlm in l_mlm_by_language.items():
        kds = list(l_kd_by_language.get(lang, ()))
        if kds:
            kd = sum(kds) / len(kds)
        elif lam > 0.0:
            _LOGGER.error("l_all: no KD term for {}.".format(lang))
            raise ValidationError("language {} has no KD term".format(lang))
        else:
            kd = 0.0
        total += lam * kd + (1.0 - lam) * mlm
    return total / len(l_mlm_by_language)


def _linear(step, total_steps, value):
    return 1.0 - step / total_steps


def _cosine(step, total_steps, value):
    return 0.5 * (1.0 + math.cos(math.pi * step / total_steps))


def _constant(step, total_steps, value):
    return value


LAMBDA_SCHEDULES = {
    'linear': _linear,
    'cosine': _cosine,
    'constant': _constant,
}


def lambda_at(step, total_steps, schedule='linear', value=1.0):
    """KD weight at *step*.

    Parameters
    ----------
    step : int
        Current step, ``0 <= step <= total_steps``.
    total_steps : int
        Run length, >= 1.
    schedule : str
        'linear' (``1 - step/total_steps``), 'cosine' or 'constant'.
    value : float
        Weight of the 'constant' schedule.

    Examples
    --------
    >>> lambda_at(50, 100)
    0.5
    """
    if schedule not in LAMBDA_SCHEDULES:
        raise ValidationError("unknown lambda schedule {!r}".format(schedule))
    if total_steps < 1 or not (0 <= step <= total_steps):
        _LOGGER.error("lambda_at: step {} out of [0, {}].".format(
                      step, total_steps))
        raise ValidationError("step {} out of range [0, {}]".format(
                              step, total_steps))
    return _check_lambda(LAMBDA_SCHEDULES[schedule](step, total_steps, value))


@dataclasses.dataclass
class LossBreakdown:
    """Loss terms of one batch.

    Attributes
    ----------
    gold_terms : list of Array
        Per example, ``-log p(gold)`` per masked position.
    kd_terms : list of Array
        Per example, per position cross-entropy to its teacher, None when
        the example has no teacher distribution.
    l_mlm : float
        Mean over languages of the per-language MLM loss.
    l_kd : dict
        Teacher id to the mean KD loss of its examples.
    l_kd_mean : float
        Mean over languages of the teacher-averaged KD loss.
    l_all : float
        Combined objective.
    lambda_used : float
        Effective KD weight.
    """
    gold_terms: list
    kd_terms: list
    l_mlm: float
    l_kd: dict
    l_kd_mean: float
    l_all: float
    lambda_used: float
    l_mlm_by_language: dict = dataclasses.field(default_factory=dict)
    l_kd_by_language: dict = dataclasses.field(default_factory=dict)

    def is_finite(self):
        return all(math.isfinite(x) for x in
                   [self.l_mlm, self.l_kd_mean, self.l_all] +
                   list(self.l_kd.values()))


def batch_objective(entries, logits, lam, use_teacher=True):
    """Objective and logit gradients of a batch.

    Examples are grouped by language; within a language the MLM loss is the
    example mean, the KD loss is the example mean per teacher averaged over
    the teachers present. Languages are then averaged.

    Parameters
    ----------
    entries : list
        Batch entries with ``example`` (MaskedExample, student ids) and
        ``dists`` (list of NormalizedTeacherDist or None).
    logits : list of Array
        Student logits, one ``(n, |v|)`` array per entry.
    lam : float
        KD weight from the schedule.
    use_teacher : bool
        False for gold-only training: the KD weight becomes 0, KD terms
        are still reported when available.

    Returns
    -------
    tuple
        ``(LossBreakdown, grads)`` with one d(l_all)/d(logits) array per
        entry.
    """
    lam = _check_lambda(lam)
    if len(entries) == 0 or len(entries) != len(logits):
        raise ValidationError("batch is empty or logits do not match")
    if use_teacher:
        missing = [e.example.example_id for e in entries if e.dists is None]
        if missing:
            _LOGGER.error("batch_objective: no teacher distribution for "
                          "examples {}.".format(missing[:5]))
            raise ValidationError("teacher distributions missing in "
                                  "gold_plus_teacher mode")
    kd_weight = lam if use_teacher else 0.0

    mlm_vals, mlm_grads, kd_vals, kd_grads = [], [], [], []
    gold_terms, kd_terms = [], []
    for e, z in zip(entries, logits):
        z = _as_logits(z)
        v, g = l_mlm(z, e.example.gold_ids, return_grad=True)
        mlm_vals.append(v)
        mlm_grads.append(g)
        lp = log_softmax(z)
        gold_terms.append(-lp[np.arange(z.shape[0]), e.example.gold_ids])
        if e.dists is not None:
            v, g = l_kd(z, e.dists, return_grad=True)
            q = _dense_targets(e.dists, *z.shape)
            kd_terms.append(-(q * lp).sum(axis=1))
        else:
            v, g = None, None
            kd_terms.append(None)
        kd_vals.append(v)
        kd_grads.append(g)

    langs = {}
    for i, e in enumerate(entries):
        langs.setdefault(e.example.language, []).append(i)
    L = len(langs)

    w_mlm = [0.0] * len(entries)
    w_kd = [0.0] * len(entries)
    mlm_by_lang, kd_by_lang = {}, {}
    for lang, idx in langs.items():
        mlm_by_lang[lang] = sum(mlm_vals[i] for i in idx) / len(idx)
        for i in idx:
            w_mlm[i] = (1.0 - kd_weight) / (L * len(idx))
        by_teacher = {}
        for i in idx:
            if kd_vals[i] is not None:
                by_teacher.setdefault(entries[i].example.teacher_id,
                                      []).append(i)
        if by_teacher:
            kd_by_lang[lang] = [sum(kd_vals[i] for i in ti) / len(ti)
                                for ti in by_teacher.values()]
            for ti in by_teacher.values():
                for i in ti:
                    w_kd[i] = kd_weight / (L * len(by_teacher) * len(ti))

    grads = []
    for i in range(len(entries)):
        d = w_mlm[i] * mlm_grads[i]
        if kd_grads[i] is not None:
            d = d + w_kd[i] * kd_grads[i]
        grads.append(d)

    teachers = {}
    for i, e in enumerate(entries):
        if kd_vals[i] is not None:
            teachers.setdefault(e.example.teacher_id, []).append(kd_vals[i])
    l_kd_teacher = {t: sum(v) / len(v) for t, v in sorted(teachers.items())}
    l_kd_lang = {k: sum(v) / len(v) for k, v in kd_by_lang.items()}
    l_mlm_mean = sum(mlm_by_lang.values()) / L
    l_kd_mean = sum(l_kd_lang.values()) / L if l_kd_lang else 0.0
    total = l_all(mlm_by_lang, kd_by_lang if kd_weight > 0 else {},
                  kd_weight)

    lb = LossBreakdown(gold_terms=gold_terms, kd_terms=kd_terms,
                       l_mlm=l_mlm_mean, l_kd=l_kd_teacher,
                       l_kd_mean=l_kd_mean, l_all=total,
                       lambda_used=kd_weight,
                       l_mlm_by_language=mlm_by_lang,
                       l_kd_by_language=l_kd_lang)
    return lb, grads
