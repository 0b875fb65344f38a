#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Teacher oracles, offline top-k evaluation, per-example teacher loss and
best-copy selection.
"""

import logging

import numpy as np

from merge_distill.misc import ValidationError
from merge_distill.misc import make_rng
from merge_distill.misc import derive_seed
from .corpus import mask_example
from .loss import l_mlm
from .loss import log_softmax
from .optim import SGD
from .student import backward
from .student import forward
from .student import forward_ids
from .student import init_params
from .vocab import tokenize

_LOGGER = logging.getLogger(__name__)


class TopKPrediction(object):
    """The k highest-logit teacher tokens at one masked position.

    Parameters
    ----------
    position : int
        Index into the input sequence.
    ids : array_like
        k distinct token ids.
    logits : array_like
        k logits, non-increasing, stored as float32.

    Examples
    --------
    >>> p = TopKPrediction(3, [4, 2], [3.0, 1.0])
    >>> p.k
    2
    """

    __slots__ = ('_position', '_ids', '_logits')

    def __init__(self, position, ids, logits):
        ids = np.array(ids, dtype=np.int64).reshape(-1)
        logits = np.array(logits, dtype=np.float32).reshape(-1)
        if ids.size < 1 or ids.size != logits.size:
            _LOGGER.error("TopKPrediction: {} ids, {} logits.".format(
                          ids.size, logits.size))
            raise ValidationError("need k >= 1 ids and k logits")
        if np.unique(ids).size != ids.size:
            raise ValidationError("top-k ids must be distinct")
        if np.any(logits[1:] > logits[:-1]):
            raise ValidationError("top-k logits must be non-increasing")
        ids.setflags(write=False)
        logits.setflags(write=False)
        self._position = int(position)
        self._ids = ids
        self._logits = logits

    @property
    def position(self):
        return self._position

    @property
    def ids(self):
        """Array: token ids, int64."""
        return self._ids

    @property
    def logits(self):
        """Array: logits, float32."""
        return self._logits

    @property
    def k(self):
        return int(self._ids.size)

    def with_ids(self, ids):
        """Same prediction with token ids replaced (e.g. remapped)."""
        return TopKPrediction(self._position, ids, self._logits)

    def __eq__(self, other):
        if not isinstance(other, TopKPrediction):
            return NotImplemented
        return (self._position == other._position and
                np.array_equal(self._ids, other._ids) and
                self._logits.tobytes() == other._logits.tobytes())

    __hash__ = None

    def __repr__(self):
        return "TopKPrediction(position={}, ids={}, logits={})".format(
            self._position, self._ids.tolist(), self._logits.tolist())


class TeacherOracle(object):
    """Base teacher: full logit vectors over its own vocabulary.

    Subclasses implement :meth:`predict`; parameters are read-only once
    built, so one oracle can serve concurrent workers.
    """

    kind = None

    def __init__(self, teacher_id, vocab):
        self._teacher_id = str(teacher_id)
        self._vocab = vocab

    @property
    def teacher_id(self):
        return self._teacher_id

    @property
    def vocab(self):
        return self._vocab

    def predict(self, input_ids, positions):
        """Logits of shape ``(len(positions), len(vocab))``."""
        raise NotImplementedError

    def __repr__(self):
        return "{}(teacher_id={!r}, vocab_size={})".format(
            self.__class__.__name__, self._teacher_id, len(self._vocab))


class LookupTableTeacher(TeacherOracle):
    """Teacher whose logits depend on the visible left neighbour only.

    Parameters
    ----------
    teacher_id : str
        Teacher identifier.
    vocab : Vocabulary
        Teacher vocabulary.
    table : Array
        ``(|V|, |V|)`` logits; row ``i`` is used when the token left of the
        masked position has id ``i``, the ``[CLS]`` row at position 0.
    """

    kind = 'table'

    def __init__(self, teacher_id, vocab, table):
        super(LookupTableTeacher, self).__init__(teacher_id, vocab)
        t = np.array(table, dtype=np.float64)
        V = len(vocab)
        if t.shape != (V, V):
            _LOGGER.error("LookupTableTeacher: table shape {} for |V|={}."
                          .format(t.shape, V))
            raise ValidationError("table must be ({0}, {0}), got {1}".format(
                                  V, t.shape))
        t.setflags(write=False)
        self._table = t

    @property
    def table(self):
        return self._table

    @classmethod
    def from_corpus(cls, teacher_id, vocab, lines, smoothing=1.0):
        """Add-*smoothing* bigram log-probabilities of tokenized *lines*."""
        if smoothing <= 0:
            raise ValidationError("smoothing must be > 0")
        V = len(vocab)
        counts = np.zeros((V, V))
        for line in lines:
            prev = vocab.cls_id
            for i in tokenize(line, vocab):
                counts[prev, i] += 1.0
                prev = i
        counts += smoothing
        table = np.log(counts) - np.log(counts.sum(axis=1, keepdims=True))
        _LOGGER.info("from_corpus: bigram teacher {} over {} lines.".format(
                     teacher_id, len(lines)))
        return cls(teacher_id, vocab, table)

    def predict(self, input_ids, positions):
        ids = np.asarray(input_ids, dtype=np.int64)
        pos = np.asarray(positions, dtype=np.int64)
        left = np.where(pos > 0, ids[np.maximum(pos - 1, 0)],
                        self._vocab.cls_id)
        return self._table[left]


class TinyMLMTeacher(TeacherOracle):
    """Teacher with the student architecture, trained on gold labels only.

    Parameters
    ----------
    teacher_id : str
        Teacher identifier.
    vocab : Vocabulary
        Teacher vocabulary.
    model : StudentModel
        Trained model over *vocab*.
    """

    kind = 'tiny_mlm'

    def __init__(self, teacher_id, vocab, model):
        super(TinyMLMTeacher, self).__init__(teacher_id, vocab)
        if model.vocab_size != len(vocab):
            raise ValidationError("model vocab size differs from vocab")
        self._model = model

    @property
    def model(self):
        return self._model

    @classmethod
    def train_on(cls, teacher_id, vocab, lines, dim=16, window=2, steps=500,
                 learning_rate=0.5, mask_rate=0.15, seed=0):
        """Train a tiny MLM on *lines* with the gold-label loss.

        Each step masks one randomly drawn line and takes one SGD step.
        """
        seqs = [s for s in (tokenize(l, vocab) for l in lines) if s]
        if not seqs:
            _LOGGER.error("train_on: no tokenizable line for {}.".format(
                          teacher_id))
            raise ValidationError("teacher {} has no training data".format(
                                  teacher_id))
        model = init_params(len(vocab), dim,
                            derive_seed(seed, 'tiny_mlm_init', teacher_id),
                            window=window, vocab_checksum=vocab.checksum)
        rng = make_rng(seed, 'tiny_mlm', teacher_id)
        opt = SGD(learning_rate)
        loss = float('nan')
        for _ in range(int(steps)):
            ids = seqs[int(rng.integers(len(seqs)))]
            ex = mask_example(ids, vocab, mask_rate, rng)
            logits, cache = forward(model, ex)
            loss, g = l_mlm(logits, ex.gold_ids, return_grad=True)
            opt.step(model.params, backward(model, cache, g))
        _LOGGER.info("train_on: teacher {} trained {} steps, last loss {:.4f}"
                     .format(teacher_id, steps, loss))
        return cls(teacher_id, vocab, model)

    def predict(self, input_ids, positions):
        return forward_ids(self._model, input_ids, positions)[0]


def _checked_logits(t, ex):
    if ex.teacher_id != t.teacher_id:
        _LOGGER.error("evaluate: example of {} given to teacher {}.".format(
                      ex.teacher_id, t.teacher_id))
        raise ValidationError("teacher mismatch: {} != {}".format(
                              ex.teacher_id, t.teacher_id))
    pos = ex.masked_positions
    if pos.size and (pos.min() < 0 or pos.max() >= ex.input_ids.size):
        raise ValidationError("masked position out of range")
    z = np.asarray(t.predict(ex.input_ids, pos), dtype=np.float64)
    if z.shape != (pos.size, len(t.vocab)):
        _LOGGER.error("evaluate: oracle {} returned shape {}.".format(
                      t.teacher_id, z.shape))
        raise ValidationError("oracle returned logits of shape {}".format(
                              z.shape))
    return z


def clamp_k(k, vocab_size, teacher_id=''):
    """*k* clamped to the teacher vocabulary size, warning when clamped."""
    k = int(k)
    if k < 1:
        raise ValidationError("k must be >= 1, got {}".format(k))
    if k > vocab_size:
        _LOGGER.warning("evaluate_masked: k={} exceeds vocab size {} of "
                        "teacher {}, clamped.".format(k, vocab_size,
                                                      teacher_id))
        k = vocab_size
    return k


def _topk(z, position, k):
    # rank on the oracle's float64 logits, store float32
    order = np.lexsort((np.arange(z.size), -z))[:k]
    return TopKPrediction(position, order, z[order].astype(np.float32))


def evaluate_masked(t, ex, k):
    """Top-k teacher predictions at every masked position.

    Parameters
    ----------
    t : TeacherOracle
        Teacher of ``ex.teacher_id``.
    ex : MaskedExample
        Example in teacher ids.
    k : int
        Number of predictions kept, clamped to the teacher vocab size.

    Returns
    -------
    list of TopKPrediction
        Ordered by descending oracle logit, ties by lower token id.

    See Also
    --------
    teacher_example_loss, evaluate_example
    """
    z = _checked_logits(t, ex)
    k = clamp_k(k, z.shape[1], t.teacher_id)
    return [_topk(row, int(p), k) for row, p in zip(z, ex.masked_positions)]


def _example_loss(z, gold):
    lp = log_softmax(z)
    return float(-lp[np.arange(gold.size), gold].mean())


def teacher_example_loss(t, ex):
    """Teacher MLM loss of one copy, full-vocab softmax.

    ``(1/n) sum_i -log softmax(teacher_logits_i)[gold_i]``
    """
    return _example_loss(_checked_logits(t, ex), ex.gold_ids)


def evaluate_example(t, ex, k):
    """Attach top-k predictions and the teacher loss to *ex*.

    Logits are computed once for both.
    """
    z = _checked_logits(t, ex)
    k = clamp_k(k, z.shape[1], t.teacher_id)
    preds = [_topk(row, int(p), k) for row, p in zip(z, ex.masked_positions)]
    return ex.replace(predictions=preds,
                      teacher_loss=_example_loss(z, ex.gold_ids))


def select_best_copy(copies, teacher_order=None):
    """Copy with the minimum teacher loss.

    Ties go to the teacher listed first in *teacher_order*, then to the
    lexicographically lower teacher id (``'10' < '2'``).

    Parameters
    ----------
    copies : list
        ``(MaskedExample, loss)`` tuples, or examples carrying
        ``teacher_loss``; all copies of one raw example.
    teacher_order : list of str
        Teacher ids in manifest order.

    Returns
    -------
    MaskedExample
    """
    items = []
    for c in copies:
        if isinstance(c, tuple):
            ex, loss = c
        else:
            ex, loss = c, c.teacher_loss
        if loss is None:
            raise ValidationError("copy of teacher {} has no teacher loss"
                                  .format(ex.teacher_id))
        items.append((float(loss), ex.teacher_id, ex))
    if not items:
        _LOGGER.error("select_best_copy: no copy given.")
        raise ValidationError("select_best_copy needs at least one copy")
    keys = {(ex.language, ex.example_id) for _, _, ex in items}
    if len(keys) > 1:
        raise ValidationError("copies belong to different raw examples")
    rank = {t: i for i, t in enumerate(teacher_order or ())}
    return min(items, key=lambda x: (x[0], rank.get(x[1], len(rank)),
                                     x[1]))[2]


ORACLE_TYPES = ('bigram', 'table', 'tiny_mlm')


def build_oracle(spec, teacher_id, vocab, lines=(), seed=0):
    """Build a teacher oracle from a manifest oracle spec.

    Parameters
    ----------
    spec : dict
        ``type`` is one of 'bigram' (``smoothing``), 'table' (``table``,
        path of a ``.npy`` file) or 'tiny_mlm' (``dim``, ``window``,
        ``steps``, ``learning_rate``, ``mask_rate``).
    teacher_id : str
        Teacher identifier.
    vocab : Vocabulary
        Teacher vocabulary.
    lines : list of str
        Teacher training text for 'bigram' and 'tiny_mlm'.
    seed : int
        Seed of 'tiny_mlm' training.

    Returns
    -------
    TeacherOracle
    """
    kind = spec.get('type', 'bigram')
    if kind == 'bigram':
        return LookupTableTeacher.from_corpus(
            teacher_id, vocab, lines, smoothing=float(spec.get('smoothing',
                                                               1.0)))
    if kind == 'table':
        return LookupTableTeacher(teacher_id, vocab, np.load(spec['table']))
    if kind == 'tiny_mlm':
        kws = {k: spec[k] for k in ('dim', 'window', 'steps',
                                    'learning_rate', 'mask_rate')
               if k in spec}
        return TinyMLMTeacher.train_on(teacher_id, vocab, lines, seed=seed,
                                       **kws)
    _LOGGER.error("build_oracle: unknown oracle type {!r}.".format(kind))
    raise ValidationError("unknown oracle type {!r}, expected one of {}"
                          .format(kind, ', '.join(ORACLE_TYPES)))
