#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Transfer corpora, smoothed language sampling and MLM masking.
"""

import dataclasses
import logging
import math

import numpy as np

from merge_distill.misc import ValidationError

_LOGGER = logging.getLogger(__name__)

MASK_TOKEN_PROB = 0.8
RANDOM_TOKEN_PROB = 0.1


def _frozen_ids(a):
    a = np.array(a, dtype=np.int64).reshape(-1)
    a.setflags(write=False)
    return a


@dataclasses.dataclass(frozen=True)
class LanguageCorpus:
    """Raw examples of one language.

    ``token_count`` counts whitespace tokens before any subword split, so
    sampling weights do not depend on the teachers' vocabularies.
    """
    language: str
    lines: tuple
    token_count: int = None

    def __post_init__(self):
        lines = tuple(self.lines)
        object.__setattr__(self, 'lines', lines)
        if self.token_count is None:
            object.__setattr__(self, 'token_count',
                               sum(len(l.split()) for l in lines))
        if lines and self.token_count <= 0:
            raise ValidationError(
                "corpus {} has lines but no tokens".format(self.language))

    def __len__(self):
        return len(self.lines)


@dataclasses.dataclass(frozen=True)
class SamplingConfig:
    """Exponential smoothing exponent and seed of the language sampler."""
    alpha: float = 0.7
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < float(self.alpha) <= 1.0):
            _LOGGER.error("SamplingConfig: alpha {} out of (0, 1].".format(
                          self.alpha))
            raise ValidationError(
                "alpha must be in (0, 1], got {}".format(self.alpha))


@dataclasses.dataclass(frozen=True, eq=False)
class MaskedExample:
    """One tokenized and masked copy of a raw example.

    Attributes
    ----------
    language : str
        Language tag.
    teacher_id : str
        Teacher whose vocabulary tokenized this copy.
    input_ids : Array
        Token ids with the masked positions corrupted.
    masked_positions : Array
        Strictly increasing positions of the masked tokens.
    gold_ids : Array
        Original ids at ``masked_positions``.
    example_id : int
        Index of the raw example in its corpus, shared by all copies.
    predictions : list of TopKPrediction
        Teacher top-k predictions, one per masked position, if evaluated.
    teacher_loss : float
        Teacher MLM loss on this copy, if evaluated.
    """
    language: str
    teacher_id: str
    input_ids: np.ndarray
    masked_positions: np.ndarray
    gold_ids: np.ndarray
    example_id: int = 0
    predictions: list = None
    teacher_loss: float = None

    def __post_init__(self):
        object.__setattr__(self, 'teacher_id', str(self.teacher_id))
        object.__setattr__(self, 'input_ids', _frozen_ids(self.input_ids))
        object.__setattr__(self, 'masked_positions',
                           _frozen_ids(self.masked_positions))
        object.__setattr__(self, 'gold_ids', _frozen_ids(self.gold_ids))
        if self.predictions is not None:
            object.__setattr__(self, 'predictions', list(self.predictions))
        pos = self.masked_positions
        if pos.size < 1:
            raise ValidationError("an example needs at least one mask")
        if np.any(np.diff(pos) <= 0):
            raise ValidationError("masked positions must strictly increase")
        if pos[0] < 0 or pos[-1] >= self.input_ids.size:
            raise ValidationError("masked position out of input range")
        if self.gold_ids.size != pos.size:
            raise ValidationError("one gold id per masked position required")
        if self.predictions is not None:
            if [p.position for p in self.predictions] != pos.tolist():
                raise ValidationError(
                    "prediction positions differ from masked positions")

    @property
    def n(self):
        """int: number of masked positions."""
        return int(self.masked_positions.size)

    def replace(self, **kws):
        return dataclasses.replace(self, **kws)

    def validate(self, v):
        """Check ids against vocabulary *v*, gold ids are never [MASK]."""
        if self.input_ids.size and self.input_ids.max() >= len(v):
            raise ValidationError("input id out of vocabulary range")
        if self.gold_ids.max() >= len(v) or self.gold_ids.min() < 0:
            raise ValidationError("gold id out of vocabulary range")
        if np.any(self.gold_ids == v.mask_id):
            raise ValidationError("gold id is the [MASK] id")

    def __eq__(self, other):
        if not isinstance(other, MaskedExample):
            return NotImplemented
        return (self.language == other.language and
                self.teacher_id == other.teacher_id and
                self.example_id == other.example_id and
                np.array_equal(self.input_ids, other.input_ids) and
                np.array_equal(self.masked_positions,
                               other.masked_positions) and
                np.array_equal(self.gold_ids, other.gold_ids) and
                self.teacher_loss == other.teacher_loss and
                self.predictions == other.predictions)

    __hash__ = None


def load_corpus(path, language):
    """Read a UTF-8 corpus, one example per line, blank lines skipped.

    Returns
    -------
    LanguageCorpus

    Raises
    ------
    ValidationError
        File is not UTF-8.
    """
    with open(path, 'rb') as f:
        raw = f.read()
    try:
        text = raw.decode('utf-8')
    except UnicodeDecodeError as e:
        _LOGGER.error("load_corpus: {} is not UTF-8.".format(path))
        raise ValidationError("{}: not UTF-8: {}".format(path, e))
    lines = [l.strip() for l in text.split('\n')]
    lines = [l for l in lines if l]
    _LOGGER.info("load_corpus: {}: {} lines from {}.".format(
                 language, len(lines), path))
    return LanguageCorpus(language, lines)


def compute_sampling_weights(corpora, cfg):
    """Exponentially smoothed language probabilities.

    ``q_k = p_k**alpha / sum_j p_j**alpha`` with ``p_k`` the token share of
    language ``k``; ``alpha < 1`` upsamples the tail languages.

    Parameters
    ----------
    corpora : list of LanguageCorpus
        One corpus per language.
    cfg : SamplingConfig
        Smoothing configuration.

    Returns
    -------
    dict
        Language tag to probability, in corpus order, sums to 1.

    Examples
    --------
    >>> c = [LanguageCorpus('a', (), 80), LanguageCorpus('b', (), 20)]
    >>> w = compute_sampling_weights(c, SamplingConfig(alpha=0.7))
    >>> [round(x, 4) for x in w.values()]
    [0.7252, 0.2748]
    """
    corpora = list(corpora)
    if not corpora:
        _LOGGER.error("compute_sampling_weights: no corpus.")
        raise ValidationError("at least one corpus is required")
    counts = np.array([c.token_count for c in corpora], dtype=np.float64)
    if np.any(counts < 0):
        raise ValidationError("negative token count")
    total = counts.sum()
    if total <= 0:
        _LOGGER.error("compute_sampling_weights: zero tokens in total.")
        raise ValidationError("total token count is zero")
    langs = [c.language for c in corpora]
    if len(set(langs)) != len(langs):
        raise ValidationError("duplicate language in corpus list")
    p = counts / total
    q = np.power(p, float(cfg.alpha))
    q = q / q.sum()
    return dict(zip(langs, q.tolist()))


def sample_language(weights, rng):
    """Draw one language from categorical *weights*.

    Parameters
    ----------
    weights : dict
        Language tag to probability.
    rng : numpy.random.Generator
        Generator; one uniform draw is consumed per call.

    Returns
    -------
    str
        Sampled language tag.
    """
    langs = list(weights)
    cdf = np.cumsum(np.asarray([weights[l] for l in langs], dtype=np.float64))
    u = rng.random() * cdf[-1]
    i = int(np.searchsorted(cdf, u, side='right'))
    return langs[min(i, len(langs) - 1)]


def mask_count(length, rate):
    """Number of positions to mask: ``max(1, floor(rate * length))``."""
    return min(length, max(1, int(math.floor(rate * length + 1e-9))))


def mask_example(ids, v, rate, rng, language='', teacher_id='', example_id=0):
    """BERT style masking of one tokenized example.

    ``max(1, floor(rate * len(ids)))`` positions are picked by a seeded
    shuffle. Each picked position becomes ``[MASK]`` with probability 0.8,
    a random non-special token with probability 0.1, and keeps its token
    otherwise.

    Parameters
    ----------
    ids : list of int
        Token ids, no ``[MASK]`` allowed.
    v : Vocabulary
        Vocabulary of *ids*.
    rate : float
        Masking rate in (0, 1).
    rng : numpy.random.Generator
        Random stream of this example.

    Returns
    -------
    MaskedExample

    Raises
    ------
    ValidationError
        Empty input, invalid rate, or *ids* already containing ``[MASK]``.
    """
    ids = np.asarray(ids, dtype=np.int64).reshape(-1)
    if ids.size == 0:
        _LOGGER.error("mask_example: empty input.")
        raise ValidationError("cannot mask an empty example")
    if not (0.0 < rate < 1.0):
        raise ValidationError("mask rate must be in (0, 1), got {}".format(
                              rate))
    if np.any(ids == v.mask_id):
        _LOGGER.error("mask_example: input already contains [MASK].")
        raise ValidationError("input already contains [MASK]")

    n = mask_count(ids.size, rate)
    positions = np.sort(rng.permutation(ids.size)[:n])
    candidates = v.non_special_ids()
    corrupted = ids.copy()
    for p in positions:
        r = rng.random()
        if r < MASK_TOKEN_PROB:
            corrupted[p] = v.mask_id
        elif r < MASK_TOKEN_PROB + RANDOM_TOKEN_PROB and candidates.size:
            corrupted[p] = candidates[rng.integers(candidates.size)]
    return MaskedExample(language=language, teacher_id=teacher_id,
                         input_ids=corrupted, masked_positions=positions,
                         gold_ids=ids[positions], example_id=example_id)
