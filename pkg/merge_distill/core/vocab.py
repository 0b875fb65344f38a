#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""WordPiece vocabularies, greedy tokenization, union vocabulary and
teacher to student index maps.
"""

import hashlib
import logging

import numpy as np

from merge_distill.misc import ValidationError

_LOGGER = logging.getLogger(__name__)

PAD, UNK, CLS, SEP, MASK = '[PAD]', '[UNK]', '[CLS]', '[SEP]', '[MASK]'
SPECIAL_TOKENS = (PAD, UNK, CLS, SEP, MASK)
CONTINUATION_PREFIX = '##'
MAX_WORD_CHARS = 100


class Vocabulary(object):
    """Token table, token id is the index in *tokens*.

    Parameters
    ----------
    tokens : list of str
        Unique token strings, id = position.
    continuation_prefix : str
        Marker for word-internal pieces, '##' by default.

    Notes
    -----
    Instances are read-only after construction and can be shared between
    workers.

    Examples
    --------
    >>> v = Vocabulary(['[PAD]', '[UNK]', '[CLS]', '[SEP]', '[MASK]', 'a'])
    >>> v.token_to_id('a')
    5
    >>> v.mask_id
    4
    """

    def __init__(self, tokens, continuation_prefix=CONTINUATION_PREFIX):
        tokens = tuple(tokens)
        if len(tokens) == 0:
            _LOGGER.error("Vocabulary: empty token list.")
            raise ValidationError("empty vocabulary")
        index = {}
        for i, t in enumerate(tokens):
            if not isinstance(t, str) or t == '':
                raise ValidationError(
                    "invalid token at id {}: {!r}".format(i, t))
            if t in index:
                _LOGGER.error("Vocabulary: duplicate token {!r}.".format(t))
                raise ValidationError(
                    "duplicate token {!r} at ids {} and {}".format(
                        t, index[t], i))
            index[t] = i
        missing = [s for s in SPECIAL_TOKENS if s not in index]
        if missing:
            _LOGGER.error("Vocabulary: missing special token(s) {}.".format(
                          missing))
            raise ValidationError(
                "missing special token(s): {}".format(', '.join(missing)))
        if not continuation_prefix:
            raise ValidationError("empty continuation prefix")
        self._tokens = tokens
        self._index = index
        self._prefix = continuation_prefix
        self._special_ids = {s: index[s] for s in SPECIAL_TOKENS}
        self._checksum = None

    def __len__(self):
        return len(self._tokens)

    def __contains__(self, token):
        return token in self._index

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and \
            self._tokens == other._tokens and self._prefix == other._prefix

    def __hash__(self):
        return hash((self._tokens, self._prefix))

    def __repr__(self):
        return "Vocabulary(size={}, checksum={})".format(
            len(self), self.checksum[:12])

    @property
    def tokens(self):
        """tuple of str: token strings in id order."""
        return self._tokens

    @property
    def continuation_prefix(self):
        """str: marker of word-internal pieces."""
        return self._prefix

    @property
    def special_ids(self):
        """dict: special token string to id."""
        return dict(self._special_ids)

    @property
    def pad_id(self):
        return self._special_ids[PAD]

    @property
    def unk_id(self):
        return self._special_ids[UNK]

    @property
    def cls_id(self):
        return self._special_ids[CLS]

    @property
    def sep_id(self):
        return self._special_ids[SEP]

    @property
    def mask_id(self):
        return self._special_ids[MASK]

    @property
    def checksum(self):
        """str: sha256 hex digest of the canonical vocab file bytes."""
        if self._checksum is None:
            self._checksum = hashlib.sha256(self.to_bytes()).hexdigest()
        return self._checksum

    def to_bytes(self):
        """Canonical file content, one token per line, LF terminated."""
        return ''.join(t + '\n' for t in self._tokens).encode('utf-8')

    def token_to_id(self, token, default=None):
        return self._index.get(token, default)

    def id_to_token(self, i):
        return self._tokens[i]

    def is_special(self, i):
        return i in self._special_ids.values()

    def non_special_ids(self):
        """Array of ids that are not special tokens, ascending."""
        sp = set(self._special_ids.values())
        return np.array([i for i in range(len(self)) if i not in sp],
                        dtype=np.int64)


def _tokenize_word(word, v):
    if len(word) > MAX_WORD_CHARS:
        return [v.unk_id]
    prefix = v.continuation_prefix
    pieces = []
    start = 0
    while start < len(word):
        end = len(word)
        cur = None
        while start < end:
            sub = word[start:end]
            if start > 0:
                sub = prefix + sub
            i = v.token_to_id(sub)
            if i is not None:
                cur = i
                break
            end -= 1
        if cur is None:
            return [v.unk_id]
        pieces.append(cur)
        start = end
    return pieces


def tokenize(text, v):
    """Greedy longest-match-first WordPiece segmentation.

    Parameters
    ----------
    text : str
        Input text, split on whitespace into words.
    v : Vocabulary
        Vocabulary to segment with.

    Returns
    -------
    list of int
        Token ids. A word without a full segmentation, or longer than 100
        characters, becomes a single ``[UNK]``.

    Examples
    --------
    >>> v = Vocabulary(list(SPECIAL_TOKENS) + ['hug', '##s', 'h'])
    >>> [v.id_to_token(i) for i in tokenize('hugs', v)]
    ['hug', '##s']
    """
    ids = []
    for word in text.split():
        ids.extend(_tokenize_word(word, v))
    return ids


def detokenize(ids, v):
    """Join token ids back to text.

    Continuation pieces are glued to the previous piece with the prefix
    stripped; other pieces start a new whitespace separated word.
    """
    prefix = v.continuation_prefix
    words = []
    for i in ids:
        t = v.id_to_token(int(i))
        if t.startswith(prefix) and words:
            words[-1] += t[len(prefix):]
        else:
            words.append(t)
    return ' '.join(words)


class VocabMapping(object):
    """Total, string-preserving map from one teacher's ids to student ids.

    Parameters
    ----------
    teacher_id : str
        Teacher the map belongs to.
    mapping : array_like of int
        ``mapping[i]`` is the student id of teacher token id ``i``.
    """

    def __init__(self, teacher_id, mapping):
        m = np.asarray(mapping, dtype=np.int64)
        if m.ndim != 1:
            raise ValidationError("mapping must be one dimensional")
        if m.size and m.min() < 0:
            raise ValidationError("negative student id in mapping")
        if np.unique(m).size != m.size:
            _LOGGER.error("VocabMapping: {} is not injective.".format(
                          teacher_id))
            raise ValidationError(
                "mapping of teacher {} is not injective".format(teacher_id))
        m.setflags(write=False)
        self._teacher_id = str(teacher_id)
        self._map = m

    def __len__(self):
        return self._map.size

    def __repr__(self):
        return "VocabMapping(teacher_id={!r}, size={})".format(
            self._teacher_id, len(self))

    @property
    def teacher_id(self):
        return self._teacher_id

    @property
    def map(self):
        """Array: student id indexed by teacher id, read-only."""
        return self._map

    def is_identity(self):
        return bool(np.array_equal(self._map, np.arange(self._map.size)))

    def apply(self, ids):
        """Map an array of teacher ids to student ids."""
        a = np.asarray(ids, dtype=np.int64)
        if a.size and (a.min() < 0 or a.max() >= self._map.size):
            _LOGGER.error("VocabMapping: id out of range for {}.".format(
                          self._teacher_id))
            raise ValidationError(
                "teacher id out of range [0, {}) for teacher {}".format(
                    self._map.size, self._teacher_id))
        return self._map[a]


def build_union_vocab(teachers, teacher_ids=None):
    """Build the student vocabulary as the union of teacher vocabularies.

    Parameters
    ----------
    teachers : list of Vocabulary
        Teacher vocabularies, in teacher order.
    teacher_ids : list of str
        Teacher identifiers, ``'0', '1', ...`` if not set.

    Returns
    -------
    tuple
        Tuple of ``(student, mappings)``: the student ``Vocabulary`` with
        the special tokens pinned first, then teacher tokens in (teacher
        order, teacher id order) with duplicates dropped, and one
        ``VocabMapping`` per teacher.

    Notes
    -----
    Identical strings of different teachers share a single student id.
    The construction is deterministic, the same inputs give a byte
    identical student vocab file.
    """
    teachers = list(teachers)
    if not teachers:
        _LOGGER.error("build_union_vocab: no teacher vocabulary.")
        raise ValidationError("at least one teacher vocabulary is required")
    if teacher_ids is None:
        teacher_ids = [str(i) for i in range(len(teachers))]
    teacher_ids = [str(t) for t in teacher_ids]
    if len(teacher_ids) != len(teachers):
        raise ValidationError("one teacher id per vocabulary is required")
    if len(set(teacher_ids)) != len(teacher_ids):
        raise ValidationError("duplicate teacher id")

    prefixes = {t.continuation_prefix for t in teachers}
    if len(prefixes) > 1:
        _LOGGER.error("build_union_vocab: conflicting prefixes {}.".format(
                      sorted(prefixes)))
        raise ValidationError(
            "conflicting continuation prefixes: {}".format(sorted(prefixes)))

    tokens = list(SPECIAL_TOKENS)
    index = {t: i for i, t in enumerate(tokens)}
    for t in teachers:
        for tok in t.tokens:
            if tok not in index:
                index[tok] = len(tokens)
                tokens.append(tok)

    student = Vocabulary(tokens, continuation_prefix=prefixes.pop())
    mappings = [VocabMapping(tid, [index[tok] for tok in t.tokens])
                for tid, t in zip(teacher_ids, teachers)]
    _LOGGER.info("build_union_vocab: {} teachers, {} student tokens.".format(
                 len(teachers), len(student)))
    return student, mappings


def map_example(ex, m):
    """Remap a teacher-space example (and its predictions) to student ids.

    Parameters
    ----------
    ex : MaskedExample
        Example in the ids of teacher ``ex.teacher_id``.
    m : VocabMapping
        Map of the same teacher.

    Returns
    -------
    MaskedExample
        New example with input, gold and prediction ids mapped; positions,
        language, losses and logits unchanged.

    Raises
    ------
    ValidationError
        Teacher mismatch, or an id outside the teacher vocabulary.
    """
    if ex.teacher_id != m.teacher_id:
        _LOGGER.error("map_example: teacher mismatch {} != {}.".format(
                      ex.teacher_id, m.teacher_id))
        raise ValidationError("example of teacher {} cannot be mapped with "
                              "the map of teacher {}".format(
                                  ex.teacher_id, m.teacher_id))
    predictions = None
    if ex.predictions is not None:
        predictions = [p.with_ids(m.apply(p.ids)) for p in ex.predictions]
    return ex.replace(input_ids=m.apply(ex.input_ids),
                      gold_ids=m.apply(ex.gold_ids),
                      predictions=predictions)
