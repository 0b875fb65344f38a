# -*- coding: utf-8 -*-

"""Vocabulary and teacher to student mapping files.

Vocab file: UTF-8, one token per line, LF terminated, id = line number.
Mapping file: ``teacher_id<TAB>student_id`` per line, sorted by teacher id.
"""

import logging

from merge_distill.core.vocab import Vocabulary
from merge_distill.core.vocab import VocabMapping
from merge_distill.misc import ValidationError
from .atomic import atomic_write

_LOGGER = logging.getLogger(__name__)


def load_vocab(path, continuation_prefix='##'):
    """Read a vocabulary file.

    Parameters
    ----------
    path : str
        Vocab file path.
    continuation_prefix : str
        Word-internal piece marker.

    Returns
    -------
    Vocabulary
        Token id is the zero-based line number.

    Raises
    ------
    ValidationError
        Empty file, duplicate token, or missing special token.
    """
    with open(path, 'rb') as f:
        raw = f.read()
    try:
        text = raw.decode('utf-8')
    except UnicodeDecodeError as e:
        _LOGGER.error("load_vocab: {} is not UTF-8.".format(path))
        raise ValidationError("{}: not UTF-8: {}".format(path, e))
    if text.endswith('\n'):
        text = text[:-1]
    if text == '':
        _LOGGER.error("load_vocab: {} is empty.".format(path))
        raise ValidationError("{}: empty vocabulary file".format(path))
    tokens = [t.rstrip('\r') for t in text.split('\n')]
    try:
        v = Vocabulary(tokens, continuation_prefix=continuation_prefix)
    except ValidationError as e:
        raise ValidationError("{}: {}".format(path, e))
    _LOGGER.info("load_vocab: {} tokens from {}.".format(len(v), path))
    return v


def save_vocab(v, path):
    """Write *v* in the canonical vocab file format."""
    return atomic_write(path, v.to_bytes())


def save_mapping(m, path):
    lines = ''.join('{}\t{}\n'.format(i, s) for i, s in enumerate(m.map))
    return atomic_write(path, lines.encode('utf-8'))


def load_mapping(path, teacher_id):
    """Read a mapping file of *teacher_id*.

    Returns
    -------
    VocabMapping
    """
    with open(path, 'rb') as f:
        raw = f.read()
    try:
        text = raw.decode('utf-8')
    except UnicodeDecodeError as e:
        _LOGGER.error("load_mapping: {} is not UTF-8.".format(path))
        raise ValidationError("{}: not UTF-8: {}".format(path, e))
    student = []
    for n, line in enumerate(text.split('\n')):
        line = line.rstrip('\r')
        if not line:
            continue
        try:
            t, s = (int(x) for x in line.split('\t'))
        except ValueError:
            _LOGGER.error("load_mapping: bad line {} in {}.".format(
                          n + 1, path))
            raise ValidationError("{}:{}: expected two integer columns"
                                  .format(path, n + 1))
        if t != len(student):
            raise ValidationError("{}:{}: teacher ids must be 0..n-1 in "
                                  "order".format(path, n + 1))
        student.append(s)
    return VocabMapping(teacher_id, student)
