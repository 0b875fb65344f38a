# -*- coding: utf-8 -*-

"""Student checkpoint files.

Layout (little-endian)::

    magic          4 bytes   b'MDCK'
    version        u16
    vocab_size     u32
    dim            u32
    window         u32
    vocab checksum 32 bytes  (raw sha256, zeros if unknown)
    parameters     f32 blob: embedding, context, mixing, mixing_bias,
                   output_bias, each C order
"""

import logging
import struct

import numpy as np

from merge_distill.core.student import StudentModel
from merge_distill.core.student import PARAM_NAMES
from merge_distill.misc import IntegrityError
from .atomic import atomic_write

_LOGGER = logging.getLogger(__name__)

MAGIC = b'MDCK'
VERSION = 1
_HEAD = struct.Struct('<4sHIII32s')


def checkpoint_to_bytes(m):
    digest = bytes.fromhex(m.vocab_checksum) if m.vocab_checksum \
        else b'\x00' * 32
    head = _HEAD.pack(MAGIC, VERSION, m.vocab_size, m.dim, m.window, digest)
    blob = b''.join(np.asarray(m.params[k], dtype='<f4').tobytes()
                    for k in PARAM_NAMES)
    return head + blob


def save_checkpoint(m, path):
    """Write student *m* to *path*, parameters rounded to float32."""
    atomic_write(path, checkpoint_to_bytes(m))
    _LOGGER.info("save_checkpoint: {} parameters to {}.".format(
                 m.num_params, path))
    return path


def load_checkpoint(path, expected_checksum=None):
    """Read a checkpoint file.

    Parameters
    ----------
    path : str
        Checkpoint file.
    expected_checksum : str
        Student vocab checksum the checkpoint must carry.

    Returns
    -------
    StudentModel

    Raises
    ------
    IntegrityError
        Bad magic or version, size mismatch, or vocab checksum mismatch.
    """
    with open(path, 'rb') as f:
        data = f.read()
    if len(data) < _HEAD.size:
        raise IntegrityError("{}: truncated checkpoint".format(path))
    magic, version, V, d, w, digest = _HEAD.unpack_from(data, 0)
    if magic != MAGIC:
        raise IntegrityError("{}: not a checkpoint file".format(path))
    if version != VERSION:
        _LOGGER.error("load_checkpoint: {} has version {}.".format(
                      path, version))
        raise IntegrityError("{}: unsupported checkpoint version {}".format(
                             path, version))
    checksum = None if digest == b'\x00' * 32 else digest.hex()
    if expected_checksum is not None and checksum != expected_checksum:
        _LOGGER.error("load_checkpoint: vocab checksum mismatch in {}."
                      .format(path))
        raise IntegrityError("{}: vocab checksum mismatch".format(path))
    m = StudentModel(V, d, w, vocab_checksum=checksum)
    shapes = m.param_shapes()
    n = sum(int(np.prod(shapes[k])) for k in PARAM_NAMES)
    if len(data) != _HEAD.size + 4 * n:
        _LOGGER.error("load_checkpoint: {} has {} bytes, expected {}.".format(
                      path, len(data), _HEAD.size + 4 * n))
        raise IntegrityError("{}: parameter blob size mismatch".format(path))
    flat = np.frombuffer(data, dtype='<f4', offset=_HEAD.size)
    off = 0
    for k in PARAM_NAMES:
        size = int(np.prod(shapes[k]))
        m.params[k][...] = flat[off:off + size].reshape(shapes[k])
        off += size
    return m
