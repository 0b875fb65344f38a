#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Binary store of offline teacher predictions.

All integers and floats are little-endian.

Header::

    magic          4 bytes   b'MDSH'
    version        u16
    teacher_id     u16 length + UTF-8 bytes
    k              u32
    vocab checksum 32 bytes  (raw sha256 of the student vocab file)
    record count   u32
    header crc     u32       (CRC32 of all preceding header bytes)

Record, repeated ``record count`` times::

    length         u32       (bytes of the record after this field)
    example_id     u64
    language       u16 length + UTF-8 bytes
    teacher_loss   f64       (NaN if not evaluated)
    input          u32 L + L * u32 token ids
    masks          u32 n + n * u32 positions + n * u32 gold ids
    predictions    n * (k * u32 ids + k * f32 logits)

Records are length-prefixed so they can be streamed without an index.
"""

import dataclasses
import logging
import math
import os
import struct
import zlib

import numpy as np

from merge_distill.core.corpus import MaskedExample
from merge_distill.core.teacher import TopKPrediction
from merge_distill.misc import IntegrityError
from merge_distill.misc import ValidationError
from .atomic import atomic_write

_LOGGER = logging.getLogger(__name__)

MAGIC = b'MDSH'
VERSION = 1
SHARD_SUFFIX = '.mdsh'

_PREFIX = struct.Struct('<4sHH')
_TAIL = struct.Struct('<I32sI')
_U32 = struct.Struct('<I')
_REC_HEAD = struct.Struct('<QH')
_F64 = struct.Struct('<d')
_U32_MAX = 0xFFFFFFFF


@dataclasses.dataclass(frozen=True)
class ShardHeader:
    teacher_id: str
    k: int
    vocab_checksum: str
    count: int
    version: int = VERSION
    size: int = 0


@dataclasses.dataclass
class PredictionShard:
    """Top-k teacher predictions of one (split, language, teacher) slice.

    Attributes
    ----------
    teacher_id : str
        Teacher of every record.
    k : int
        Predictions stored per masked position.
    vocab_checksum : str
        Hex sha256 of the student vocabulary the ids refer to.
    records : list of MaskedExample
        Examples with ``predictions`` and ``teacher_loss`` attached.
    """
    teacher_id: str
    k: int
    vocab_checksum: str
    records: list = dataclasses.field(default_factory=list)
    version: int = VERSION

    def __len__(self):
        return len(self.records)

    def __eq__(self, other):
        if not isinstance(other, PredictionShard):
            return NotImplemented
        return (self.teacher_id == other.teacher_id and self.k == other.k
                and self.vocab_checksum == other.vocab_checksum
                and self.version == other.version
                and list(self.records) == list(other.records))


def _u32_array(a, what):
    a = np.asarray(a, dtype=np.int64)
    if a.size and (a.min() < 0 or a.max() > _U32_MAX):
        raise ValidationError("{} does not fit in u32".format(what))
    return a.astype('<u4').tobytes()


def _str_bytes(s, what):
    b = s.encode('utf-8')
    if len(b) > 0xFFFF:
        raise ValidationError("{} longer than 65535 bytes".format(what))
    return b


def encode_header(teacher_id, k, vocab_checksum, count, version=VERSION):
    tid = _str_bytes(teacher_id, 'teacher_id')
    try:
        digest = bytes.fromhex(vocab_checksum)
    except (TypeError, ValueError):
        digest = b''
    if len(digest) != 32:
        _LOGGER.error("encode_header: invalid vocab checksum {!r}.".format(
                      vocab_checksum))
        raise ValidationError("vocab checksum must be 64 hex characters")
    h = _PREFIX.pack(MAGIC, version, len(tid)) + tid + \
        _TAIL.pack(int(k), digest, int(count))
    return h + _U32.pack(zlib.crc32(h))


def encode_record(ex, k):
    """Serialize one example with its predictions."""
    if ex.predictions is None:
        _LOGGER.error("encode_record: example {} has no predictions.".format(
                      ex.example_id))
        raise ValidationError("example {} has no predictions".format(
                              ex.example_id))
    lang = _str_bytes(ex.language, 'language')
    loss = float('nan') if ex.teacher_loss is None else float(ex.teacher_loss)
    parts = [_REC_HEAD.pack(int(ex.example_id), len(lang)), lang,
             _F64.pack(loss),
             _U32.pack(ex.input_ids.size), _u32_array(ex.input_ids, 'input'),
             _U32.pack(ex.n), _u32_array(ex.masked_positions, 'positions'),
             _u32_array(ex.gold_ids, 'gold ids')]
    for p in ex.predictions:
        if p.k != k:
            raise ValidationError("prediction with k={} in a k={} shard"
                                  .format(p.k, k))
        parts.append(_u32_array(p.ids, 'prediction ids'))
        parts.append(np.asarray(p.logits, dtype='<f4').tobytes())
    body = b''.join(parts)
    return _U32.pack(len(body)) + body


def shard_to_bytes(shard):
    """Full file content of *shard*."""
    body = b''.join(encode_record(ex, shard.k) for ex in shard.records)
    return encode_header(shard.teacher_id, shard.k, shard.vocab_checksum,
                         len(shard.records), shard.version) + body


def write_shard(shard, path):
    """Write *shard* to *path* through a temporary file.

    Parameters
    ----------
    shard : PredictionShard
        Records and header fields.
    path : str
        Output file, ``.mdsh`` by convention.
    """
    data = shard_to_bytes(shard)
    atomic_write(path, data)
    _LOGGER.debug("write_shard: {} records, {} bytes to {}.".format(
                  len(shard.records), len(data), path))
    return path


def _read_exact(f, n, path, what):
    b = f.read(n)
    if len(b) != n:
        _LOGGER.error("read_shard: {} truncated in {}.".format(path, what))
        raise IntegrityError("{}: truncated file ({})".format(path, what))
    return b


def read_header(f, path='<stream>', expected_checksum=None):
    """Parse and verify a shard header from binary stream *f*.

    Returns
    -------
    ShardHeader

    Raises
    ------
    IntegrityError
        Bad magic, header CRC, version, or vocab checksum mismatch.
    """
    prefix = _read_exact(f, _PREFIX.size, path, 'header')
    magic, version, tlen = _PREFIX.unpack(prefix)
    rest = f.read(tlen + _TAIL.size + _U32.size)
    if len(rest) != tlen + _TAIL.size + _U32.size:
        if magic != MAGIC:
            raise IntegrityError("{}: not a shard file".format(path))
        raise IntegrityError("{}: truncated file (header)".format(path))
    h = prefix + rest[:-_U32.size]
    crc, = _U32.unpack(rest[-_U32.size:])
    if zlib.crc32(h) != crc:
        _LOGGER.error("read_shard: header checksum mismatch in {}.".format(
                      path))
        raise IntegrityError("{}: header checksum mismatch".format(path))
    if magic != MAGIC:
        raise IntegrityError("{}: not a shard file".format(path))
    if version != VERSION:
        _LOGGER.error("read_shard: {} has version {}, expected {}.".format(
                      path, version, VERSION))
        raise IntegrityError("{}: unsupported shard version {}".format(
                             path, version))
    try:
        teacher_id = rest[:tlen].decode('utf-8')
    except UnicodeDecodeError:
        raise IntegrityError("{}: teacher id is not UTF-8".format(path))
    k, digest, count = _TAIL.unpack(rest[tlen:tlen + _TAIL.size])
    header = ShardHeader(teacher_id=teacher_id, k=k,
                         vocab_checksum=digest.hex(), count=count,
                         version=version, size=len(h) + _U32.size)
    if expected_checksum is not None and \
            header.vocab_checksum != expected_checksum:
        _LOGGER.error("read_shard: vocab checksum mismatch in {}.".format(
                      path))
        raise IntegrityError("{}: vocab checksum {} does not match {}".format(
                             path, header.vocab_checksum[:12],
                             expected_checksum[:12]))
    return header


def decode_record(body, header):
    """Rebuild one example from record bytes (without the length field)."""
    off = 0
    example_id, llen = _REC_HEAD.unpack_from(body, off)
    off += _REC_HEAD.size
    language = bytes(body[off:off + llen]).decode('utf-8')
    off += llen
    loss, = _F64.unpack_from(body, off)
    off += _F64.size

    def u32s(count):
        nonlocal off
        a = np.frombuffer(body, dtype='<u4', count=count, offset=off)
        off += 4 * count
        return a

    L, = _U32.unpack_from(body, off)
    off += 4
    input_ids = u32s(L)
    n, = _U32.unpack_from(body, off)
    off += 4
    positions = u32s(n)
    gold = u32s(n)
    k = header.k
    preds = []
    for p in positions:
        ids = u32s(k)
        logits = np.frombuffer(body, dtype='<f4', count=k, offset=off)
        off += 4 * k
        preds.append(TopKPrediction(int(p), ids, logits))
    if off != len(body):
        raise IntegrityError("record length mismatch")
    return MaskedExample(language=language, teacher_id=header.teacher_id,
                         input_ids=input_ids, masked_positions=positions,
                         gold_ids=gold, example_id=example_id,
                         predictions=preds,
                         teacher_loss=None if math.isnan(loss) else loss)


def iter_shard(path, expected_checksum=None):
    """Stream the records of a shard file.

    Yields
    ------
    MaskedExample
        Records in file order.
    """
    with open(path, 'rb') as f:
        header = read_header(f, path, expected_checksum)
        for i in range(header.count):
            n, = _U32.unpack(_read_exact(f, 4, path, 'record {}'.format(i)))
            body = _read_exact(f, n, path, 'record {}'.format(i))
            try:
                yield decode_record(body, header)
            except (ValidationError, struct.error, ValueError) as e:
                _LOGGER.error("read_shard: corrupt record {} in {}.".format(
                              i, path))
                raise IntegrityError("{}: corrupt record {}: {}".format(
                                     path, i, e))
        if f.read(1):
            _LOGGER.error("read_shard: {} has more records than its header "
                          "count {}.".format(path, header.count))
            raise IntegrityError("{}: record count mismatch".format(path))


def read_shard(path, expected_checksum=None):
    """Read a whole shard file.

    Parameters
    ----------
    path : str
        Shard file.
    expected_checksum : str
        Vocab checksum the shard must carry, not checked if None.

    Returns
    -------
    PredictionShard

    Raises
    ------
    IntegrityError
        Version or checksum mismatch, truncated or corrupt file.
    """
    with open(path, 'rb') as f:
        header = read_header(f, path, expected_checksum)
    records = list(iter_shard(path, expected_checksum))
    return PredictionShard(teacher_id=header.teacher_id, k=header.k,
                           vocab_checksum=header.vocab_checksum,
                           records=records, version=header.version)


def shard_stats(path):
    """Byte accounting of a shard file.

    Returns
    -------
    dict
        Keys 'records', 'positions', 'k', 'header_bytes', 'metadata_bytes'
        (length fields, ids, positions, gold, losses), 'prediction_bytes'
        (top-k ids and logits) and 'total_bytes'.
    """
    with open(path, 'rb') as f:
        header = read_header(f, path)
    positions = sum(ex.n for ex in iter_shard(path))
    total = os.path.getsize(path)
    pred = positions * header.k * 8
    return {'records': header.count, 'positions': positions, 'k': header.k,
            'header_bytes': header.size,
            'metadata_bytes': total - header.size - pred,
            'prediction_bytes': pred, 'total_bytes': total}
