#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Seeded random streams.

Every random draw in the pipeline comes from a ``numpy.random.Generator``
backed by PCG64, which produces the same stream on every platform for a
given seed. Independent streams (one per language, teacher, pass, ...) are
derived from the run seed and a tuple of keys, so workers never share
generator state.
"""

import zlib

import numpy as np

_SEED_UPPER_BOUND = 0x100000000


def _key_to_int(key):
    if isinstance(key, (int, np.integer)):
        return int(key) % _SEED_UPPER_BOUND
    return zlib.crc32(str(key).encode('utf-8'))


def make_rng(seed, *keys):
    """Create a generator for the stream named by *keys*.

    Parameters
    ----------
    seed : int
        Run seed.
    keys :
        Stream names, str or int, e.g. ``make_rng(7, 'mask', 'en', 'bert')``.

    Returns
    -------
    numpy.random.Generator
        PCG64 generator, same draws for the same ``(seed, keys)``.

    Examples
    --------
    >>> a = make_rng(1, 'mask', 'en').random()
    >>> b = make_rng(1, 'mask', 'en').random()
    >>> a == b
    True
    """
    ss = np.random.SeedSequence(int(seed) % _SEED_UPPER_BOUND,
                                spawn_key=tuple(_key_to_int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed, *keys):
    """Derive an integer seed for the stream named by *keys*."""
    return int(make_rng(seed, *keys).integers(0, _SEED_UPPER_BOUND))
