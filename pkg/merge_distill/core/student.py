#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Single mixing layer masked LM with tied input/output embeddings.

For a masked position ``p`` and context window ``w``::

    c      = E[x_p] + sum_{o = -w..w, o != 0} A[o] * E[x_{p+o}]
    h      = tanh(c W + b)
    logits = h E^T + b_out

Neighbours outside the sequence contribute nothing. With all parameters
zero the output is the uniform distribution.
"""

import logging

import numpy as np

from merge_distill.misc import ValidationError

_LOGGER = logging.getLogger(__name__)

PARAM_NAMES = ('embedding', 'context', 'mixing', 'mixing_bias', 'output_bias')


class StudentModel(object):
    """Student parameters and dimensions.

    Class attributes:

    .. autosummary ::
        vocab_size
        dim
        window
        params
        vocab_checksum

    Parameters
    ----------
    vocab_size : int
        Size of the (student) vocabulary.
    dim : int
        Embedding width.
    window : int
        Context window on each side of a masked position.
    params : dict
        Parameter arrays keyed by ``PARAM_NAMES``, zeros if not set.
    vocab_checksum : str
        Checksum of the vocabulary the model is defined over.

    Notes
    -----
    ``forward`` only reads parameters, so it can be called concurrently;
    updates are done by a single writer (the optimizer).
    """

    def __init__(self, vocab_size, dim, window=2, params=None,
                 vocab_checksum=None):
        vocab_size, dim, window = int(vocab_size), int(dim), int(window)
        if vocab_size < 1 or dim < 1:
            _LOGGER.error("StudentModel: invalid dims V={}, d={}.".format(
                          vocab_size, dim))
            raise ValidationError(
                "vocab_size and dim must be >= 1, got {} and {}".format(
                    vocab_size, dim))
        if window < 0:
            raise ValidationError("window must be >= 0")
        self._vocab_size = vocab_size
        self._dim = dim
        self._window = window
        self.vocab_checksum = vocab_checksum
        shapes = self.param_shapes()
        if params is None:
            params = {k: np.zeros(s) for k, s in shapes.items()}
        self._params = {}
        for k in PARAM_NAMES:
            a = np.array(params[k], dtype=np.float64)
            if a.shape != shapes[k]:
                raise ValidationError("parameter {} has shape {}, "
                                      "expected {}".format(k, a.shape,
                                                           shapes[k]))
            self._params[k] = a

    @classmethod
    def zeros(cls, vocab_size, dim, window=2, vocab_checksum=None):
        return cls(vocab_size, dim, window, vocab_checksum=vocab_checksum)

    @property
    def vocab_size(self):
        return self._vocab_size

    @property
    def dim(self):
        return self._dim

    @property
    def window(self):
        return self._window

    @property
    def params(self):
        """dict: parameter arrays, float64."""
        return self._params

    def param_shapes(self):
        V, d, w = self._vocab_size, self._dim, self._window
        return {'embedding': (V, d), 'context': (2 * w, d),
                'mixing': (d, d), 'mixing_bias': (d,),
                'output_bias': (V,)}

    @property
    def num_params(self):
        return int(sum(a.size for a in self._params.values()))

    def copy(self):
        return StudentModel(self._vocab_size, self._dim, self._window,
                            params={k: v.copy()
                                    for k, v in self._params.items()},
                            vocab_checksum=self.vocab_checksum)

    def is_finite(self):
        return all(np.all(np.isfinite(a)) for a in self._params.values())

    def __repr__(self):
        return "StudentModel(V={}, d={}, window={})".format(
            self._vocab_size, self._dim, self._window)


def init_params(vocab_size, d, seed, window=2, vocab_checksum=None):
    """Randomly initialized student.

    Weights are drawn from ``U(-1/sqrt(d), 1/sqrt(d))``, biases are zero.

    Parameters
    ----------
    vocab_size : int
        Vocabulary size, >= 1.
    d : int
        Embedding width, >= 1.
    seed : int
        Initialization seed; the same seed gives identical parameters.
    window : int
        Context window on each side.

    Returns
    -------
    StudentModel
    """
    m = StudentModel(vocab_size, d, window, vocab_checksum=vocab_checksum)
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    s = 1.0 / np.sqrt(m.dim)
    shapes = m.param_shapes()
    for k in ('embedding', 'context', 'mixing'):
        m.params[k][...] = rng.uniform(-s, s, size=shapes[k])
    return m


def forward_ids(m, input_ids, positions):
    """Logits at *positions* of the sequence *input_ids*.

    Returns
    -------
    tuple
        ``(logits, cache)``, logits of shape ``(n, vocab_size)`` and the
        activations needed by :func:`backward`.
    """
    ids = np.asarray(input_ids, dtype=np.int64).reshape(-1)
    pos = np.asarray(positions, dtype=np.int64).reshape(-1)
    if ids.size and (ids.min() < 0 or ids.max() >= m.vocab_size):
        _LOGGER.error("forward: token id out of range.")
        raise ValidationError("token id out of range [0, {})".format(
                              m.vocab_size))
    if pos.size and (pos.min() < 0 or pos.max() >= ids.size):
        raise ValidationError("position out of range")

    p = m.params
    E, A, W = p['embedding'], p['context'], p['mixing']
    w = m.window
    offsets = np.array([o for o in range(-w, w + 1) if o != 0],
                       dtype=np.int64)
    nb = pos[:, None] + offsets[None, :]
    valid = (nb >= 0) & (nb < ids.size)
    nb_ids = np.where(valid, ids[np.clip(nb, 0, max(ids.size - 1, 0))], 0)
    center = ids[pos]

    ctx = E[nb_ids] * A[None, :, :] * valid[:, :, None]
    c = E[center] + ctx.sum(axis=1)
    h = np.tanh(c @ W + p['mixing_bias'])
    logits = h @ E.T + p['output_bias']
    cache = {'center': center, 'nb_ids': nb_ids, 'valid': valid,
             'c': c, 'h': h}
    return logits, cache


def forward(m, ex):
    """Student logits for the masked positions of example *ex*.

    Parameters
    ----------
    m : StudentModel
        Student.
    ex : MaskedExample
        Example in student ids.

    Returns
    -------
    tuple
        ``(logits, cache)``, logits of shape ``(ex.n, vocab_size)``.
    """
    return forward_ids(m, ex.input_ids, ex.masked_positions)


def backward(m, cache, dlogits):
    """Parameter gradients from the gradient w.r.t. the logits.

    Returns
    -------
    dict
        Gradient arrays keyed like ``m.params``.
    """
    p = m.params
    E, A, W = p['embedding'], p['context'], p['mixing']
    h, c = cache['h'], cache['c']
    nb_ids, center = cache['nb_ids'], cache['center']
    vm = cache['valid'][:, :, None]
    dlogits = np.asarray(dlogits, dtype=np.float64)

    g = {'output_bias': dlogits.sum(axis=0),
         'embedding': dlogits.T @ h}
    dz = (dlogits @ E) * (1.0 - h * h)
    g['mixing'] = c.T @ dz
    g['mixing_bias'] = dz.sum(axis=0)
    dc = dz @ W.T
    np.add.at(g['embedding'], center, dc)
    g['context'] = (dc[:, None, :] * E[nb_ids] * vm).sum(axis=0)
    np.add.at(g['embedding'], nb_ids.reshape(-1),
              (dc[:, None, :] * A[None, :, :] * vm).reshape(-1, m.dim))
    return g
