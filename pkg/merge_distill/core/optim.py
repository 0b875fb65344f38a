# -*- coding: utf-8 -*-

"""In-place parameter updates shared by the student trainer and the
tiny-MLM teacher.
"""

import logging

import numpy as np

from merge_distill.misc import ValidationError

_LOGGER = logging.getLogger(__name__)


class SGD(object):
    """Plain stochastic gradient descent, no momentum.

    Parameters
    ----------
    learning_rate : float
        Fixed step size, >= 0.
    """

    name = 'sgd'

    def __init__(self, learning_rate=0.1):
        if learning_rate < 0:
            raise ValidationError("learning_rate must be >= 0")
        self.learning_rate = float(learning_rate)
        self.t = 0

    def step(self, params, grads):
        """Update *params* in place with *grads* (dicts keyed alike)."""
        self.t += 1
        if self.learning_rate == 0.0:
            return
        for k in params:
            params[k] -= self.learning_rate * grads[k]

    def state(self):
        return {'t': self.t}


class Adam(object):
    """Adaptive moment estimation.

    Parameters
    ----------
    learning_rate : float
        Step size, >= 0.
    beta1, beta2 : float
        Moment decay rates.
    eps : float
        Denominator offset.
    """

    name = 'adam'

    def __init__(self, learning_rate=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        if learning_rate < 0:
            raise ValidationError("learning_rate must be >= 0")
        self.learning_rate = float(learning_rate)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {}
        self.v = {}

    def step(self, params, grads):
        self.t += 1
        if self.learning_rate == 0.0:
            return
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for k in params:
            g = grads[k]
            m = self.m.setdefault(k, np.zeros_like(g))
            v = self.v.setdefault(k, np.zeros_like(g))
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            params[k] -= self.learning_rate * (m / c1) / (
                np.sqrt(v / c2) + self.eps)

    def state(self):
        return {'t': self.t, 'm': self.m, 'v': self.v}


OPTIMIZERS = {'sgd': SGD, 'adam': Adam}


def make_optimizer(name, learning_rate):
    """Optimizer by name, 'sgd' or 'adam'."""
    try:
        cls = OPTIMIZERS[name]
    except KeyError:
        _LOGGER.error("make_optimizer: unknown optimizer {!r}.".format(name))
        raise ValidationError("unknown optimizer {!r}".format(name))
    return cls(learning_rate)
