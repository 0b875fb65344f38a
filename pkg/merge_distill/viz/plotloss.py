#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Loss curve plots from training histories or loss CSV files."""

import logging

import matplotlib.pyplot as plt
import numpy as np

from merge_distill.io import read_loss_csv

_LOGGER = logging.getLogger(__name__)

LOSS_KEYS = ('l_mlm', 'l_kd', 'l_all')


def _columns(source):
    if isinstance(source, str):
        return read_loss_csv(source)
    cols = {}
    for row in source:
        for k, v in row.items():
            cols.setdefault(k, []).append(v)
    return cols


def lplot(*args, **kws):
    """Plot loss curves against the training step.

    Parameters
    ----------
    args : str
        Loss columns to plot, any of 'l_mlm', 'l_kd', 'l_all'; all three
        if not set.
    history :
        List of loss rows (``TrainResult.history``) or the path of a
        ``loss.csv`` file.
    colors : dict
        Color of each column.
    lam : bool
        Also plot the KD weight on a secondary axis, True by default.
    legend : bool
        Show the legend.
    out : str
        Save the figure to this file instead of leaving it open.

    Returns
    -------
    matplotlib.axes.Axes
        Loss axes, None if there is nothing to plot.

    Examples
    --------
    >>> lplot('l_mlm', 'l_kd', history='run/train/loss.csv', out='loss.png')
    """
    src = kws.get('history')
    if src is None:
        _LOGGER.error('lplot: nothing to plot.')
        return None
    d = _columns(src)
    if not d.get('step'):
        _LOGGER.error('lplot: empty history.')
        return None
    keys = list(args) if args else list(LOSS_KEYS)
    bad = [k for k in keys if k not in d]
    if bad:
        _LOGGER.error('lplot: unknown column(s) {}.'.format(bad))
        return None
    cdct = {'l_mlm': 'b', 'l_kd': 'r', 'l_all': 'k', 'lambda': 'g'}
    cdct.update(kws.get('colors', {}))
    lam = bool(kws.get('lam', True))
    lgnd = bool(kws.get('legend', True))

    fig, ax = plt.subplots()
    step = np.asarray(d['step'])
    for k in keys:
        ax.plot(step, d[k], c=cdct.get(k), label=k)
    ax.set_xlabel('step')
    ax.set_ylabel('loss')
    if lam and 'lambda' in d:
        ax2 = ax.twinx()
        ax2.plot(step, d['lambda'], c=cdct['lambda'], ls='--',
                 label='lambda')
        ax2.set_ylabel('lambda')
        ax2.set_ylim(-0.05, 1.05)
    if lgnd:
        ax.legend(loc='best')
    out = kws.get('out')
    if out is not None:
        fig.savefig(out)
        plt.close(fig)
        _LOGGER.info('lplot: saved {}.'.format(out))
    return ax
