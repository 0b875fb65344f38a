# -*- coding: utf-8 -*-

import logging
import os

from concurrent.futures import ThreadPoolExecutor

_LOGGER = logging.getLogger(__name__)

WORKERS_ENV = 'MERGE_DISTILL_WORKERS'


def get_workers(default=1):
    """Worker count from ``MERGE_DISTILL_WORKERS``, *default* if unset."""
    v = os.environ.get(WORKERS_ENV)
    if v is None or v.strip() == '':
        return default
    try:
        n = int(v)
    except ValueError:
        _LOGGER.warning("get_workers: invalid {}={!r}, use {}".format(
                        WORKERS_ENV, v, default))
        return default
    return max(1, n)


def ordered_map(func, items, workers=None):
    """Map *func* over *items*, results in input order.

    Runs serially when *workers* is 1, otherwise on a thread pool; the
    result order never depends on the worker count.
    """
    items = list(items)
    if workers is None:
        workers = get_workers()
    if workers <= 1 or len(items) <= 1:
        return [func(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(func, items))
