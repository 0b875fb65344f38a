# -*- coding: utf-8 -*-

import logging


def disable_warnings(level=60):
    logging.disable(level)


def enable_warnings():
    logging.disable(logging.NOTSET)


def set_verbosity(verbose=0):
    """Set the package logger level, 0: WARNING, 1: INFO, >=2: DEBUG."""
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbose, logging.DEBUG)
    logging.getLogger('merge_distill').setLevel(level)
    return level
