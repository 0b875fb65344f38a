#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Tabular outputs: loss curves, score tables and metric reports.
"""

import csv
import io
import logging

from merge_distill.core.metrics import RdtEntry
from merge_distill.core.metrics import RdtInput
from merge_distill.misc import ValidationError
from .atomic import atomic_write

_LOGGER = logging.getLogger(__name__)

LOSS_COLUMNS = ('step', 'lambda', 'l_mlm', 'l_kd', 'l_all', 'examples_seen')
SCORE_COLUMNS = ('task', 'language', 'student_score', 'teacher_id',
                 'teacher_score')


def _csv_bytes(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator='\n')
    w.writerow(header)
    for r in rows:
        w.writerow(r)
    return buf.getvalue().encode('utf-8')


def _fmt(v):
    return repr(float(v)) if isinstance(v, float) else str(v)


def write_loss_csv(rows, path):
    """Write the loss curve.

    Parameters
    ----------
    rows : list of dict
        Keys of ``LOSS_COLUMNS``, one dict per step.
    path : str
        Output CSV file.
    """
    data = _csv_bytes(LOSS_COLUMNS,
                      [[_fmt(r[c]) for c in LOSS_COLUMNS] for r in rows])
    return atomic_write(path, data)


def read_loss_csv(path):
    """Read a loss curve written by :func:`write_loss_csv`.

    Returns
    -------
    dict
        Column name to list of values; 'step' and 'examples_seen' as int.
    """
    cols = {c: [] for c in LOSS_COLUMNS}
    with open(path, 'r', encoding='utf-8', newline='') as f:
        for r in csv.DictReader(f):
            for c in LOSS_COLUMNS:
                v = r[c]
                cols[c].append(int(v) if c in ('step', 'examples_seen')
                               else float(v))
    return cols


def load_score_table(path):
    """Read a downstream score table.

    The file is CSV, or TSV when the header line contains a TAB, with
    columns ``task, language, student_score, teacher_id, teacher_score``;
    one row per (task, language, teacher).

    Returns
    -------
    list of RdtInput
        One per task, in order of first appearance.

    Raises
    ------
    ValidationError
        Missing column, non-numeric score, or a file that is not UTF-8.
    """
    with open(path, 'rb') as f:
        raw = f.read()
    try:
        text = raw.decode('utf-8')
    except UnicodeDecodeError as e:
        _LOGGER.error("load_score_table: {} is not UTF-8.".format(path))
        raise ValidationError("{}: not UTF-8: {}".format(path, e))
    first = text.split('\n', 1)[0]
    delim = '\t' if '\t' in first else ','
    reader = csv.DictReader(io.StringIO(text), delimiter=delim)
    missing = [c for c in SCORE_COLUMNS
               if c not in (reader.fieldnames or [])]
    if missing:
        _LOGGER.error("load_score_table: {} lacks column(s) {}.".format(
                      path, missing))
        raise ValidationError("{}: missing column(s) {}".format(
                              path, ', '.join(missing)))
    tasks = {}
    for n, r in enumerate(reader):
        try:
            s, t = float(r['student_score']), float(r['teacher_score'])
        except (TypeError, ValueError):
            raise ValidationError("{}: row {}: score is not a number".format(
                                  path, n + 2))
        langs = tasks.setdefault(r['task'].strip(), {})
        lang = r['language'].strip()
        prev = langs.setdefault(lang, [s, []])
        if prev[0] != s:
            raise ValidationError("{}: row {}: conflicting student score "
                                  "for {}".format(path, n + 2, lang))
        prev[1].append((r['teacher_id'].strip(), t))
    if not tasks:
        raise ValidationError("{}: empty score table".format(path))
    return [RdtInput(task, [RdtEntry(l, v[0], v[1]) for l, v in langs.items()])
            for task, langs in tasks.items()]


def write_report_csv(report, path):
    """Write a MetricsReport as ``metric,value`` rows."""
    data = _csv_bytes(('metric', 'value'),
                      [(k, _fmt(v)) for k, v in report.rows()])
    return atomic_write(path, data)


def format_report(report):
    """Report as aligned text, one metric per line."""
    rows = report.rows()
    if not rows:
        return ''
    w = max(len(k) for k, _ in rows)
    lines = []
    for k, v in rows:
        if k.startswith('rdt:'):
            s = '{:+.2f} %'.format(v)
        elif isinstance(v, float):
            s = '{:.4f}'.format(v)
        else:
            s = str(v)
        lines.append('{}  {}'.format(k.ljust(w), s))
    return '\n'.join(lines)
