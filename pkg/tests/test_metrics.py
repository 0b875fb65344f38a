# -*- coding: utf-8 -*-

import math
import os
import shutil
import tempfile
import unittest

import numpy as np

from _utils import write_lines
from merge_distill import IntegrityError
from merge_distill import MaskedExample
from merge_distill import MetricsReport
from merge_distill import PredictionShard
from merge_distill import RdtEntry
from merge_distill import RdtInput
from merge_distill import StudentModel
from merge_distill import TopKPrediction
from merge_distill import ValidationError
from merge_distill import evaluate
from merge_distill import format_report
from merge_distill import kl_to_teacher
from merge_distill import load_score_table
from merge_distill import mlm_accuracy
from merge_distill import rdt
from merge_distill import rdt_table
from merge_distill import write_report_csv

CHECKSUM = 'ab' * 32

# (language, teacher score, student score) per task
SIMILAR = {
    'NER': [('en', 89.5, 89.8), ('de', 93.0, 93.9), ('it', 94.5, 95.2),
            ('es', 94.2, 94.7)],
    'POS': [('en', 96.6, 96.3), ('de', 98.3, 98.3), ('it', 98.6, 98.6),
            ('es', 99.0, 98.9)],
    'QA-F1': [('en', 87.1, 89.8), ('it', 73.5, 75.8), ('es', 74.9, 76.5)],
    'QA-EM': [('en', 78.6, 82.1), ('it', 61.6, 63.8), ('es', 56.6, 58.4)],
}
DISSIMILAR = {
    'NER': [('ar', 94.3, 93.7), ('zh', 83.0, 82.6), ('en', 89.5, 89.5),
            ('fi', 94.4, 94.4), ('tr', 95.2, 95.4)],
    'POS': [('ar', 96.3, 96.4), ('zh', 96.9, 96.8), ('en', 96.6, 96.3),
            ('fi', 97.9, 95.5), ('tr', 95.6, 92.9)],
    'QA-F1': [('ar', 83.1, 81.3), ('zh', 81.8, 80.8), ('en', 87.1, 88.6),
              ('fi', 81.0, 77.7), ('tr', 76.7, 76.2)],
    'QA-EM': [('ar', 68.6, 66.6), ('zh', 81.8, 80.8), ('en', 78.6, 80.7),
              ('fi', 68.8, 65.9), ('tr', 59.8, 59.1)],
}


def _rdt(task, rows):
    return rdt(RdtInput.from_pairs(task, [(l, s, t) for l, t, s in rows]))


class TestRdt(unittest.TestCase):
    def test_similar_block(self):
        expected = {'NER': 0.6, 'POS': -0.1, 'QA-F1': 2.8, 'QA-EM': 3.7}
        for task, rows in SIMILAR.items():
            self.assertAlmostEqual(_rdt(task, rows), expected[task],
                                   delta=0.1, msg=task)
        self.assertAlmostEqual(_rdt('NER', SIMILAR['NER']), 0.6, delta=0.05)

    def test_dissimilar_block(self):
        expected = {'NER': -0.2, 'POS': -1.1, 'QA-F1': -1.3, 'QA-EM': -1.4}
        for task, rows in DISSIMILAR.items():
            self.assertAlmostEqual(_rdt(task, rows), expected[task],
                                   delta=0.1, msg=task)

    def test_multilingual_rows(self):
        cases = [
            (69.3, 58.8, 17.9),   # PANX against the weaker teacher
            (72.3, 68.5, 5.6),    # UDPOS
            (75.3, 69.2, 8.8),    # average
            (69.3, 76.9, -9.9),   # PANX against the stronger teacher
            (75.3, 78.3, -3.8),
            (63.9, 63.5, 0.6),
            (68.6, 66.1, 3.8),
        ]
        for s, t, r in cases:
            v = rdt(RdtInput.from_pairs('x', [('all', s, t)]))
            self.assertAlmostEqual(v, r, delta=0.1, msg=(s, t))

    def test_identity(self):
        inp = RdtInput.from_pairs('NER', [('en', 80.0, 80.0),
                                          ('de', 70.5, 70.5)])
        self.assertEqual(rdt(inp), 0.0)

    def test_linear(self):
        def f(s):
            return rdt(RdtInput.from_pairs('x', [('a', s, 50.0),
                                                 ('b', 40.0, 80.0)]))
        self.assertAlmostEqual(f(60.0) - f(50.0), f(70.0) - f(60.0),
                               places=10)
        self.assertAlmostEqual(f(60.0) - f(50.0), 100.0 / 2 * 10 / 50,
                               places=10)

    def test_pair_mean(self):
        inp = RdtInput('x', [RdtEntry('hi', 75.0, [('muril', 75.0),
                                                   ('mbert', 60.0)]),
                             RdtEntry('en', 50.0, [('mbert', 100.0)])])
        self.assertAlmostEqual(rdt(inp), 100.0 / 3 * (0.0 + 0.25 - 0.5))

    def test_nonpositive_teacher(self):
        for t in (0.0, -1.0):
            with self.assertRaises(ValidationError):
                rdt(RdtInput.from_pairs('x', [('a', 1.0, t)]))

    def test_table(self):
        inputs = [RdtInput.from_pairs(t, [(l, s, p) for l, p, s in rows])
                  for t, rows in SIMILAR.items()]
        tab = rdt_table(inputs)
        self.assertEqual(list(tab), list(SIMILAR))


class TestScoreTable(unittest.TestCase):
    def setUp(self):
        self.tmpdir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmpdir)

    def _table(self, rows, sep='\t'):
        lines = [sep.join(['task', 'language', 'student_score', 'teacher_id',
                           'teacher_score'])]
        lines += [sep.join(str(x) for x in r) for r in rows]
        return write_lines(os.path.join(self.tmpdir, 'scores.tsv'), lines)

    def test_tsv(self):
        rows = [('NER', l, s, 'bert-' + l, t) for l, t, s in SIMILAR['NER']]
        rows += [('POS', l, s, 'bert-' + l, t) for l, t, s in SIMILAR['POS']]
        inputs = load_score_table(self._table(rows))
        self.assertEqual([i.task for i in inputs], ['NER', 'POS'])
        self.assertAlmostEqual(rdt(inputs[0]), 0.6, delta=0.05)

    def test_csv_multi_teacher(self):
        p = self._table([('PANX', 'hi', 69.3, 'mbert', 58.8),
                         ('PANX', 'hi', 69.3, 'muril', 76.9)], sep=',')
        inp, = load_score_table(p)
        self.assertEqual(len(inp.entries), 1)
        self.assertEqual(len(inp.entries[0].teacher_scores), 2)

    def test_errors(self):
        p = write_lines(os.path.join(self.tmpdir, 'bad.tsv'),
                        ['task\tlanguage\tstudent_score', 'NER\ten\t1.0'])
        with self.assertRaises(ValidationError):
            load_score_table(p)
        p = self._table([('NER', 'en', 'abc', 't', 1.0)])
        with self.assertRaises(ValidationError):
            load_score_table(p)
        p = self._table([('NER', 'en', 1.0, 't', 1.0),
                         ('NER', 'en', 2.0, 'u', 1.0)])
        with self.assertRaises(ValidationError):
            load_score_table(p)
        p = self._table([('NER', 'en', 1.0, 't', 1.0)])
        load_score_table(p)
        with open(p, 'ab') as f:
            f.write(b'NER\t\xe9\xff\t1.0\tu\t1.0\n')
        with self.assertRaises(ValidationError):
            load_score_table(p)


def _example(gold, teacher=None, example_id=0):
    ids = list(range(max(2, len(gold))))
    preds = None
    if teacher is not None:
        preds = [TopKPrediction(i, tid, lg)
                 for i, (tid, lg) in enumerate(teacher)]
    return MaskedExample(language='en', teacher_id='t',
                         input_ids=ids,
                         masked_positions=list(range(len(gold))),
                         gold_ids=gold, example_id=example_id,
                         predictions=preds)


class TestAccuracy(unittest.TestCase):
    def test_uniform_tie_break(self):
        rng = np.random.default_rng(0)
        m = StudentModel.zeros(100, 2)
        gold = rng.integers(0, 100, size=10000)
        exs = [MaskedExample(language='en', teacher_id='t',
                             input_ids=[5, 6, 7, 8, 9],
                             masked_positions=[0, 1, 2, 3, 4],
                             gold_ids=gold[i:i + 5], example_id=i)
               for i in range(0, 10000, 5)]
        acc = mlm_accuracy(m, exs)
        self.assertEqual(acc, float(np.mean(gold == 0)))
        self.assertAlmostEqual(acc, 0.01, delta=0.005)

    def test_empty(self):
        with self.assertRaises(ValidationError):
            mlm_accuracy(StudentModel.zeros(5, 2), [])

    def test_perfect(self):
        m = StudentModel.zeros(6, 2)
        m.params['output_bias'][3] = 5.0
        self.assertEqual(mlm_accuracy(m, [_example([3])]), 1.0)


class TestKL(unittest.TestCase):
    def test_point_mass(self):
        m = StudentModel.zeros(2, 2, vocab_checksum=CHECKSUM)
        ex = _example([1], teacher=[([1], [3.0])])
        shard = PredictionShard('t', 1, CHECKSUM, [ex])
        self.assertAlmostEqual(kl_to_teacher(m, shard), math.log(2),
                               places=12)

    def test_match(self):
        m = StudentModel.zeros(3, 2)
        ex = _example([1, 2], teacher=[([0, 1, 2], [1.0, 1.0, 1.0]),
                                          ([2, 1, 0], [0.5, 0.5, 0.5])])
        self.assertAlmostEqual(kl_to_teacher(m, [ex]), 0.0, places=12)

    def test_checksum(self):
        m = StudentModel.zeros(2, 2, vocab_checksum=CHECKSUM)
        ex = _example([1], teacher=[([1], [3.0])])
        with self.assertRaises(IntegrityError):
            kl_to_teacher(m, PredictionShard('t', 1, 'cd' * 32, [ex]))

    def test_no_predictions(self):
        with self.assertRaises(ValidationError):
            kl_to_teacher(StudentModel.zeros(2, 2), [_example([1])])


class TestReport(unittest.TestCase):
    def setUp(self):
        self.tmpdir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmpdir)

    def test_evaluate(self):
        m = StudentModel.zeros(3, 2, vocab_checksum=CHECKSUM)
        ex = _example([0], teacher=[([0], [1.0])])
        shard = PredictionShard('t', 1, CHECKSUM, [ex])
        inputs = [RdtInput.from_pairs('PANX', [('all', 69.3, 58.8)])]
        r = evaluate(m, [shard], inputs)
        self.assertIsInstance(r, MetricsReport)
        self.assertEqual(r.mlm_top1_accuracy, 1.0)
        self.assertAlmostEqual(r.kl_to_teacher, math.log(3), places=12)
        self.assertEqual(r.positions, 1)
        self.assertEqual([k for k, _ in r.rows()],
                         ['mlm_top1_accuracy', 'kl_to_teacher', 'positions',
                          'rdt:PANX'])
        self.assertIn('+17.86 %', format_report(r))
        p = write_report_csv(r, os.path.join(self.tmpdir, 'report.csv'))
        with open(p) as f:
            lines = f.read().splitlines()
        self.assertEqual(lines[0], 'metric,value')
        self.assertEqual(lines[1], 'mlm_top1_accuracy,1.0')
