# -*- coding: utf-8 -*-

import math
import unittest

import numpy as np

from _utils import numeric_grad
from _utils import random_example
from _utils import rel_error
from merge_distill import BatchEntry
from merge_distill import NormalizedTeacherDist
from merge_distill import TopKPrediction
from merge_distill import ValidationError
from merge_distill import backward
from merge_distill import batch_objective
from merge_distill import forward
from merge_distill import init_params
from merge_distill import l_all
from merge_distill import l_kd
from merge_distill import l_mlm
from merge_distill import lambda_at
from merge_distill import normalize_topk
from merge_distill.core.loss import kl_divergence


def _dist(ids, probs):
    return NormalizedTeacherDist(position=0, ids=ids, probs=probs)


def _brute_ce(z, dists):
    total = 0.0
    for row, d in zip(z, dists):
        lse = math.log(sum(math.exp(x) for x in row))
        for j, q in zip(d.ids, d.probs):
            total -= q * (row[j] - lse)
    return total / len(dists)


def _random_dist(rng, V):
    k = int(rng.integers(1, V + 1))
    ids = rng.choice(V, size=k, replace=False)
    p = rng.random(k) + 1e-3
    return _dist(ids, p / p.sum())


class TestNormalizeTopk(unittest.TestCase):
    def test_values(self):
        d = normalize_topk(TopKPrediction(0, [3, 7], [2.0, 0.0]))
        np.testing.assert_allclose(d.probs, [0.8808, 0.1192], atol=1e-3)
        d = normalize_topk(TopKPrediction(0, [3, 7], [0.0, 0.0]))
        np.testing.assert_allclose(d.probs, [0.5, 0.5])
        d = normalize_topk(TopKPrediction(0, [3], [-5.0]))
        np.testing.assert_array_equal(d.probs, [1.0])

    def test_invalid_dist(self):
        with self.assertRaises(ValidationError):
            _dist([1, 2], [0.5, 0.6])
        with self.assertRaises(ValidationError):
            _dist([1, 1], [0.5, 0.5])


class TestLossValues(unittest.TestCase):
    def test_mlm(self):
        z = np.log([[0.7, 0.2, 0.1]])
        self.assertAlmostEqual(l_mlm(z, [0]), 0.3567, delta=1e-3)
        self.assertAlmostEqual(l_mlm(np.zeros((2, 3)), [0, 2]),
                               math.log(3), places=12)
        z = np.array([[0.0, -1e4, -1e4], [-1e4, 0.0, -1e4]])
        self.assertAlmostEqual(l_mlm(z, [0, 1]), 0.0, places=9)

    def test_kd(self):
        z = np.log([[0.7, 0.2, 0.1]])
        v = l_kd(z, [_dist([0, 1], [0.5, 0.5])])
        self.assertAlmostEqual(v, 0.9831, delta=1e-3)
        self.assertAlmostEqual(v, -(0.5 * math.log(0.7) +
                                    0.5 * math.log(0.2)), places=12)

    def test_all(self):
        v = l_all({'en': 0.3567}, {'en': [0.9831]}, 0.5)
        self.assertAlmostEqual(v, 0.6699, delta=1e-3)
        mlm = {'en': 0.4, 'hi': 1.0}
        kd = {'en': [0.2], 'hi': [0.6, 1.0]}
        self.assertAlmostEqual(l_all(mlm, kd, 0.0), 0.7, places=12)
        self.assertAlmostEqual(l_all(mlm, kd, 1.0), 0.5, places=12)

    def test_all_errors(self):
        with self.assertRaises(ValidationError):
            l_all({'en': 0.3}, {}, 0.5)
        with self.assertRaises(ValidationError):
            l_all({'en': 0.3}, {'en': [0.1]}, 1.5)
        self.assertEqual(l_all({'en': 0.3}, {}, 0.0), 0.3)

    def test_gold_out_of_range(self):
        with self.assertRaises(ValidationError):
            l_mlm(np.zeros((1, 3)), [3])
        with self.assertRaises(ValidationError):
            l_kd(np.zeros((1, 3)), [_dist([5], [1.0])])


class TestLossIdentities(unittest.TestCase):
    def test_random_instances(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            V = int(rng.integers(2, 9))
            n = int(rng.integers(1, 4))
            z = rng.normal(scale=2.0, size=(n, V))
            gold = rng.integers(0, V, size=n)
            onehot = [_dist([g], [1.0]) for g in gold]
            m = l_mlm(z, gold)
            self.assertAlmostEqual(l_kd(z, onehot), m, delta=1e-9)
            self.assertAlmostEqual(m, _brute_ce(z, onehot), delta=1e-9)
            dists = [_random_dist(rng, V) for _ in range(n)]
            kd = l_kd(z, dists)
            self.assertAlmostEqual(kd, _brute_ce(z, dists), delta=1e-9)
            c = rng.normal(scale=5.0, size=(n, 1))
            self.assertAlmostEqual(l_kd(z + c, dists), kd, delta=1e-9)
            self.assertAlmostEqual(l_mlm(z + c, gold), m, delta=1e-9)
            kl = kl_divergence(z, dists)
            self.assertTrue(np.all(kl >= 0.0))

    def test_logit_gradients(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            V, n = int(rng.integers(2, 9)), int(rng.integers(1, 4))
            z = rng.normal(size=(n, V))
            gold = rng.integers(0, V, size=n)
            dists = [_random_dist(rng, V) for _ in range(n)]
            _, gm = l_mlm(z, gold, return_grad=True)
            _, gk = l_kd(z, dists, return_grad=True)
            num_m = numeric_grad(lambda: l_mlm(z, gold), {'z': z})['z']
            num_k = numeric_grad(lambda: l_kd(z, dists), {'z': z})['z']
            self.assertLess(rel_error(gm, num_m), 1e-6)
            self.assertLess(rel_error(gk, num_k), 1e-6)


class TestKLDivergence(unittest.TestCase):
    def test_zero(self):
        z = np.log([[0.5, 0.3, 0.2]])
        kl = kl_divergence(z, [_dist([0, 1, 2], [0.5, 0.3, 0.2])])
        self.assertAlmostEqual(float(kl[0]), 0.0, places=12)

    def test_point_mass(self):
        z = np.log([[0.5, 0.25, 0.25]])
        kl = kl_divergence(z, [_dist([0], [1.0])])
        self.assertAlmostEqual(float(kl[0]), math.log(2), places=12)


class TestLambda(unittest.TestCase):
    def test_linear(self):
        self.assertEqual(lambda_at(0, 100), 1.0)
        self.assertEqual(lambda_at(100, 100), 0.0)
        self.assertEqual(lambda_at(50, 100), 0.5)
        vals = [lambda_at(s, 10) for s in range(11)]
        self.assertEqual(vals, sorted(vals, reverse=True))

    def test_cosine(self):
        self.assertAlmostEqual(lambda_at(0, 10, 'cosine'), 1.0)
        self.assertAlmostEqual(lambda_at(10, 10, 'cosine'), 0.0)
        self.assertAlmostEqual(lambda_at(5, 10, 'cosine'), 0.5)

    def test_constant(self):
        self.assertEqual(lambda_at(3, 10, 'constant', 0.25), 0.25)

    def test_errors(self):
        with self.assertRaises(ValidationError):
            lambda_at(11, 10)
        with self.assertRaises(ValidationError):
            lambda_at(-1, 10)
        with self.assertRaises(ValidationError):
            lambda_at(0, 0)
        with self.assertRaises(ValidationError):
            lambda_at(1, 10, 'step')
        with self.assertRaises(ValidationError):
            lambda_at(1, 10, 'constant', 2.0)


class TestBatchObjective(unittest.TestCase):
    def _batch(self, rng, V, size=5):
        entries = []
        for i in range(size):
            ex = random_example(rng, V, length=int(rng.integers(2, 7)),
                                n=1 + i % 2, k=int(rng.integers(1, 4)),
                                language=['en', 'hi'][i % 2],
                                teacher_id=['a', 'b', 'c'][i % 3],
                                example_id=i)
            entries.append(BatchEntry.from_example(ex))
        return entries

    def test_gradient_check(self):
        rng = np.random.default_rng(0)
        for trial in range(20):
            V = int(rng.integers(6, 10))
            m = init_params(V, 3, seed=trial, window=int(rng.integers(0, 3)))
            for k in m.params:
                m.params[k] += rng.normal(scale=0.3, size=m.params[k].shape)
            entries = self._batch(rng, V)
            lam = float(rng.random())

            def f():
                logits = [forward(m, e.example)[0] for e in entries]
                return batch_objective(entries, logits, lam)[0].l_all

            fw = [forward(m, e.example) for e in entries]
            lb, dz = batch_objective(entries, [z for z, _ in fw], lam)
            g = {k: np.zeros_like(v) for k, v in m.params.items()}
            for (_, cache), d in zip(fw, dz):
                for k, v in backward(m, cache, d).items():
                    g[k] += v
            num = numeric_grad(f, m.params)
            for k in m.params:
                self.assertLess(rel_error(g[k], num[k]), 1e-4, k)

    def test_breakdown(self):
        rng = np.random.default_rng(1)
        m = init_params(8, 3, seed=0)
        entries = self._batch(rng, 8, size=6)
        logits = [forward(m, e.example)[0] for e in entries]
        lb, _ = batch_objective(entries, logits, 0.3)
        self.assertEqual(sorted(lb.l_mlm_by_language), ['en', 'hi'])
        self.assertEqual(sorted(lb.l_kd), ['a', 'b', 'c'])
        expect = l_all(lb.l_mlm_by_language,
                       {k: [v] for k, v in lb.l_kd_by_language.items()}, 0.3)
        self.assertAlmostEqual(lb.l_all, expect, places=12)
        self.assertEqual(len(lb.gold_terms), 6)
        for e, t in zip(entries, lb.gold_terms):
            self.assertEqual(t.shape, (e.example.n,))
        en = [i for i, e in enumerate(entries) if e.example.language == 'en']
        self.assertAlmostEqual(
            lb.l_mlm_by_language['en'],
            np.mean([lb.gold_terms[i].mean() for i in en]), places=12)

    def test_lambda_zero_is_gold_only(self):
        rng = np.random.default_rng(2)
        m = init_params(8, 3, seed=0)
        entries = self._batch(rng, 8)
        logits = [forward(m, e.example)[0] for e in entries]
        a, ga = batch_objective(entries, logits, 0.0)
        b, gb = batch_objective(entries, logits, 0.7, use_teacher=False)
        self.assertEqual(a.l_all, b.l_all)
        self.assertEqual(b.lambda_used, 0.0)
        for x, y in zip(ga, gb):
            np.testing.assert_array_equal(x, y)

    def test_missing_teacher(self):
        rng = np.random.default_rng(3)
        m = init_params(8, 3, seed=0)
        entries = self._batch(rng, 8, size=2)
        entries[1] = BatchEntry(entries[1].example.replace(predictions=None))
        logits = [forward(m, e.example)[0] for e in entries]
        with self.assertRaises(ValidationError):
            batch_objective(entries, logits, 0.5)
        lb, _ = batch_objective(entries, logits, 0.5, use_teacher=False)
        self.assertIsNone(lb.kd_terms[1])
