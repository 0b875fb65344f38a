# -*- coding: utf-8 -*-

import os
import shutil
import tempfile
import unittest

import numpy as np

from _utils import make_vocab
from _utils import write_lines
from merge_distill import MaskedExample
from merge_distill import ValidationError
from merge_distill import VocabMapping
from merge_distill import Vocabulary
from merge_distill import build_union_vocab
from merge_distill import detokenize
from merge_distill import load_mapping
from merge_distill import load_vocab
from merge_distill import map_example
from merge_distill import save_mapping
from merge_distill import save_vocab
from merge_distill import tokenize
from merge_distill.core.vocab import SPECIAL_TOKENS


class TestVocabulary(unittest.TestCase):
    def test_special_ids(self):
        v = make_vocab(['a'])
        self.assertEqual(len(v), 6)
        self.assertEqual(v.token_to_id('a'), 5)
        self.assertEqual(v.mask_id, 4)
        self.assertEqual(v.pad_id, 0)
        self.assertEqual(v.sep_id, 3)
        self.assertEqual(v.special_ids, {'[PAD]': 0, '[UNK]': 1, '[CLS]': 2,
                                         '[SEP]': 3, '[MASK]': 4})
        self.assertTrue(v.is_special(v.cls_id))
        self.assertFalse(v.is_special(5))
        np.testing.assert_array_equal(v.non_special_ids(), [5])

    def test_duplicate(self):
        with self.assertRaises(ValidationError):
            make_vocab(['a', 'a'])

    def test_missing_special(self):
        with self.assertRaises(ValidationError):
            Vocabulary(['[PAD]', '[UNK]', '[CLS]', '[SEP]', 'a'])

    def test_checksum(self):
        a, b = make_vocab(['a', 'b']), make_vocab(['a', 'b'])
        self.assertEqual(a.checksum, b.checksum)
        self.assertEqual(len(a.checksum), 64)
        self.assertNotEqual(a.checksum, make_vocab(['b', 'a']).checksum)


class TestVocabFile(unittest.TestCase):
    def setUp(self):
        self.tmpdir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmpdir)

    def test_load(self):
        p = write_lines(os.path.join(self.tmpdir, 'v.txt'),
                        list(SPECIAL_TOKENS) + ['a'])
        v = load_vocab(p)
        self.assertEqual(len(v), 6)
        self.assertEqual(v.token_to_id('a'), 5)

    def test_load_duplicate(self):
        p = write_lines(os.path.join(self.tmpdir, 'v.txt'),
                        list(SPECIAL_TOKENS) + ['a', 'a'])
        with self.assertRaises(ValidationError):
            load_vocab(p)

    def test_load_missing_mask(self):
        p = write_lines(os.path.join(self.tmpdir, 'v.txt'),
                        ['[PAD]', '[UNK]', '[CLS]', '[SEP]', 'a'])
        with self.assertRaises(ValidationError):
            load_vocab(p)

    def test_load_empty(self):
        p = os.path.join(self.tmpdir, 'v.txt')
        open(p, 'w').close()
        with self.assertRaises(ValidationError):
            load_vocab(p)

    def test_save_checksum(self):
        v = make_vocab(['x', '##y'])
        p = os.path.join(self.tmpdir, 'out', 'v.txt')
        save_vocab(v, p)
        self.assertEqual(load_vocab(p).checksum, v.checksum)
        self.assertFalse(os.path.exists(p + '.tmp'))

    def test_mapping_file(self):
        _, (m,) = build_union_vocab([make_vocab(['a', 'b'])], ['t'])
        p = save_mapping(m, os.path.join(self.tmpdir, 'm.tsv'))
        with open(p) as f:
            self.assertEqual(f.readline(), '0\t0\n')
        m2 = load_mapping(p, 't')
        np.testing.assert_array_equal(m2.map, m.map)
        self.assertTrue(m2.is_identity())

    def test_mapping_not_utf8(self):
        p = os.path.join(self.tmpdir, 'm.tsv')
        with open(p, 'wb') as f:
            f.write(b'0\t0\n\xff\t1\n')
        with self.assertRaises(ValidationError):
            load_mapping(p, 't')


class TestTokenize(unittest.TestCase):
    def setUp(self):
        self.v = make_vocab(['hug', '##s', 'h'])

    def test_greedy(self):
        ids = tokenize('hugs', self.v)
        self.assertEqual([self.v.id_to_token(i) for i in ids],
                         ['hug', '##s'])

    def test_empty(self):
        self.assertEqual(tokenize('', self.v), [])

    def test_unknown(self):
        self.assertEqual(tokenize('qqq', self.v), [self.v.unk_id])

    def test_partial_match_is_unk(self):
        # 'h' matches but '##q' does not
        self.assertEqual(tokenize('hq', self.v), [self.v.unk_id])

    def test_long_word(self):
        v = make_vocab(['a', '##a'])
        self.assertEqual(tokenize('a' * 100, v)[0], v.token_to_id('a'))
        self.assertEqual(tokenize('a' * 101, v), [v.unk_id])

    def test_detokenize(self):
        ids = tokenize('hugs h hug', self.v)
        self.assertEqual(detokenize(ids, self.v), 'hugs h hug')


class TestUnionVocab(unittest.TestCase):
    def test_single_teacher_identity(self):
        t = make_vocab(['a', 'b', '##c'])
        s, (m,) = build_union_vocab([t])
        self.assertEqual(s.tokens, t.tokens)
        self.assertTrue(m.is_identity())

    def test_specials_pinned(self):
        t = Vocabulary(['a', '[MASK]', '[PAD]', '[UNK]', '[CLS]', '[SEP]'])
        s, (m,) = build_union_vocab([t])
        self.assertEqual(s.tokens[:5], SPECIAL_TOKENS)
        self.assertFalse(m.is_identity())
        self.assertEqual(s.id_to_token(int(m.map[0])), 'a')

    def test_overlap(self):
        a = make_vocab(['a', 'b'])
        b = make_vocab(['b', 'c'])
        s, (ma, mb) = build_union_vocab([a, b], ['A', 'B'])
        self.assertEqual(s.tokens, SPECIAL_TOKENS + ('a', 'b', 'c'))
        self.assertEqual(mb.map[b.token_to_id('b')],
                         ma.map[a.token_to_id('b')])
        self.assertEqual(mb.map[b.token_to_id('c')], 7)

    def test_string_preservation(self):
        rng = np.random.default_rng(3)
        pool = ['w{}'.format(i) for i in range(40)] + \
            ['##p{}'.format(i) for i in range(20)]
        teachers = []
        for _ in range(3):
            words = [str(w) for w in rng.choice(pool, size=25, replace=False)]
            teachers.append(make_vocab(words))
        s, maps = build_union_vocab(teachers, ['x', 'y', 'z'])
        union = set()
        for t, m in zip(teachers, maps):
            union.update(t.tokens)
            self.assertEqual(len(m), len(t))
            for i, tok in enumerate(t.tokens):
                self.assertEqual(s.id_to_token(int(m.map[i])), tok)
            self.assertEqual(np.unique(m.map).size, len(t))
        self.assertEqual(set(s.tokens), union)
        self.assertEqual(len(s), len(union))

    def test_deterministic(self):
        ts = [make_vocab(['a', 'b']), make_vocab(['c', 'a'])]
        s1, _ = build_union_vocab(ts)
        s2, _ = build_union_vocab(ts)
        self.assertEqual(s1.to_bytes(), s2.to_bytes())

    def test_prefix_conflict(self):
        with self.assertRaises(ValidationError):
            build_union_vocab([make_vocab(['a'], prefix='##'),
                               make_vocab(['b'], prefix='@@')])

    def test_empty(self):
        with self.assertRaises(ValidationError):
            build_union_vocab([])


class TestMapExample(unittest.TestCase):
    def _example(self, teacher_id='t'):
        return MaskedExample(language='en', teacher_id=teacher_id,
                             input_ids=[5, 1, 2, 6],
                             masked_positions=[1, 2], gold_ids=[1, 2])

    def test_identity(self):
        ex = self._example()
        m = VocabMapping('t', np.arange(10))
        self.assertEqual(map_example(ex, m), ex)

    def test_pointwise(self):
        ex = self._example()
        mp = np.arange(10)
        mp[1], mp[2], mp[7], mp[9] = 7, 9, 1, 2
        out = map_example(ex, VocabMapping('t', mp))
        np.testing.assert_array_equal(out.gold_ids, [7, 9])
        np.testing.assert_array_equal(out.input_ids, [5, 7, 9, 6])
        np.testing.assert_array_equal(out.masked_positions, [1, 2])

    def test_teacher_mismatch(self):
        with self.assertRaises(ValidationError):
            map_example(self._example('u'), VocabMapping('t', np.arange(10)))

    def test_out_of_range(self):
        with self.assertRaises(ValidationError):
            map_example(self._example(), VocabMapping('t', np.arange(4)))

    def test_not_injective(self):
        with self.assertRaises(ValidationError):
            VocabMapping('t', [0, 1, 1])
