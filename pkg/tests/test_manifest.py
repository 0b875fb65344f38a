# -*- coding: utf-8 -*-

import os
import shutil
import tempfile
import unittest

import yaml

from _utils import write_toy_manifest
from merge_distill import ValidationError
from merge_distill import load_manifest
from merge_distill.io.manifest import parse_manifest


class TestManifest(unittest.TestCase):
    def setUp(self):
        self.tmpdir = tempfile.mkdtemp()
        self.path = write_toy_manifest(self.tmpdir,
                                       training={'copy_strategy':
                                                 'best_copy'})
        with open(self.path) as f:
            self.data = yaml.safe_load(f)

    def tearDown(self):
        shutil.rmtree(self.tmpdir)

    def _parse(self, data, **kws):
        return parse_manifest(data, base_dir=self.tmpdir, **kws)

    def test_load(self):
        m = load_manifest(self.path)
        self.assertEqual([l.name for l in m.languages], ['aa', 'bb'])
        self.assertEqual([t.id for t in m.teachers], ['ta', 'tb'])
        self.assertEqual(m.language_teachers(), {'aa': ['ta'], 'bb': ['tb']})
        self.assertEqual(m.output_dir, os.path.join(self.tmpdir, 'run'))
        self.assertTrue(os.path.isabs(m.languages[0].corpus))
        self.assertEqual(m.training.copy_strategy, 'best_copy')
        self.assertEqual(m.training.total_steps, 10)
        self.assertEqual(m.prepare.shard_size, 25)
        self.assertEqual(m.sampling.alpha, m.training.alpha)
        self.assertEqual(m.teachers[0].oracle, {'type': 'bigram'})
        self.assertEqual(m.shard_path('train', 'aa', 'ta', 3),
                         os.path.join(self.tmpdir, 'run', 'shards',
                                      'train-aa-ta-00003.mdsh'))
        self.assertEqual(m.mapping_path('tb'),
                         os.path.join(self.tmpdir, 'run', 'vocab',
                                      'mapping-tb.tsv'))

    def test_unknown_section(self):
        self.data['model'] = {}
        with self.assertRaises(ValidationError):
            self._parse(self.data)

    def test_unknown_training_key(self):
        self.data['training']['warmup'] = 10
        with self.assertRaises(ValidationError):
            self._parse(self.data)

    def test_language_without_teacher(self):
        self.data['languages'][0]['teachers'] = []
        with self.assertRaises(ValidationError) as cm:
            self._parse(self.data)
        self.assertIn('aa', str(cm.exception))

    def test_unknown_teacher(self):
        self.data['languages'][1]['teachers'] = ['tz']
        with self.assertRaises(ValidationError):
            self._parse(self.data)

    def test_bad_values(self):
        for section, key, value in (('training', 'batch_size', 0),
                                    ('training', 'label_mode', 'kd'),
                                    ('sampling', 'alpha', 0.0),
                                    ('prepare', 'mask_rate', 1.5)):
            data = yaml.safe_load(yaml.safe_dump(self.data))
            data.setdefault(section, {})[key] = value
            with self.assertRaises(ValidationError, msg=key):
                self._parse(data)

    def test_oracle_type(self):
        self.data['teachers'][0]['oracle'] = {'type': 'gpt'}
        with self.assertRaises(ValidationError):
            self._parse(self.data)

    def test_missing_file(self):
        os.remove(os.path.join(self.tmpdir, 'data', 'bb.txt'))
        with self.assertRaises(ValidationError) as cm:
            load_manifest(self.path)
        self.assertIn('bb.txt', str(cm.exception))
        m = load_manifest(self.path, check_paths=False)
        self.assertEqual(len(m.languages), 2)

    def test_bad_yaml(self):
        with open(self.path, 'w') as f:
            f.write('languages: [\n')
        with self.assertRaises(ValidationError):
            load_manifest(self.path)
