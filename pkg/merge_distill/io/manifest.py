#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Pipeline manifest: a YAML file declaring languages, teachers, their
assignment and the stage configurations.

Example::

    output_dir: run
    languages:
      - name: en
        corpus: data/en.txt
        heldout: data/en.heldout.txt
        teachers: [bert_en]
      - name: hi
        corpus: data/hi.txt
        teachers: [muril, bert_hi]
    teachers:
      - id: bert_en
        vocab: vocab/en.txt
        oracle: {type: bigram, smoothing: 1.0}
      - id: muril
        vocab: vocab/muril.txt
        oracle: {type: tiny_mlm, dim: 16, steps: 500}
      - id: bert_hi
        vocab: vocab/hi.txt
        oracle: {type: table, table: tables/hi.npy}
    sampling: {alpha: 0.7}
    prepare: {mask_rate: 0.15, shard_size: 1000, seed: 0}
    training: {total_steps: 1000, batch_size: 16, top_k: 8}
    eval: {scores: scores.tsv}

Relative paths are resolved against the manifest directory. A teacher
oracle trains on its own ``corpus`` (path or list of paths) if given,
otherwise on the transfer corpora of the languages it is assigned to.

``sampling.seed`` seeds the language and copy draws of training and
defaults to ``training.seed``; ``train --seed`` sets both.
"""

import dataclasses
import logging
import os
import re

import yaml

from merge_distill.core.config import PrepareConfig
from merge_distill.core.config import TrainingConfig
from merge_distill.core.corpus import SamplingConfig
from merge_distill.core.teacher import ORACLE_TYPES
from merge_distill.misc import ValidationError

_LOGGER = logging.getLogger(__name__)

SECTIONS = ('output_dir', 'languages', 'teachers', 'sampling', 'prepare',
            'training', 'eval')
_NAME_RE = re.compile(r'^[A-Za-z0-9_.]+$')


@dataclasses.dataclass(frozen=True)
class LanguageSpec:
    name: str
    corpus: str
    teachers: tuple
    heldout: str = None


@dataclasses.dataclass(frozen=True)
class TeacherSpec:
    id: str
    vocab: str
    oracle: dict
    corpus: tuple = ()
    continuation_prefix: str = '##'


@dataclasses.dataclass(frozen=True)
class PipelineManifest:
    """Validated manifest with absolute paths.

    Attributes
    ----------
    path : str
        Manifest file.
    output_dir : str
        Root of all artifacts.
    languages : tuple of LanguageSpec
        Languages in manifest order.
    teachers : tuple of TeacherSpec
        Teachers in manifest order, which is the union vocab order.
    sampling : SamplingConfig
        Language sampler.
    prepare : PrepareConfig
        Masking and sharding.
    training : TrainingConfig
        Student training.
    scores : str
        Optional downstream score table for RDT.
    """
    path: str
    output_dir: str
    languages: tuple
    teachers: tuple
    sampling: SamplingConfig
    prepare: PrepareConfig
    training: TrainingConfig
    scores: str = None

    def teacher(self, teacher_id):
        for t in self.teachers:
            if t.id == teacher_id:
                return t
        raise ValidationError("unknown teacher {!r}".format(teacher_id))

    def language_teachers(self):
        """dict: language to its teacher ids, T_k in manifest order."""
        return {l.name: list(l.teachers) for l in self.languages}

    def teacher_languages(self, teacher_id):
        return [l for l in self.languages if teacher_id in l.teachers]

    @property
    def vocab_dir(self):
        return os.path.join(self.output_dir, 'vocab')

    @property
    def student_vocab_path(self):
        return os.path.join(self.vocab_dir, 'student_vocab.txt')

    def mapping_path(self, teacher_id):
        return os.path.join(self.vocab_dir, 'mapping-{}.tsv'.format(
                            teacher_id))

    @property
    def shard_dir(self):
        return os.path.join(self.output_dir, 'shards')

    def shard_path(self, split, language, teacher_id, index):
        return os.path.join(self.shard_dir, '{}-{}-{}-{:05d}.mdsh'.format(
                            split, language, teacher_id, index))

    @property
    def train_dir(self):
        return os.path.join(self.output_dir, 'train')

    @property
    def eval_dir(self):
        return os.path.join(self.output_dir, 'eval')

    def replace(self, **kws):
        return dataclasses.replace(self, **kws)


def _fail(path, msg):
    _LOGGER.error("load_manifest: {}: {}.".format(path, msg))
    raise ValidationError("{}: {}".format(path, msg))


def _resolve(base, p):
    return p if os.path.isabs(p) else os.path.normpath(os.path.join(base, p))


def _check_name(path, what, name):
    if not isinstance(name, str) or not _NAME_RE.match(name):
        _fail(path, "{} {!r} must match [A-Za-z0-9_.]+".format(what, name))


def _as_list(v):
    if v is None:
        return []
    return [v] if isinstance(v, str) else list(v)


def parse_manifest(data, path='<manifest>', base_dir='.',
                   check_paths=True):
    """Validate a manifest mapping.

    Parameters
    ----------
    data : dict
        Parsed YAML.
    path : str
        Source name used in error messages.
    base_dir : str
        Directory relative paths are resolved against.
    check_paths : bool
        Require every referenced input file to exist.

    Returns
    -------
    PipelineManifest
    """
    if not isinstance(data, dict):
        _fail(path, "top level must be a mapping")
    unknown = sorted(set(data) - set(SECTIONS))
    if unknown:
        _fail(path, "unknown section(s) {}".format(', '.join(unknown)))
    if not data.get('output_dir'):
        _fail(path, "output_dir is required")

    teachers = []
    seen = set()
    for t in data.get('teachers') or []:
        tid = str(t.get('id', ''))
        _check_name(path, 'teacher id', tid)
        if tid in seen:
            _fail(path, "duplicate teacher id {!r}".format(tid))
        seen.add(tid)
        if not t.get('vocab'):
            _fail(path, "teacher {} has no vocab".format(tid))
        oracle = dict(t.get('oracle') or {'type': 'bigram'})
        oracle.setdefault('type', 'bigram')
        if oracle['type'] not in ORACLE_TYPES:
            _fail(path, "teacher {}: unknown oracle type {!r}".format(
                  tid, oracle['type']))
        if oracle['type'] == 'table':
            if not oracle.get('table'):
                _fail(path, "teacher {}: table oracle needs 'table'".format(
                      tid))
            oracle['table'] = _resolve(base_dir, oracle['table'])
        corpus = tuple(_resolve(base_dir, p)
                       for p in _as_list(oracle.pop('corpus', None)))
        teachers.append(TeacherSpec(
            id=tid, vocab=_resolve(base_dir, t['vocab']), oracle=oracle,
            corpus=corpus,
            continuation_prefix=t.get('continuation_prefix', '##')))
    if not teachers:
        _fail(path, "at least one teacher is required")

    languages = []
    names = set()
    for l in data.get('languages') or []:
        name = str(l.get('name', ''))
        _check_name(path, 'language', name)
        if name in names:
            _fail(path, "duplicate language {!r}".format(name))
        names.add(name)
        ts = tuple(str(x) for x in _as_list(l.get('teachers')))
        if not ts:
            _fail(path, "language {} has no teacher".format(name))
        for x in ts:
            if x not in seen:
                _fail(path, "language {} refers to unknown teacher {!r}"
                      .format(name, x))
        if not l.get('corpus'):
            _fail(path, "language {} has no corpus".format(name))
        heldout = l.get('heldout')
        languages.append(LanguageSpec(
            name=name, corpus=_resolve(base_dir, l['corpus']), teachers=ts,
            heldout=_resolve(base_dir, heldout) if heldout else None))
    if not languages:
        _fail(path, "at least one language is required")

    try:
        training = TrainingConfig.from_dict(data.get('training'))
        sampling = dict(data.get('sampling') or {})
        sampling.setdefault('alpha', training.alpha)
        sampling.setdefault('seed', training.seed)
        sampling = SamplingConfig(**sampling)
        training = training.replace(alpha=sampling.alpha)
        prepare = PrepareConfig.from_dict(data.get('prepare'))
    except (TypeError, ValidationError) as e:
        _fail(path, str(e))

    scores = (data.get('eval') or {}).get('scores')
    m = PipelineManifest(
        path=path, output_dir=_resolve(base_dir, str(data['output_dir'])),
        languages=tuple(languages), teachers=tuple(teachers),
        sampling=sampling, prepare=prepare, training=training,
        scores=_resolve(base_dir, scores) if scores else None)
    if check_paths:
        check_inputs(m)
    return m


def check_inputs(m):
    """Raise ValidationError naming the first missing input file."""
    files = []
    for t in m.teachers:
        files.append(('vocab of teacher {}'.format(t.id), t.vocab))
        files.extend(('corpus of teacher {}'.format(t.id), p)
                     for p in t.corpus)
        if t.oracle.get('table'):
            files.append(('table of teacher {}'.format(t.id),
                          t.oracle['table']))
    for l in m.languages:
        files.append(('corpus of {}'.format(l.name), l.corpus))
        if l.heldout:
            files.append(('held-out corpus of {}'.format(l.name), l.heldout))
    if m.scores:
        files.append(('score table', m.scores))
    for what, p in files:
        if not os.path.isfile(p):
            _fail(m.path, "{} not found: {}".format(what, p))


def load_manifest(path, check_paths=True):
    """Read and validate a YAML manifest.

    Parameters
    ----------
    path : str
        Manifest file.
    check_paths : bool
        Require every referenced input file to exist.

    Returns
    -------
    PipelineManifest

    Raises
    ------
    ValidationError
        Malformed YAML, unknown key, bad value or missing input.
    """
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        _fail(path, "cannot read manifest: {}".format(e))
    return parse_manifest(data, path=path,
                          base_dir=os.path.dirname(os.path.abspath(path)),
                          check_paths=check_paths)
