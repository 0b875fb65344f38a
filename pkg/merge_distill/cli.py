#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Command line surface of the pipeline.

Stages, each reading the manifest and writing under ``output_dir``::

    merge-distill merge-vocab manifest.yaml   # vocab/student_vocab.txt, vocab/mapping-*.tsv
    merge-distill prepare manifest.yaml       # shards/<split>-<lang>-<teacher>-<idx>.mdsh
    merge-distill train manifest.yaml         # train/step_*.ckpt, train/final.ckpt, train/loss.csv
    merge-distill eval manifest.yaml          # eval/report.csv, eval/report.txt
    merge-distill rdt scores.tsv

Exit codes: 0 success, 2 validation error, 3 data integrity error, 1 other
failures.
"""

import dataclasses
import glob
import logging
import os
import sys

import click

from merge_distill.core import build_oracle
from merge_distill.core import build_union_vocab
from merge_distill.core import compute_sampling_weights
from merge_distill.core import evaluate
from merge_distill.core import evaluate_example
from merge_distill.core import load_corpus
from merge_distill.core import map_example
from merge_distill.core import mask_example
from merge_distill.core import rdt_table
from merge_distill.core import tokenize
from merge_distill.core import train
from merge_distill.core.teacher import clamp_k
from merge_distill.io import PredictionShard
from merge_distill.io import atomic_write
from merge_distill.io import format_report
from merge_distill.io import load_checkpoint
from merge_distill.io import load_manifest
from merge_distill.io import load_score_table
from merge_distill.io import load_vocab
from merge_distill.io import read_shard
from merge_distill.io import save_mapping
from merge_distill.io import save_vocab
from merge_distill.io import write_report_csv
from merge_distill.io import write_shard
from merge_distill.misc import IntegrityError
from merge_distill.misc import MergeDistillError
from merge_distill.misc import ValidationError
from merge_distill.misc import disable_warnings
from merge_distill.misc import get_workers
from merge_distill.misc import make_rng
from merge_distill.misc import derive_seed
from merge_distill.misc import ordered_map
from merge_distill.misc import set_verbosity
from merge_distill.viz import lplot

_LOGGER = logging.getLogger(__name__)


def _teacher_vocabs(m):
    return [load_vocab(t.vocab, t.continuation_prefix) for t in m.teachers]


def _student_vocab(m, teacher_vocabs):
    """Stored student vocab, checked against the current teacher vocabs."""
    if not os.path.isfile(m.student_vocab_path):
        _LOGGER.error("student vocab {} not found, run merge-vocab first."
                      .format(m.student_vocab_path))
        raise ValidationError("student vocab not found: {}".format(
                              m.student_vocab_path))
    prefix = m.teachers[0].continuation_prefix
    student = load_vocab(m.student_vocab_path, prefix)
    expected, mappings = build_union_vocab(teacher_vocabs,
                                           [t.id for t in m.teachers])
    if expected.checksum != student.checksum:
        _LOGGER.error("student vocab checksum {} does not match the teacher "
                      "vocabularies ({}).".format(student.checksum[:12],
                                                  expected.checksum[:12]))
        raise IntegrityError("student vocab is stale, rerun merge-vocab")
    return student, mappings


def cmd_merge_vocab(m):
    """Build the union vocabulary and one mapping file per teacher.

    Returns
    -------
    dict
        'vocab' path and 'mappings', teacher id to path.
    """
    vocabs = _teacher_vocabs(m)
    student, mappings = build_union_vocab(vocabs, [t.id for t in m.teachers])
    save_vocab(student, m.student_vocab_path)
    paths = {}
    for mp in mappings:
        paths[mp.teacher_id] = save_mapping(mp, m.mapping_path(mp.teacher_id))
    _LOGGER.info("merge-vocab: {} tokens, checksum {}.".format(
                 len(student), student.checksum[:12]))
    return {'vocab': m.student_vocab_path, 'mappings': paths}


def _teacher_lines(m, spec, corpora):
    if spec.corpus:
        lines = []
        for p in spec.corpus:
            lines.extend(load_corpus(p, spec.id).lines)
        return lines
    lines = []
    for l in m.teacher_languages(spec.id):
        lines.extend(corpora[('train', l.name)].lines)
    return lines


def _prepare_one(m, split, lang, spec, v, oracle, mapping, k, lines,
                 workers):
    cfg = m.prepare

    def work(item):
        eid, line = item
        ids = tokenize(line, v)[:cfg.max_length]
        if not ids or v.mask_id in ids:
            return None
        rng = make_rng(cfg.seed, split, lang, spec.id, eid)
        ex = mask_example(ids, v, cfg.mask_rate, rng, language=lang,
                          teacher_id=spec.id, example_id=eid)
        return map_example(evaluate_example(oracle, ex, k), mapping)

    out = ordered_map(work, list(enumerate(lines)), workers)
    skipped = sum(1 for r in out if r is None)
    if skipped:
        _LOGGER.warning("prepare: {}/{}/{}: skipped {} line(s) containing "
                        "[MASK].".format(split, lang, spec.id, skipped))
    return [r for r in out if r is not None]


def cmd_prepare(m, workers=None):
    """Mask every example once per assigned teacher, evaluate it offline
    and write student-space prediction shards.

    Returns
    -------
    list of str
        Written shard paths.
    """
    if workers is None:
        workers = get_workers()
    vocabs = _teacher_vocabs(m)
    student, mappings = _student_vocab(m, vocabs)
    vocab_of = {t.id: v for t, v in zip(m.teachers, vocabs)}
    map_of = {mp.teacher_id: mp for mp in mappings}

    corpora = {}
    for l in m.languages:
        corpora[('train', l.name)] = load_corpus(l.corpus, l.name)
        if l.heldout:
            corpora[('heldout', l.name)] = load_corpus(l.heldout, l.name)

    oracles = {}
    ks = {}
    for t in m.teachers:
        if not m.teacher_languages(t.id):
            _LOGGER.warning("prepare: teacher {} has no language.".format(
                            t.id))
            continue
        oracles[t.id] = build_oracle(
            t.oracle, t.id, vocab_of[t.id],
            lines=_teacher_lines(m, t, corpora),
            seed=derive_seed(m.prepare.seed, 'oracle', t.id))
        ks[t.id] = clamp_k(m.training.top_k, len(vocab_of[t.id]), t.id)

    jobs = {}
    for (split, lang), corpus in corpora.items():
        for tid in m.language_teachers()[lang]:
            recs = _prepare_one(m, split, lang, m.teacher(tid),
                                vocab_of[tid], oracles[tid], map_of[tid],
                                ks[tid], corpus.lines, workers)
            if split == 'train' and not recs:
                _LOGGER.error("prepare: no usable example for {}/{}.".format(
                              lang, tid))
                raise ValidationError("no usable example for {}/{}".format(
                                      lang, tid))
            jobs[(split, lang, tid)] = recs

    for old in glob.glob(os.path.join(m.shard_dir, '*.mdsh')):
        os.remove(old)
    paths = []
    size = m.prepare.shard_size
    for (split, lang, tid), recs in jobs.items():
        for idx, start in enumerate(range(0, max(len(recs), 1), size)):
            shard = PredictionShard(teacher_id=tid, k=ks[tid],
                                    vocab_checksum=student.checksum,
                                    records=recs[start:start + size])
            paths.append(write_shard(shard, m.shard_path(split, lang, tid,
                                                         idx)))
    _LOGGER.info("prepare: {} shard(s) in {}.".format(len(paths),
                                                      m.shard_dir))
    return paths


def load_shards(m, split, checksum):
    """Shards of *split* for every (language, teacher) of the manifest."""
    shards = []
    for l in m.languages:
        if split == 'heldout' and not l.heldout:
            continue
        for tid in l.teachers:
            pattern = os.path.join(m.shard_dir, '{}-{}-{}-*.mdsh'.format(
                                   split, l.name, tid))
            files = sorted(glob.glob(pattern))
            if not files:
                _LOGGER.error("no {} shard for {}/{}, run prepare first."
                              .format(split, l.name, tid))
                raise ValidationError("no {} shard for {}/{}".format(
                                      split, l.name, tid))
            shards.extend(read_shard(p, expected_checksum=checksum)
                          for p in files)
    return shards


def cmd_train(m, plot=False, workers=None):
    """Train the student on the prepared shards.

    Returns
    -------
    TrainResult
    """
    student, _ = _student_vocab(m, _teacher_vocabs(m))
    shards = load_shards(m, 'train', student.checksum)
    weights = compute_sampling_weights(
        [load_corpus(l.corpus, l.name) for l in m.languages], m.sampling)
    _LOGGER.info("train: sampling weights {}.".format(
                 {k: round(v, 4) for k, v in weights.items()}))
    res = train(m.training, shards, weights, len(student),
                language_teachers=m.language_teachers(),
                output_dir=m.train_dir, workers=workers,
                sampling_seed=m.sampling.seed)
    if plot and res.history:
        lplot(history=res.history, out=os.path.join(m.train_dir, 'loss.png'))
    return res


def cmd_eval(m, checkpoint=None, scores=None):
    """Evaluate a checkpoint on the held-out shards.

    Returns
    -------
    MetricsReport
    """
    student, _ = _student_vocab(m, _teacher_vocabs(m))
    ckpt = checkpoint or os.path.join(m.train_dir, 'final.ckpt')
    if not os.path.isfile(ckpt):
        raise ValidationError("checkpoint not found: {}".format(ckpt))
    scores = scores or m.scores
    rdt_inputs = load_score_table(scores) if scores else None
    shards = load_shards(m, 'heldout', student.checksum)
    if not any(len(s) for s in shards):
        _LOGGER.error("eval: empty held-out set.")
        raise ValidationError("empty held-out set")
    model = load_checkpoint(ckpt, expected_checksum=student.checksum)
    report = evaluate(model, shards, rdt_inputs)
    write_report_csv(report, os.path.join(m.eval_dir, 'report.csv'))
    text = format_report(report)
    atomic_write(os.path.join(m.eval_dir, 'report.txt'),
                 (text + '\n').encode('utf-8'))
    return report


def cmd_rdt(scores):
    """RDT per task of a score table."""
    return rdt_table(load_score_table(scores))


def _run(func, *args, **kws):
    try:
        return func(*args, **kws)
    except MergeDistillError as e:
        click.echo("error: {}".format(e), err=True)
        sys.exit(e.exit_code)


def _manifest(path, overrides):
    m = _run(load_manifest, path)
    tr = {k: v for k, v in overrides.items()
          if v is not None and k != 'output_dir'}
    if tr:
        m = m.replace(training=_run(m.training.replace, **tr))
    if overrides.get('seed') is not None:
        m = m.replace(sampling=dataclasses.replace(m.sampling,
                                                   seed=overrides['seed']))
    if overrides.get('output_dir'):
        m = m.replace(output_dir=os.path.abspath(overrides['output_dir']))
    return m


@click.group()
@click.option('-v', '--verbose', count=True, help='More log output.')
@click.option('-q', '--quiet', is_flag=True, help='No log output.')
def cli(verbose, quiet):
    """Merge masked LM teachers into one multilingual student."""
    set_verbosity(verbose)
    if quiet:
        disable_warnings()


_output_opt = click.option('--output-dir', '-o', default=None,
                           help='Override output_dir of the manifest.')


@cli.command('merge-vocab')
@click.argument('manifest', type=click.Path(exists=True, dir_okay=False))
@_output_opt
def merge_vocab(manifest, output_dir):
    """Build the union vocabulary and teacher mappings."""
    m = _manifest(manifest, {'output_dir': output_dir})
    r = _run(cmd_merge_vocab, m)
    click.echo(r['vocab'])


@cli.command()
@click.argument('manifest', type=click.Path(exists=True, dir_okay=False))
@_output_opt
@click.option('--top-k', type=int, default=None, help='Predictions kept.')
@click.option('--workers', '-j', type=int, default=None,
              help='Worker threads, MERGE_DISTILL_WORKERS if not set.')
def prepare(manifest, output_dir, top_k, workers):
    """Mask, evaluate teachers offline and write prediction shards."""
    m = _manifest(manifest, {'output_dir': output_dir, 'top_k': top_k})
    paths = _run(cmd_prepare, m, workers)
    click.echo("{} shard(s) written to {}".format(len(paths), m.shard_dir))


@cli.command('train')
@click.argument('manifest', type=click.Path(exists=True, dir_okay=False))
@_output_opt
@click.option('--seed', type=int, default=None)
@click.option('--steps', 'total_steps', type=int, default=None)
@click.option('--batch-size', type=int, default=None)
@click.option('--lr', 'learning_rate', type=float, default=None)
@click.option('--label-mode', type=click.Choice(['gold_only',
                                                 'gold_plus_teacher']),
              default=None)
@click.option('--copy-strategy', type=click.Choice(['all_copies',
                                                    'best_copy',
                                                    'single_teacher']),
              default=None)
@click.option('--plot', is_flag=True, help='Write loss.png.')
@click.option('--workers', '-j', type=int, default=None)
def train_command(manifest, output_dir, seed, total_steps, batch_size,
                  learning_rate, label_mode, copy_strategy, plot, workers):
    """Train the student on prepared shards."""
    m = _manifest(manifest, {'output_dir': output_dir, 'seed': seed,
                             'total_steps': total_steps,
                             'batch_size': batch_size,
                             'learning_rate': learning_rate,
                             'label_mode': label_mode,
                             'copy_strategy': copy_strategy})
    res = _run(cmd_train, m, plot, workers)
    if res.history:
        click.echo("step {step}: l_all {l_all:.6f}".format(**res.history[-1]))
    click.echo(os.path.join(m.train_dir, 'final.ckpt'))


@cli.command('eval')
@click.argument('manifest', type=click.Path(exists=True, dir_okay=False))
@_output_opt
@click.option('--checkpoint', type=click.Path(dir_okay=False), default=None)
@click.option('--scores', type=click.Path(exists=True, dir_okay=False),
              default=None, help='Score table for RDT.')
def eval_command(manifest, output_dir, checkpoint, scores):
    """Evaluate the student on held-out shards."""
    m = _manifest(manifest, {'output_dir': output_dir})
    report = _run(cmd_eval, m, checkpoint, scores)
    click.echo(format_report(report))


@cli.command()
@click.argument('scores', type=click.Path(exists=True, dir_okay=False))
def rdt(scores):
    """Relative deviation from teachers of a score table."""
    for task, v in _run(cmd_rdt, scores).items():
        click.echo("{}\t{:+.2f}".format(task, v))


def main():
    cli()


if __name__ == '__main__':
    main()
