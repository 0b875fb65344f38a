from .atomic import atomic_write
from .vocabfile import load_vocab
from .vocabfile import save_vocab
from .vocabfile import load_mapping
from .vocabfile import save_mapping
from .shard import PredictionShard
from .shard import iter_shard
from .shard import read_shard
from .shard import shard_stats
from .shard import write_shard
from .checkpoint import load_checkpoint
from .checkpoint import save_checkpoint
from .output import format_report
from .output import load_score_table
from .output import read_loss_csv
from .output import write_loss_csv
from .output import write_report_csv
from .manifest import PipelineManifest
from .manifest import load_manifest

__all__ = ['atomic_write', 'load_vocab', 'save_vocab', 'load_mapping',
           'save_mapping', 'PredictionShard', 'iter_shard', 'read_shard',
           'shard_stats', 'write_shard', 'load_checkpoint',
           'save_checkpoint', 'format_report', 'load_score_table',
           'read_loss_csv', 'write_loss_csv', 'write_report_csv',
           'PipelineManifest', 'load_manifest',
]
