from .vocab import Vocabulary
from .vocab import VocabMapping
from .vocab import build_union_vocab
from .vocab import detokenize
from .vocab import map_example
from .vocab import tokenize
from .corpus import LanguageCorpus
from .corpus import MaskedExample
from .corpus import SamplingConfig
from .corpus import compute_sampling_weights
from .corpus import load_corpus
from .corpus import mask_example
from .corpus import sample_language
from .student import StudentModel
from .student import backward
from .student import forward
from .student import init_params
from .loss import LossBreakdown
from .loss import NormalizedTeacherDist
from .loss import batch_objective
from .loss import l_all
from .loss import l_kd
from .loss import l_mlm
from .loss import lambda_at
from .loss import normalize_topk
from .optim import SGD
from .optim import Adam
from .teacher import LookupTableTeacher
from .teacher import TeacherOracle
from .teacher import TinyMLMTeacher
from .teacher import TopKPrediction
from .teacher import build_oracle
from .teacher import evaluate_example
from .teacher import evaluate_masked
from .teacher import select_best_copy
from .teacher import teacher_example_loss
from .config import PrepareConfig
from .config import TrainingConfig
from .metrics import MetricsReport
from .metrics import RdtEntry
from .metrics import RdtInput
from .metrics import evaluate
from .metrics import kl_to_teacher
from .metrics import mlm_accuracy
from .metrics import rdt
from .metrics import rdt_table
from .trainer import BatchEntry
from .trainer import ExamplePool
from .trainer import TrainState
from .trainer import assemble_batch
from .trainer import train
from .trainer import train_step

__all__ = [
    'Vocabulary', 'VocabMapping', 'build_union_vocab', 'detokenize',
    'map_example', 'tokenize',
    'LanguageCorpus', 'MaskedExample', 'SamplingConfig',
    'compute_sampling_weights', 'load_corpus', 'mask_example',
    'sample_language',
    'StudentModel', 'backward', 'forward', 'init_params',
    'LossBreakdown', 'NormalizedTeacherDist', 'batch_objective', 'l_all',
    'l_kd', 'l_mlm', 'lambda_at', 'normalize_topk',
    'SGD', 'Adam',
    'LookupTableTeacher', 'TeacherOracle', 'TinyMLMTeacher',
    'TopKPrediction', 'build_oracle', 'evaluate_example', 'evaluate_masked',
    'select_best_copy', 'teacher_example_loss',
    'PrepareConfig', 'TrainingConfig',
    'MetricsReport', 'RdtEntry', 'RdtInput', 'evaluate', 'kl_to_teacher',
    'mlm_accuracy', 'rdt', 'rdt_table',
    'BatchEntry', 'ExamplePool', 'TrainState', 'assemble_batch', 'train',
    'train_step',
]
