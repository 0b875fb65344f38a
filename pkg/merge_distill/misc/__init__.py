from .errors import MergeDistillError
from .errors import ValidationError
from .errors import DataExhaustedError
from .errors import IntegrityError
from .errors import TrainingError
from .message import disable_warnings
from .message import enable_warnings
from .message import set_verbosity
from .rng import make_rng
from .rng import derive_seed
from .workers import get_workers
from .workers import ordered_map

__all__ = ['MergeDistillError', 'ValidationError', 'DataExhaustedError',
           'IntegrityError', 'TrainingError', 'disable_warnings',
           'enable_warnings', 'set_verbosity', 'make_rng', 'derive_seed',
           'get_workers', 'ordered_map',
]
