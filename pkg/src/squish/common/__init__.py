from .config import TrainCfg, check, validate_nested
from .epsilon import format_epsilon, parse_epsilon
from .errors import (
    SquishError,
    ShapeError,
    TapeError,
    NonDifferentiableError,
    TensorFileError,
    DatasetError,
    ConfigError,
    CheckpointError,
    ThreatModelError,
    OracleError,
    LabelError,
)
from .manifest import format_manifest, parse_manifest, read_manifest, write_manifest
from .random import derive_seed, make_generator, per_item_uniform, seed_everything
