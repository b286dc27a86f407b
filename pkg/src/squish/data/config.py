from dataclasses import dataclass, field
from typing import Optional

from simple_parsing.helpers import Serializable

from squish.common.config import check, validate_nested
from .shapes import ShapesSpec


@dataclass
class DataCfg(Serializable):
    """ Dataset source.

    Attributes:
        source: 'shapes' (synthetic, generated from `shapes`) or 'cifar10' (binary files).
        path: CIFAR-10 binary file or directory of data_batch_*.bin / test_batch.bin files.
        cache_dir: Optional RTF1 dataset cache directory, reused when it exists.
        shapes: Generator settings for the shapes source, the seed is replaced by the experiment seed.
        eval_size: Test images used for evaluation matrices.
        sanity_size: Test images used for the expensive large-epsilon sanity runs.
        batch_size: Batch size for evaluation / attacks.
    """
    source: str = 'shapes'
    path: Optional[str] = None
    cache_dir: Optional[str] = None
    shapes: ShapesSpec = field(default_factory=ShapesSpec)
    eval_size: int = 1000
    sanity_size: int = 100
    batch_size: int = 100

    def validate(self):
        check(self.source in ('shapes', 'cifar10'), 'source', f"must be 'shapes' or 'cifar10', got {self.source!r}")
        if self.source == 'cifar10':
            check(self.path is not None, 'path', 'required for cifar10 source')
        else:
            validate_nested(self.shapes, 'shapes')
        check(self.eval_size >= 1, 'eval_size', 'must be >= 1')
        check(self.sanity_size >= 1, 'sanity_size', 'must be >= 1')
        check(self.batch_size >= 1, 'batch_size', 'must be >= 1')
