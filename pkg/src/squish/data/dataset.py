import os
from dataclasses import dataclass, field
from typing import Dict, Iterator, Optional, Sequence, Tuple

import numpy as np
import torch

from squish.common.errors import DatasetError
from squish.common.manifest import read_manifest, write_manifest
from .tensorfile import load_tensorfile, save_tensorfile

SPLIT_IDS = {'train': 0, 'val': 1, 'test': 2}


def index_hash(indices: np.ndarray, seed: int) -> np.ndarray:
    """ splitmix64 of (seed, index), used for deterministic split assignment. """
    with np.errstate(over='ignore'):
        z = np.asarray(indices, dtype=np.uint64) + np.uint64(seed & (2**64 - 1)) * np.uint64(0x9E3779B97F4A7C15)
        z = z + np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def hash_splits(num: int, seed: int, fractions: Tuple[int, int, int] = (8, 1, 1)) -> torch.Tensor:
    """ Split ids (0 train, 1 val, 2 test) by index hash in the given tenths. """
    bucket = (index_hash(np.arange(num), seed) % np.uint64(sum(fractions))).astype(np.int64)
    splits = np.full(num, SPLIT_IDS['test'], dtype=np.int64)
    splits[bucket < fractions[0] + fractions[1]] = SPLIT_IDS['val']
    splits[bucket < fractions[0]] = SPLIT_IDS['train']
    return torch.from_numpy(splits)


@dataclass
class Dataset:
    """ Labelled image set.

    Attributes:
        images: [N,3,H,W] float32 in [0,1].
        labels: [N] int64 class indices < num_classes.
        num_classes: K.
        manifest: Provenance (source, seed, spec).
        splits: Optional [N] split ids (0 train, 1 val, 2 test).
    """
    images: torch.Tensor
    labels: torch.Tensor
    num_classes: int
    manifest: Dict[str, str] = field(default_factory=dict)
    splits: Optional[torch.Tensor] = None

    def __post_init__(self):
        self.labels = torch.as_tensor(self.labels, dtype=torch.long)
        if self.images.dim() != 4:
            raise DatasetError(f'images must be [N,C,H,W], got {tuple(self.images.shape)}.')
        if self.images.shape[0] != self.labels.shape[0]:
            raise DatasetError(f'{self.images.shape[0]} images but {self.labels.shape[0]} labels.')
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise DatasetError(f'labels must be in [0, {self.num_classes}).')
        if len(self.images) and (self.images.min() < 0 or self.images.max() > 1):
            raise DatasetError('image values must be in [0, 1].')
        if self.splits is not None and self.splits.shape != self.labels.shape:
            raise DatasetError('splits must have one entry per image.')

    def __len__(self):
        return self.labels.shape[0]

    def subset(self, indices: Sequence[int]) -> 'Dataset':
        indices = torch.as_tensor(indices, dtype=torch.long)
        return Dataset(
            images=self.images[indices],
            labels=self.labels[indices],
            num_classes=self.num_classes,
            manifest=dict(self.manifest),
            splits=None if self.splits is None else self.splits[indices],
        )

    def head(self, count: int) -> 'Dataset':
        return self.subset(range(min(count, len(self))))

    def split(self, name: str) -> 'Dataset':
        assert name in SPLIT_IDS, f'Unknown split {name}, must be one of {list(SPLIT_IDS.keys())}.'
        if self.splits is None:
            return self
        indices = torch.nonzero(self.splits == SPLIT_IDS[name]).flatten()
        ds = self.subset(indices)
        ds.manifest['split'] = name
        return ds

    def batches(self, batch_size: int) -> Iterator[Tuple[torch.Tensor, torch.Tensor, torch.Tensor]]:
        """ Yields (indices, images, labels) in order. """
        for start in range(0, len(self), batch_size):
            idx = torch.arange(start, min(start + batch_size, len(self)))
            yield idx, self.images[idx], self.labels[idx]


def require_nonempty(ds: Dataset, what: str = 'dataset'):
    if ds is None or len(ds) == 0:
        raise DatasetError(f'Empty {what}.')


def save_dataset(ds: Dataset, directory: str):
    os.makedirs(directory, exist_ok=True)
    save_tensorfile(os.path.join(directory, 'images.rtf'), ds.images)
    save_tensorfile(os.path.join(directory, 'labels.rtf'), ds.labels.float())
    if ds.splits is not None:
        save_tensorfile(os.path.join(directory, 'splits.rtf'), ds.splits.float())
    write_manifest(os.path.join(directory, 'manifest.txt'), {**ds.manifest, 'num_classes': ds.num_classes})


def load_dataset(directory: str) -> Dataset:
    manifest = read_manifest(os.path.join(directory, 'manifest.txt'))
    splits_path = os.path.join(directory, 'splits.rtf')
    splits = load_tensorfile(splits_path).long() if os.path.exists(splits_path) else None
    num_classes = int(manifest.pop('num_classes'))
    return Dataset(
        images=load_tensorfile(os.path.join(directory, 'images.rtf')),
        labels=load_tensorfile(os.path.join(directory, 'labels.rtf')).long(),
        num_classes=num_classes,
        manifest=manifest,
        splits=splits,
    )
