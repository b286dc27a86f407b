""" CIFAR-10 binary version loader.

Each record is 1 label byte followed by 3072 pixel bytes: the R, G then B planes, each a
row-major 32x32 image.
"""
import glob
import logging
import os
from typing import List, Sequence, Union

import numpy as np
import torch

from squish.common.errors import DatasetError
from .dataset import Dataset, SPLIT_IDS, hash_splits

_logger = logging.getLogger(__name__)

RECORD_SIZE = 1 + 3 * 32 * 32
NUM_CLASSES = 10


def _read_records(path: str) -> np.ndarray:
    data = np.fromfile(path, dtype=np.uint8)
    if data.size % RECORD_SIZE:
        raise DatasetError(
            f'{path}: size {data.size} bytes is not a multiple of the {RECORD_SIZE}-byte CIFAR-10 record.')
    return data.reshape(-1, RECORD_SIZE)


def load_cifar10_binary(path: Union[str, Sequence[str]]) -> Dataset:
    """ Load one or more CIFAR-10 binary files into a single Dataset (no split assignment). """
    paths = [path] if isinstance(path, (str, os.PathLike)) else list(path)
    records = [_read_records(p) for p in paths]
    records = np.concatenate(records, axis=0) if records else np.empty((0, RECORD_SIZE), np.uint8)
    labels = records[:, 0].astype(np.int64)
    if labels.size and labels.max() > NUM_CLASSES - 1:
        bad = int(np.argmax(labels > NUM_CLASSES - 1))
        raise DatasetError(f'Record {bad} has label byte {labels[bad]}, CIFAR-10 labels are 0..9.')
    images = records[:, 1:].reshape(-1, 3, 32, 32).astype(np.float32) / 255.
    if not len(labels):
        _logger.warning(f'No CIFAR-10 records found in {paths}.')
    return Dataset(
        images=torch.from_numpy(images),
        labels=torch.from_numpy(labels),
        num_classes=NUM_CLASSES,
        manifest={'source': 'cifar10', 'files': ';'.join(os.path.basename(str(p)) for p in paths)},
    )


def load_cifar10_dir(directory: str, seed: int = 0) -> Dataset:
    """ Load data_batch_*.bin (train, 10% held out as val by index hash) and test_batch.bin (test). """
    train_files: List[str] = sorted(glob.glob(os.path.join(directory, 'data_batch_*.bin')))
    test_file = os.path.join(directory, 'test_batch.bin')
    if not train_files and not os.path.exists(test_file):
        raise DatasetError(f'No CIFAR-10 binary files in {directory}.')
    parts = []
    split_parts = []
    if train_files:
        train = load_cifar10_binary(train_files)
        parts.append(train)
        split_parts.append(hash_splits(len(train), seed, fractions=(9, 1, 0)))
    if os.path.exists(test_file):
        test = load_cifar10_binary(test_file)
        parts.append(test)
        split_parts.append(torch.full((len(test),), SPLIT_IDS['test'], dtype=torch.long))
    return Dataset(
        images=torch.cat([p.images for p in parts]),
        labels=torch.cat([p.labels for p in parts]),
        num_classes=NUM_CLASSES,
        manifest={'source': 'cifar10', 'path': directory, 'seed': str(seed)},
        splits=torch.cat(split_parts),
    )
