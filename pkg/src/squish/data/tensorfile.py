""" RTF1 tensor files.

Layout: magic b'RTF1', u8 rank, rank x u32 little-endian dims, then the float32 little-endian
payload in row-major order. Used for checkpoints, dataset caches and landscape exports.
"""
import os
from typing import Union

import numpy as np
import torch

from squish.common.errors import TensorFileError

MAGIC = b'RTF1'
_MAX_RANK = 255
_MAX_DIM = 2**32 - 1


def encode_tensorfile(tensor: torch.Tensor) -> bytes:
    shape = tuple(tensor.shape)
    if len(shape) > _MAX_RANK:
        raise TensorFileError(f'Rank {len(shape)} exceeds the RTF1 limit of {_MAX_RANK}.')
    if any(d > _MAX_DIM for d in shape):
        raise TensorFileError(f'Dimension in {shape} exceeds the RTF1 u32 limit.')
    header = MAGIC + bytes([len(shape)]) + np.asarray(shape, dtype='<u4').tobytes()
    payload = np.ascontiguousarray(tensor.detach().cpu().numpy(), dtype='<f4').tobytes()
    return header + payload


def decode_tensorfile(data: bytes) -> torch.Tensor:
    if len(data) < 5 or data[:4] != MAGIC:
        raise TensorFileError(f'Bad magic {bytes(data[:4])!r}, expected {MAGIC!r}.')
    rank = data[4]
    header_size = 5 + 4 * rank
    if len(data) < header_size:
        raise TensorFileError(f'Short read: header needs {header_size} bytes, got {len(data)}.')
    shape = tuple(int(d) for d in np.frombuffer(data, dtype='<u4', count=rank, offset=5))
    count = int(np.prod(shape, dtype=np.int64)) if rank else 1
    expected = header_size + 4 * count
    if len(data) != expected:
        raise TensorFileError(
            f'Short read: shape {shape} needs {expected} bytes, got {len(data)}.'
            if len(data) < expected else
            f'Trailing bytes: shape {shape} needs {expected} bytes, got {len(data)}.')
    values = np.frombuffer(data, dtype='<f4', count=count, offset=header_size)
    return torch.from_numpy(values.astype(np.float32).reshape(shape))


def save_tensorfile(path: Union[str, os.PathLike], tensor: torch.Tensor):
    with open(path, 'wb') as f:
        f.write(encode_tensorfile(tensor))


def load_tensorfile(path: Union[str, os.PathLike]) -> torch.Tensor:
    with open(path, 'rb') as f:
        data = f.read()
    try:
        return decode_tensorfile(data)
    except TensorFileError as e:
        raise TensorFileError(f'{path}: {e}') from None
