""" JFIF full-range RGB <-> YCbCr on [0,1] images (chroma centred on 0.5). """
import numpy as np
import torch

_RGB_TO_YCBCR = np.array([
    [0.299, 0.587, 0.114],
    [-0.168736, -0.331264, 0.5],
    [0.5, -0.418688, -0.081312],
], dtype=np.float64)
# exact inverse of the forward matrix so the round trip is identity up to float error
_YCBCR_TO_RGB = np.linalg.inv(_RGB_TO_YCBCR)
_OFFSET = np.array([0., 0.5, 0.5])


def _apply(matrix: np.ndarray, x: torch.Tensor) -> torch.Tensor:
    m = torch.as_tensor(matrix, dtype=x.dtype)
    assert x.shape[-3] == 3, f'Expected 3 channels at dim -3, got shape {tuple(x.shape)}'
    return torch.einsum('ij,...jhw->...ihw', m, x)


def rgb_to_ycbcr(x: torch.Tensor) -> torch.Tensor:
    offset = torch.as_tensor(_OFFSET, dtype=x.dtype).view(3, 1, 1)
    return _apply(_RGB_TO_YCBCR, x) + offset


def ycbcr_to_rgb(x: torch.Tensor) -> torch.Tensor:
    offset = torch.as_tensor(_OFFSET, dtype=x.dtype).view(3, 1, 1)
    return _apply(_YCBCR_TO_RGB, x - offset)
