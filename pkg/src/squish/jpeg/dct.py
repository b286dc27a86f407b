import math

import torch
import torch.nn.functional as F


def dct_matrix(dtype=torch.float32) -> torch.Tensor:
    """ Orthonormal 8-point DCT-II matrix, D[k, n] = a_k cos(pi (2n + 1) k / 16). """
    n = torch.arange(8, dtype=torch.float64)
    k = n[:, None]
    d = torch.cos(math.pi * (2 * n[None, :] + 1) * k / 16)
    d[0] *= math.sqrt(1 / 8)
    d[1:] *= math.sqrt(2 / 8)
    return d.to(dtype)


def block_dct8(blocks: torch.Tensor) -> torch.Tensor:
    """ 2D DCT-II over the trailing 8x8 dims. """
    d = dct_matrix(blocks.dtype)
    return d @ blocks @ d.T


def block_idct8(coeffs: torch.Tensor) -> torch.Tensor:
    d = dct_matrix(coeffs.dtype)
    return d.T @ coeffs @ d


def pad_to_blocks(x: torch.Tensor) -> torch.Tensor:
    """ Edge-replicate pad H and W up to multiples of 8. """
    h, w = x.shape[-2:]
    ph, pw = (-h) % 8, (-w) % 8
    if ph or pw:
        x = F.pad(x, (0, pw, 0, ph), mode='replicate')
    return x


def blockify(x: torch.Tensor) -> torch.Tensor:
    """ [B,C,H,W] -> [B,C,H/8,W/8,8,8] """
    b, c, h, w = x.shape
    assert h % 8 == 0 and w % 8 == 0, f'H and W must be multiples of 8, got {h}x{w}'
    return x.reshape(b, c, h // 8, 8, w // 8, 8).permute(0, 1, 2, 4, 3, 5)


def unblockify(blocks: torch.Tensor) -> torch.Tensor:
    b, c, nh, nw = blocks.shape[:4]
    return blocks.permute(0, 1, 2, 4, 3, 5).reshape(b, c, nh * 8, nw * 8)
