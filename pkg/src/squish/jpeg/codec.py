""" Differentiable JPEG (no chroma subsampling, no entropy coding).

The forward path is rgb -> YCbCr -> level shift -> 8x8 block DCT -> quantize / dequantize
-> IDCT -> rgb -> clamp. The rounding in the quantizer is swapped according to the
configured relaxation, everything else is shared with the integer reference path so that
'ste' mode matches the reference bit for bit.
"""
import logging
from dataclasses import dataclass

import torch
import torch.nn as nn
from simple_parsing.helpers import Serializable

from squish.autodiff import clamp_ste
from squish.common.config import check
from .color import rgb_to_ycbcr, ycbcr_to_rgb
from .dct import block_dct8, block_idct8, blockify, pad_to_blocks, unblockify
from .quantize import quantize_relaxed
from .tables import quality_to_tables

_logger = logging.getLogger(__name__)

RELAXATIONS = ('cubic', 'ste')


@dataclass
class JpegCfg(Serializable):
    """
    Attributes:
        quality: libjpeg quality factor, 1..100.
        relaxation: Rounding used on the differentiable path, 'cubic' or 'ste'.
        defense_iterations: Number of times the codec is applied by the defense.
    """
    quality: int = 50
    relaxation: str = 'cubic'
    defense_iterations: int = 1

    def validate(self):
        check(isinstance(self.quality, int) and 1 <= self.quality <= 100,
              'quality', f'must be an integer in [1, 100], got {self.quality!r}')
        check(self.relaxation in RELAXATIONS,
              'relaxation', f'must be one of {RELAXATIONS}, got {self.relaxation!r}')
        check(self.defense_iterations >= 1,
              'defense_iterations', f'must be >= 1, got {self.defense_iterations}')


def _jpeg_single(x: torch.Tensor, quality: int, relaxation: str) -> torch.Tensor:
    assert x.dim() == 4 and x.shape[1] == 3, f'Expected [B,3,H,W] input, got {tuple(x.shape)}'
    h, w = x.shape[-2:]
    tables = quality_to_tables(quality).stacked(x.dtype).view(1, 3, 1, 1, 8, 8)

    y = rgb_to_ycbcr(pad_to_blocks(x)) * 255. - 128.
    coeffs = block_dct8(blockify(y))
    coeffs = quantize_relaxed(coeffs, tables, relaxation)
    y = unblockify(block_idct8(coeffs))
    out = ycbcr_to_rgb((y + 128.) / 255.)[..., :h, :w]

    if relaxation == 'ste':
        return clamp_ste(out, 0., 1.)
    return out.clamp(0., 1.)


def jpeg_forward(x: torch.Tensor, cfg: JpegCfg, iterations: int = None) -> torch.Tensor:
    """ Differentiable JPEG round trip, applied `iterations` (default cfg.defense_iterations) times. """
    iterations = cfg.defense_iterations if iterations is None else iterations
    for _ in range(iterations):
        x = _jpeg_single(x, cfg.quality, cfg.relaxation)
    return x


def jpeg_reference(x: torch.Tensor, cfg: JpegCfg, iterations: int = None) -> torch.Tensor:
    """ Integer-rounding JPEG round trip, no gradient. Parity oracle for `jpeg_forward`. """
    iterations = cfg.defense_iterations if iterations is None else iterations
    with torch.no_grad():
        x = x.detach()
        for _ in range(iterations):
            x = _jpeg_single(x, cfg.quality, 'exact')
    return x


class JpegCodec(nn.Module):
    """ JPEG defense as a codec module: `reconstruct` is one pass, `forward` applies the
    configured number of defense iterations.
    """

    def __init__(self, cfg: JpegCfg = None):
        super().__init__()
        self.cfg = cfg or JpegCfg()
        self.cfg.validate()
        self.defense_iterations = self.cfg.defense_iterations
        _logger.debug(f'JpegCodec quality={self.cfg.quality} relaxation={self.cfg.relaxation}')

    def reconstruct(self, x: torch.Tensor) -> torch.Tensor:
        return _jpeg_single(x, self.cfg.quality, self.cfg.relaxation)

    def reference(self, x: torch.Tensor) -> torch.Tensor:
        return jpeg_reference(x, self.cfg)

    def forward(self, x: torch.Tensor, iterations: int = None) -> torch.Tensor:
        iterations = self.defense_iterations if iterations is None else iterations
        for _ in range(iterations):
            x = self.reconstruct(x)
        return x

    def extra_repr(self):
        return f'quality={self.cfg.quality}, relaxation={self.cfg.relaxation}, iterations={self.defense_iterations}'
