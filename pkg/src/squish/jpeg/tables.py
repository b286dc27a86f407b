from dataclasses import dataclass

import torch

# JPEG Annex K base tables
_BASE_LUMA = [
    [16, 11, 10, 16, 24, 40, 51, 61],
    [12, 12, 14, 19, 26, 58, 60, 55],
    [14, 13, 16, 24, 40, 57, 69, 56],
    [14, 17, 22, 29, 51, 87, 80, 62],
    [18, 22, 37, 56, 68, 109, 103, 77],
    [24, 35, 55, 64, 81, 104, 113, 92],
    [49, 64, 78, 87, 103, 121, 120, 101],
    [72, 92, 95, 98, 112, 100, 103, 99],
]
_BASE_CHROMA = [
    [17, 18, 24, 47, 99, 99, 99, 99],
    [18, 21, 26, 66, 99, 99, 99, 99],
    [24, 26, 56, 99, 99, 99, 99, 99],
    [47, 66, 99, 99, 99, 99, 99, 99],
] + [[99] * 8] * 4


def base_luma_table() -> torch.Tensor:
    return torch.tensor(_BASE_LUMA, dtype=torch.int64)


def base_chroma_table() -> torch.Tensor:
    return torch.tensor(_BASE_CHROMA, dtype=torch.int64)


@dataclass(frozen=True)
class QuantTables:
    """ 8x8 integer quantization tables, entries in [1, 255]. """
    luma: torch.Tensor
    chroma: torch.Tensor

    def __post_init__(self):
        for name in ('luma', 'chroma'):
            t = getattr(self, name)
            assert t.shape == (8, 8), f'{name} table must be 8x8, got {tuple(t.shape)}'
            assert int(t.min()) >= 1 and int(t.max()) <= 255, f'{name} table entries must be in [1, 255]'

    def stacked(self, dtype=torch.float32) -> torch.Tensor:
        """ [3,8,8] table per YCbCr channel. """
        return torch.stack([self.luma, self.chroma, self.chroma]).to(dtype)


def quality_scale(quality: int) -> int:
    # libjpeg integer scaling
    return 5000 // quality if quality < 50 else 200 - 2 * quality


def quality_to_tables(quality: int) -> QuantTables:
    if not isinstance(quality, int) or not 1 <= quality <= 100:
        raise ValueError(f'JPEG quality must be an integer in [1, 100], got {quality!r}.')
    scale = quality_scale(quality)

    def _scaled(base):
        return ((base * scale + 50) // 100).clamp(1, 255)

    return QuantTables(luma=_scaled(base_luma_table()), chroma=_scaled(base_chroma_table()))
