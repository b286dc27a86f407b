from .codec import JpegCfg, JpegCodec, jpeg_forward, jpeg_reference, RELAXATIONS
from .color import rgb_to_ycbcr, ycbcr_to_rgb
from .dct import block_dct8, block_idct8, blockify, dct_matrix, pad_to_blocks, unblockify
from .quantize import quantize_relaxed
from .tables import QuantTables, quality_to_tables, quality_scale
