""" Codecs g used as preprocessing defenses.

Every codec exposes `reconstruct(x)` (one compress / decompress pass), a
`defense_iterations` attribute and `forward(x, iterations=None)` which applies
`reconstruct` that many times.
"""
from dataclasses import dataclass

import torch
import torch.nn as nn
from simple_parsing.helpers import Serializable

from squish.autodiff import clamp_ste, round_half_away, round_ste
from squish.common.config import check


@dataclass
class CodecCfg(Serializable):
    """ Learned codec architecture and training objective weights.

    Attributes:
        lambda_distortion: Weight on the MSE distortion term.
        beta_realism: Weight on the MMD^2 realism term.
        quality_levels: Uniform quantization levels L of the [0,1] latent.
        defense_iterations: Codec applications performed by the defense.
        latent_channels: Latent channels Cz, with L controls the bottleneck capacity.
        hidden_channels: Width of the encoder / decoder.
        realism_patches: Patches per side sampled for the realism term each step.
        patch_size: Side of the square patches fed to the realism features.
    """
    lambda_distortion: float = 1.0
    beta_realism: float = 0.0
    quality_levels: int = 16
    defense_iterations: int = 1
    latent_channels: int = 8
    hidden_channels: int = 32
    realism_patches: int = 256
    patch_size: int = 8

    def validate(self):
        for name in ('lambda_distortion', 'beta_realism'):
            v = getattr(self, name)
            check(v == v and abs(v) != float('inf'), name, f'must be finite, got {v}')
            check(v >= 0, name, f'must be >= 0, got {v}')
        check(self.lambda_distortion > 0 or self.beta_realism > 0,
              'lambda_distortion', 'lambda_distortion and beta_realism are both 0, the objective is degenerate')
        check(self.quality_levels >= 2, 'quality_levels', f'must be >= 2, got {self.quality_levels}')
        check(self.defense_iterations >= 1, 'defense_iterations', f'must be >= 1, got {self.defense_iterations}')
        check(self.latent_channels >= 1, 'latent_channels', 'must be >= 1')
        check(self.hidden_channels >= 1, 'hidden_channels', 'must be >= 1')
        check(self.realism_patches >= 2, 'realism_patches', 'must be >= 2')
        check(self.patch_size >= 1, 'patch_size', 'must be >= 1')


class Codec(nn.Module):
    defense_iterations: int = 1

    def reconstruct(self, x: torch.Tensor) -> torch.Tensor:
        raise NotImplementedError

    def forward(self, x: torch.Tensor, iterations: int = None) -> torch.Tensor:
        iterations = self.defense_iterations if iterations is None else iterations
        for _ in range(iterations):
            x = self.reconstruct(x)
        return x


class IdentityCodec(Codec):
    arch = 'identity'

    def reconstruct(self, x):
        return x


class PixelQuantizer(Codec):
    """ Rounds pixels to `levels` uniform levels.

    With straight_through=False the rounding has its true derivative (zero almost
    everywhere), the textbook gradient-masking defense. straight_through=True uses the
    identity backward instead.
    """
    arch = 'pixel_quantizer'

    def __init__(self, levels: int = 8, straight_through: bool = False, defense_iterations: int = 1):
        super().__init__()
        assert levels >= 2, f'levels must be >= 2, got {levels}'
        self.levels = levels
        self.straight_through = straight_through
        self.defense_iterations = defense_iterations

    def reconstruct(self, x):
        scale = self.levels - 1
        if self.straight_through:
            return round_ste(x * scale) / scale
        return round_half_away(x * scale) / scale

    def extra_repr(self):
        return f'levels={self.levels}, straight_through={self.straight_through}'


class LearnedCodec(Codec):
    """ Conv autoencoder with a uniformly quantized latent.

    encode: two stride-2 conv stages, sigmoid to a [0,1] latent of shape [B,Cz,H/4,W/4]
    quantize: round to L levels, straight-through backward
    decode: two stride-2 transposed conv stages, clamped to [0,1]
    """
    arch = 'learned_codec'

    def __init__(self, cfg: CodecCfg = None):
        super().__init__()
        self.cfg = cfg or CodecCfg()
        self.cfg.validate()
        self.defense_iterations = self.cfg.defense_iterations
        c, cz = self.cfg.hidden_channels, self.cfg.latent_channels
        self.encoder = nn.Sequential(
            nn.Conv2d(3, c, 3, stride=2, padding=1),
            nn.ReLU(),
            nn.Conv2d(c, c, 3, padding=1),
            nn.ReLU(),
            nn.Conv2d(c, cz, 3, stride=2, padding=1),
        )
        self.decoder = nn.Sequential(
            nn.ConvTranspose2d(cz, c, 4, stride=2, padding=1),
            nn.ReLU(),
            nn.Conv2d(c, c, 3, padding=1),
            nn.ReLU(),
            nn.ConvTranspose2d(c, 3, 4, stride=2, padding=1),
        )

    def config(self):
        return self.cfg.to_dict()

    def encode(self, x):
        return torch.sigmoid(self.encoder(x))

    def quantize(self, z):
        scale = self.cfg.quality_levels - 1
        return round_ste(z * scale) / scale

    def decode(self, z):
        return clamp_ste(self.decoder(z), 0., 1.)

    def reconstruct(self, x):
        return self.decode(self.quantize(self.encode(x)))


def codec_forward(g: nn.Module, x: torch.Tensor, iterations: int = None) -> torch.Tensor:
    return g(x, iterations=iterations)
