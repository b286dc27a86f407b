""" Deterministic synthetic shapes dataset.

Ten classes: five parametric shapes (circle, square, triangle, cross, ring) times two texture
families (solid, striped). Each sample jitters position, scale, rotation, colours and adds
Gaussian background noise, all drawn from a numpy Generator seeded by the spec.
"""
import json
import logging
import math
from dataclasses import asdict, dataclass

import numpy as np
import torch

from simple_parsing.helpers import Serializable

from squish.common.errors import ConfigError
from .dataset import Dataset, hash_splits

_logger = logging.getLogger(__name__)

SHAPES = ('circle', 'square', 'triangle', 'cross', 'ring')
TEXTURES = ('solid', 'striped')
NUM_CLASSES = len(SHAPES) * len(TEXTURES)

_BASE_RADIUS = 9.0
_STRIPE_PERIOD = 4.0
_PROTO_FG = (0.85, 0.35, 0.2)
_PROTO_BG = (0.3, 0.45, 0.6)


@dataclass
class ShapesSpec(Serializable):
    """
    Attributes:
        samples_per_class: Images generated per class.
        seed: Generator seed, identical spec + seed gives bit-identical data and splits.
        image_size: Square image side.
        position_jitter: Max centre offset in pixels.
        scale_jitter: Relative radius jitter, radius = base * (1 + U(-s, s)).
        rotation_jitter: Max rotation in radians.
        color_jitter: Max per-channel colour offset for foreground and background.
        noise_sigma: Std of additive Gaussian noise.
    """
    samples_per_class: int = 500
    seed: int = 0
    image_size: int = 32
    position_jitter: float = 4.0
    scale_jitter: float = 0.2
    rotation_jitter: float = math.pi
    color_jitter: float = 0.35
    noise_sigma: float = 0.03

    @property
    def num_classes(self):
        return NUM_CLASSES

    def validate(self):
        if self.samples_per_class < 1:
            raise ConfigError('samples_per_class', 'must be >= 1')
        if self.noise_sigma < 0:
            raise ConfigError('noise_sigma', 'must be >= 0')
        for name in ('position_jitter', 'scale_jitter', 'rotation_jitter', 'color_jitter'):
            if getattr(self, name) < 0:
                raise ConfigError(name, 'must be >= 0')
        if self.image_size < 8:
            raise ConfigError('image_size', 'must be >= 8')

    @classmethod
    def prototypes(cls, **kwargs):
        """ No jitter, no noise: each class collapses to one image. """
        spec = cls(
            position_jitter=0.,
            scale_jitter=0.,
            rotation_jitter=0.,
            color_jitter=0.,
            noise_sigma=0.,
        )
        for k, v in kwargs.items():
            setattr(spec, k, v)
        return spec


def _shape_mask(shape: str, u: np.ndarray, v: np.ndarray, r: float) -> np.ndarray:
    if shape == 'circle':
        return u * u + v * v <= r * r
    elif shape == 'square':
        return np.maximum(np.abs(u), np.abs(v)) <= 0.8 * r
    elif shape == 'triangle':
        return (v >= -0.5 * r) & (v <= r - math.sqrt(3.) * np.abs(u))
    elif shape == 'cross':
        arm = 0.3 * r
        return ((np.abs(u) <= arm) & (np.abs(v) <= r)) | ((np.abs(v) <= arm) & (np.abs(u) <= r))
    elif shape == 'ring':
        d2 = u * u + v * v
        return (d2 <= r * r) & (d2 >= (0.55 * r) ** 2)
    assert False, f'Unknown shape {shape}'


def render_shape(
        shape: str,
        texture: str,
        size: int,
        center,
        radius: float,
        angle: float,
        fg,
        bg,
) -> np.ndarray:
    """ Rasterize one [3,size,size] float image. """
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64) + 0.5
    dx = xs - center[0]
    dy = center[1] - ys  # y up
    cos_a, sin_a = math.cos(angle), math.sin(angle)
    u = cos_a * dx + sin_a * dy
    v = -sin_a * dx + cos_a * dy

    mask = _shape_mask(shape, u, v, radius)
    fg = np.asarray(fg, dtype=np.float64)[:, None, None]
    bg = np.asarray(bg, dtype=np.float64)[:, None, None]
    if texture == 'striped':
        stripes = np.where(np.sin(2 * math.pi * u / _STRIPE_PERIOD) > 0, 1.0, 0.35)
        fg_img = fg * stripes[None]
    else:
        assert texture == 'solid', f'Unknown texture {texture}'
        fg_img = np.broadcast_to(fg, (3, size, size))
    return np.where(mask[None], fg_img, bg)


def class_of(label: int):
    return SHAPES[label % len(SHAPES)], TEXTURES[label // len(SHAPES)]


def gen_shapes(spec: ShapesSpec) -> Dataset:
    """ Generate the dataset; sample i has label i % 10, split by index hash (80/10/10). """
    spec.validate()
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    num = spec.samples_per_class * NUM_CLASSES
    size = spec.image_size
    images = np.empty((num, 3, size, size), dtype=np.float32)
    labels = np.arange(num, dtype=np.int64) % NUM_CLASSES

    for i in range(num):
        shape, texture = class_of(int(labels[i]))
        # draw every jitter term even when its range is 0 so streams stay aligned across specs
        offset = rng.uniform(-1., 1., size=2) * spec.position_jitter
        scale = 1. + rng.uniform(-1., 1.) * spec.scale_jitter
        angle = rng.uniform(-1., 1.) * spec.rotation_jitter
        fg_jitter = rng.uniform(-1., 1., size=3) * spec.color_jitter
        bg_jitter = rng.uniform(-1., 1., size=3) * spec.color_jitter
        noise = rng.standard_normal((3, size, size)) * spec.noise_sigma

        fg = np.clip(np.asarray(_PROTO_FG) + fg_jitter, 0., 1.)
        bg = np.clip(np.asarray(_PROTO_BG) + bg_jitter, 0., 1.)
        center = (size / 2 + offset[0], size / 2 + offset[1])
        radius = _BASE_RADIUS * size / 32 * scale
        img = render_shape(shape, texture, size, center, radius, angle, fg, bg)
        images[i] = np.clip(img + noise, 0., 1.)

    _logger.info(f'Generated {num} shapes images ({spec.samples_per_class}/class, seed {spec.seed}).')
    return Dataset(
        images=torch.from_numpy(images),
        labels=torch.from_numpy(labels),
        num_classes=NUM_CLASSES,
        manifest={'source': 'shapes', 'seed': str(spec.seed), 'spec': json.dumps(asdict(spec), sort_keys=True)},
        splits=hash_splits(num, spec.seed),
    )
