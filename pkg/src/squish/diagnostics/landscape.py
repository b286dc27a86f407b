""" Loss landscapes around an input along two random sign directions. """
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Tuple

import torch
import torch.nn as nn
from simple_parsing.helpers import Serializable

from squish.autodiff import softmax_cross_entropy
from squish.common.config import check
from squish.common.epsilon import parse_epsilon
from squish.common.random import derive_seed, make_generator
from squish.data import Dataset, require_nonempty

_logger = logging.getLogger(__name__)

DIRECTION_KIND = 'sign'


@dataclass
class LandscapeCfg(Serializable):
    """
    Attributes:
        epsilon: Extent of the grid along each direction.
        resolution: Odd grid side R.
        num_images: Images in the seeded subset the std is averaged over.
        seed: Subset and direction seed.
        workers: Threads evaluating images in parallel.
    """
    epsilon: str = '8/255'
    resolution: int = 21
    num_images: int = 32
    seed: int = 0
    workers: int = 1

    def validate(self):
        parse_epsilon(self.epsilon, 'epsilon')
        check(self.resolution >= 3 and self.resolution % 2 == 1, 'resolution',
              f'must be odd and >= 3, got {self.resolution}')
        check(self.num_images >= 0, 'num_images', 'must be >= 0')
        check(self.workers >= 1, 'workers', 'must be >= 1')


@dataclass
class LossLandscape:
    """
    Attributes:
        grid: [R,R] losses, grid[i, j] at x + a_i eps d1 + b_j eps d2.
        directions: (d1, d2), entries in {-1, +1}.
        extent: eps.
        resolution: R.
        clean_loss: Loss at x.
    """
    grid: torch.Tensor
    directions: Tuple[torch.Tensor, torch.Tensor]
    extent: float
    resolution: int
    clean_loss: float
    direction_kind: str = DIRECTION_KIND

    @property
    def center(self) -> float:
        c = self.resolution // 2
        return float(self.grid[c, c])


def _coords(resolution: int, dtype) -> torch.Tensor:
    # exact 0 at the center, -1 / +1 at the ends
    half = resolution // 2
    return (torch.arange(resolution, dtype=dtype) - half) / half


@torch.no_grad()
def sample_landscape(
        pipeline: nn.Module,
        x: torch.Tensor,
        y,
        epsilon,
        resolution: int = 21,
        seed: int = 0,
) -> LossLandscape:
    """ Cross-entropy of h over a resolution x resolution grid spanning [-eps, eps]^2.

    Cell (i, j) is the loss at clamp01(x + a_i * eps * d1 + b_j * eps * d2). Perturbed images are
    clamped to the valid pixel range before the defense sees them, so near saturated pixels the
    grid is flatter than the unclamped plane. The centre cell is the clean loss either way.

    Args:
        pipeline: h.
        x: One image [3,H,W] (or [1,3,H,W]).
        y: Its label.
        epsilon: Grid extent.
        resolution: Odd grid side.
        seed: Direction seed, d1 and d2 are uniform {-1,+1} per pixel.
    """
    if resolution < 3 or resolution % 2 == 0:
        raise ValueError(f'Landscape resolution must be odd and >= 3, got {resolution}.')
    eps = float(parse_epsilon(epsilon))
    x = x.reshape(1, *x.shape[-3:])
    generator = make_generator(seed)
    d1 = torch.randint(0, 2, x.shape[1:], generator=generator).to(x.dtype) * 2 - 1
    d2 = torch.randint(0, 2, x.shape[1:], generator=generator).to(x.dtype) * 2 - 1
    coords = _coords(resolution, x.dtype)
    labels = torch.full((resolution,), int(y), dtype=torch.long)

    def _losses(batch):
        return softmax_cross_entropy(pipeline(batch), labels, reduction='none')

    rows = []
    for a in coords:
        batch = x + a * eps * d1 + coords.view(-1, 1, 1, 1) * eps * d2
        rows.append(_losses(batch.clamp(0., 1.)))
    grid = torch.stack(rows)
    clean = _losses(x.expand(resolution, -1, -1, -1))[0]
    return LossLandscape(
        grid=grid,
        directions=(d1, d2),
        extent=eps,
        resolution=resolution,
        clean_loss=float(clean),
    )


def landscape_std(ls: LossLandscape) -> float:
    """ Population standard deviation over grid cells. """
    return float(ls.grid.double().std(unbiased=False))


def landscape_subset(dataset: Dataset, num_images: int, seed: int) -> torch.Tensor:
    generator = make_generator(seed)
    return torch.randperm(len(dataset), generator=generator)[:num_images]


def mean_landscape_std(
        pipeline: nn.Module,
        dataset: Dataset,
        cfg: LandscapeCfg = None,
        indices: Optional[torch.Tensor] = None,
) -> Tuple[float, List[LossLandscape]]:
    """ Mean landscape std over a seeded image subset, directions seeded per image index. """
    cfg = cfg or LandscapeCfg()
    cfg.validate()
    require_nonempty(dataset)
    if indices is None:
        indices = landscape_subset(dataset, cfg.num_images, cfg.seed)
    indices = [int(i) for i in indices]

    def _one(i):
        return sample_landscape(
            pipeline, dataset.images[i], dataset.labels[i], cfg.epsilon, cfg.resolution, derive_seed(cfg.seed, i))

    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            landscapes = list(pool.map(_one, indices))
    else:
        landscapes = [_one(i) for i in indices]
    stds = [landscape_std(ls) for ls in landscapes]
    mean_std = sum(stds) / len(stds) if stds else 0.
    _logger.info(f'landscape std over {len(stds)} images at eps={cfg.epsilon}: {mean_std:.4f}')
    return mean_std, landscapes
