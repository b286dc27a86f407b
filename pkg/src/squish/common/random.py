import random

import numpy as np
import torch

_SEED_MASK = 2**63 - 1


def derive_seed(seed: int, *keys: int) -> int:
    """ Seed for one item of a seeded stream, e.g. derive_seed(seed, image_index, restart).

    Keys are mixed with numpy's SeedSequence so distinct key tuples give unrelated seeds.
    """
    entropy = [int(seed) & _SEED_MASK] + [int(k) for k in keys]
    state = np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)[0]
    return int(state) & _SEED_MASK


def make_generator(seed: int) -> torch.Generator:
    generator = torch.Generator()
    generator.manual_seed(int(seed) & _SEED_MASK)
    return generator


def seed_everything(seed: int):
    random.seed(seed)
    np.random.seed(seed % 2**32)
    torch.manual_seed(seed & _SEED_MASK)


def uniform_like(x: torch.Tensor, low: float, high: float, generator: torch.Generator) -> torch.Tensor:
    u = torch.rand(x.shape, generator=generator, dtype=x.dtype)
    return u * (high - low) + low


def per_item_uniform(
        x: torch.Tensor,
        low: float,
        high: float,
        seed: int,
        indices=None,
        stream: int = 0,
) -> torch.Tensor:
    """ Uniform noise shaped like batch x, drawn from an independent generator per item.

    Item i uses derive_seed(seed, indices[i], stream), so the noise for an
    image does not depend on how images were batched.
    """
    if indices is None:
        indices = range(x.shape[0])
    out = torch.empty_like(x)
    for i, index in enumerate(indices):
        generator = make_generator(derive_seed(seed, int(index), stream))
        out[i] = uniform_like(x[i], low, high, generator)
    return out
