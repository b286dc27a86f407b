import torch

from squish.nets.losses import extract_patches, realism_loss

MIN_PATCHES = 16
EVAL_SEED = 1234


@torch.no_grad()
def mmd_metric(
        images_a: torch.Tensor,
        images_b: torch.Tensor,
        seed: int = EVAL_SEED,
        patch_size: int = 8,
        max_patches: int = 1024,
) -> float:
    """ Squared MMD between patch feature distributions of two image sets.

    Same estimator and features as the codec realism loss. Patch subsets are drawn with a
    fixed evaluation seed.
    """
    pa = extract_patches(images_a, patch_size, max_patches, seed=seed)
    pb = extract_patches(images_b, patch_size, max_patches, seed=seed + 1)
    if pa.shape[0] < MIN_PATCHES or pb.shape[0] < MIN_PATCHES:
        raise ValueError(
            f'mmd_metric needs at least {MIN_PATCHES} patches per side, got {pa.shape[0]} and {pb.shape[0]}.')
    return float(realism_loss(pa, pb))
