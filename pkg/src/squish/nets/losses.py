""" Distortion and realism objectives for codec training.

Realism is proxied by the unbiased squared maximum mean discrepancy between patch features
of reconstructions and of real images. Features are a fixed, seeded random projection of
each patch followed by a relu (equivalently a stride-patch random convolution), the RBF
bandwidth comes from the median heuristic on the pooled sample.
"""
from typing import Optional

import torch
import torch.nn.functional as F

from squish.common.errors import ShapeError
from squish.common.random import make_generator

FEATURE_DIM = 64
FEATURE_SEED = 0x5EED


def distortion_loss(x: torch.Tensor, xhat: torch.Tensor) -> torch.Tensor:
    """ Mean squared error. """
    if x.shape != xhat.shape:
        raise ShapeError(f'distortion_loss shapes differ: {tuple(x.shape)} vs {tuple(xhat.shape)}.')
    return F.mse_loss(xhat, x)


def extract_patches(
        images: torch.Tensor,
        patch_size: int = 8,
        max_patches: Optional[int] = None,
        seed: int = 0,
) -> torch.Tensor:
    """ Non-overlapping patches [N * P, C * patch_size^2], optionally a seeded random subset. """
    patches = F.unfold(images, kernel_size=patch_size, stride=patch_size)
    patches = patches.transpose(1, 2).reshape(-1, patches.shape[1])
    if max_patches is not None and patches.shape[0] > max_patches:
        idx = torch.randperm(patches.shape[0], generator=make_generator(seed))[:max_patches]
        patches = patches[idx]
    return patches


def patch_features(patches: torch.Tensor, feature_dim: int = FEATURE_DIM, seed: int = FEATURE_SEED) -> torch.Tensor:
    weight = torch.randn(patches.shape[1], feature_dim, generator=make_generator(seed))
    weight = weight.to(patches.dtype) / patches.shape[1] ** 0.5
    return torch.relu(patches @ weight)


def _sq_dists(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    # no sqrt, keeps the gradient defined at zero distance
    d = (a * a).sum(1, keepdim=True) + (b * b).sum(1)[None, :] - 2 * a @ b.T
    return d.clamp_min(0.)


def median_bandwidth(fx: torch.Tensor, fy: torch.Tensor) -> torch.Tensor:
    """ Median of the pooled off-diagonal squared distances. Detached. """
    with torch.no_grad():
        z = torch.cat([fx, fy]).detach()
        d = _sq_dists(z, z)
        n = z.shape[0]
        off = d[~torch.eye(n, dtype=torch.bool)]
        bw = off.median()
        return bw.clamp_min(1e-8)


def mmd2_unbiased(fx: torch.Tensor, fy: torch.Tensor, bandwidth: Optional[torch.Tensor] = None) -> torch.Tensor:
    """ Unbiased MMD^2 estimate with RBF kernel exp(-d / bandwidth).

    For equal sample sizes this is the U-statistic over pairs i != j of
    k(xi,xj) + k(yi,yj) - k(xi,yj) - k(xj,yi), which is exactly 0 for identical sets.
    """
    m, n = fx.shape[0], fy.shape[0]
    if m < 2 or n < 2:
        raise ValueError(f'MMD needs at least 2 samples per set, got {m} and {n}.')
    if bandwidth is None:
        bandwidth = median_bandwidth(fx, fy)
    kxx = torch.exp(-_sq_dists(fx, fx) / bandwidth)
    kyy = torch.exp(-_sq_dists(fy, fy) / bandwidth)
    kxy = torch.exp(-_sq_dists(fx, fy) / bandwidth)
    if m == n:
        h = kxx + kyy - kxy - kxy.T
        off = ~torch.eye(m, dtype=torch.bool)
        return h[off].sum() / (m * (m - 1))
    sxx = (kxx.sum() - kxx.diagonal().sum()) / (m * (m - 1))
    syy = (kyy.sum() - kyy.diagonal().sum()) / (n * (n - 1))
    return sxx + syy - 2 * kxy.mean()


def realism_loss(
        xhat_patches: torch.Tensor,
        real_patches: torch.Tensor,
        feature_dim: int = FEATURE_DIM,
        seed: int = FEATURE_SEED,
) -> torch.Tensor:
    """ MMD^2 between the feature distributions of reconstructed and real patches.

    Args:
        xhat_patches: [m, D] flattened patches of reconstructions (differentiable).
        real_patches: [n, D] flattened patches of real images.
        feature_dim: Random feature count.
        seed: Feature projection seed, fixed so the loss and the reporting metric agree.
    """
    if xhat_patches.shape[0] < 2 or real_patches.shape[0] < 2:
        raise ValueError(
            f'realism_loss needs at least 2 patches per set, got {xhat_patches.shape[0]} and {real_patches.shape[0]}.')
    if xhat_patches.shape[1] != real_patches.shape[1]:
        raise ShapeError(
            f'Patch sizes differ: {tuple(xhat_patches.shape)} vs {tuple(real_patches.shape)}.')
    fx = patch_features(xhat_patches, feature_dim, seed)
    fy = patch_features(real_patches, feature_dim, seed)
    return mmd2_unbiased(fx, fy)
