""" Training loops for the classifier f, the learned codec g and the surrogate g'.

All loops are single-threaded and bit-reproducible per seed: parameter init happens inside
a forked RNG seeded from the config, and shuffling uses a dedicated generator.
"""
import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F
from simple_parsing.helpers import Serializable
from torch.utils.data import DataLoader, TensorDataset

from squish.autodiff import softmax_cross_entropy
from squish.common.config import TrainCfg, check
from squish.common.epsilon import parse_epsilon
from squish.common.random import make_generator, uniform_like
from squish.data import Dataset, require_nonempty
from .classifier import Classifier, predict
from .codec import CodecCfg, LearnedCodec
from .losses import distortion_loss, extract_patches, realism_loss
from .surrogate import SurrogatePurifier

_logger = logging.getLogger(__name__)


@dataclass
class SurrogateCfg(Serializable):
    """ Surrogate purifier training recipe.

    Attributes:
        epochs: Training epochs.
        lr: Adam learning rate.
        lr_step: StepLR step size in epochs.
        lr_gamma: StepLR decay.
        batch_size: Batch size.
        seed: Init / shuffle / noise seed.
        noise_passes: Noisy passes per batch, followed by one clean pass.
        noise_magnitude: Uniform noise half-width, rational string.
        add_noise: Disable to train on clean passes only.
        width: U-Net base width.
    """
    epochs: int = 20
    lr: float = 1e-3
    lr_step: int = 5
    lr_gamma: float = 0.1
    batch_size: int = 64
    seed: int = 0
    noise_passes: int = 3
    noise_magnitude: str = '8/255'
    add_noise: bool = True
    width: int = 16

    def validate(self):
        check(self.epochs >= 0, 'epochs', f'must be >= 0, got {self.epochs}')
        check(self.lr >= 0, 'lr', f'must be >= 0, got {self.lr}')
        check(self.lr_step >= 0, 'lr_step', f'must be >= 0, got {self.lr_step}')
        check(self.batch_size >= 1, 'batch_size', 'must be >= 1')
        check(self.noise_passes >= 0, 'noise_passes', 'must be >= 0')
        parse_epsilon(self.noise_magnitude, 'noise_magnitude')


@dataclass
class TrainHistory:
    """ Per-epoch metrics of one training run. """
    loss: List[float] = field(default_factory=list)
    accuracy: List[float] = field(default_factory=list)
    distortion: List[float] = field(default_factory=list)
    realism: List[float] = field(default_factory=list)
    initial_loss: Optional[float] = None

    def to_dict(self):
        return {k: v for k, v in asdict(self).items() if v is not None and v != []}


def _init_model(builder: Callable[[], nn.Module], seed: int) -> nn.Module:
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        return builder()


def _loader(dataset: Dataset, batch_size: int, seed: int) -> DataLoader:
    return DataLoader(
        TensorDataset(dataset.images, dataset.labels),
        batch_size=batch_size,
        shuffle=True,
        generator=make_generator(seed),
    )


def _optimizer(model: nn.Module, lr: float, lr_step: int, lr_gamma: float):
    optimizer = torch.optim.Adam(model.parameters(), lr=lr)
    scheduler = torch.optim.lr_scheduler.StepLR(optimizer, lr_step, lr_gamma) if lr_step > 0 else None
    return optimizer, scheduler


def train_classifier(
        dataset: Dataset,
        cfg: TrainCfg = None,
        model: Optional[Classifier] = None,
        width: int = 16,
) -> Tuple[Classifier, TrainHistory]:
    """ Train f with softmax cross-entropy.

    Args:
        dataset: Training images, must be non-empty with labels < num_classes.
        cfg: Optimisation settings.
        model: Optional model to continue training, a fresh seeded one is built otherwise.
        width: Base width of a freshly built classifier.

    Returns:
        The trained classifier (eval mode) and its per-epoch loss / accuracy.
    """
    cfg = cfg or TrainCfg()
    cfg.validate()
    require_nonempty(dataset, 'training set')
    if model is None:
        model = _init_model(
            lambda: Classifier(dataset.num_classes, width=width, image_size=dataset.images.shape[-1]),
            cfg.seed)
    optimizer, scheduler = _optimizer(model, cfg.lr, cfg.lr_step, cfg.lr_gamma)
    loader = _loader(dataset, cfg.batch_size, cfg.seed)
    history = TrainHistory()

    for epoch in range(cfg.epochs):
        model.train()
        total_loss, correct = 0., 0
        for x, y in loader:
            optimizer.zero_grad()
            logits = model(x)
            loss = softmax_cross_entropy(logits, y)
            loss.backward()
            optimizer.step()
            total_loss += loss.item() * x.shape[0]
            correct += int((logits.argmax(1) == y).sum())
        if scheduler is not None:
            scheduler.step()
        history.loss.append(total_loss / len(dataset))
        history.accuracy.append(correct / len(dataset))
        _logger.info(
            f'classifier epoch {epoch + 1}/{cfg.epochs}: '
            f'loss {history.loss[-1]:.4f}, train acc {history.accuracy[-1]:.4f}')

    model.eval()
    return model, history


def accuracy(model: nn.Module, dataset: Dataset, batch_size: int = 256) -> float:
    require_nonempty(dataset)
    preds = predict(model, dataset.images, batch_size)
    return float((preds == dataset.labels).float().mean())


def codec_objective(codec: LearnedCodec, x: torch.Tensor, seed: int = 0):
    """ lambda * MSE(x, g(x)) + beta * MMD^2(patches of g(x), patches of x).

    Returns:
        (loss, distortion, realism), realism is None when beta is 0.
    """
    cfg = codec.cfg
    xhat = codec.reconstruct(x)
    dist = distortion_loss(x, xhat)
    loss = cfg.lambda_distortion * dist
    real = None
    if cfg.beta_realism > 0:
        fake_p = extract_patches(xhat, cfg.patch_size, cfg.realism_patches, seed=seed)
        real_p = extract_patches(x, cfg.patch_size, cfg.realism_patches, seed=seed + 1)
        real = realism_loss(fake_p, real_p)
        loss = loss + cfg.beta_realism * real
    return loss, dist, real


@torch.no_grad()
def mean_distortion(codec: nn.Module, dataset: Dataset, batch_size: int = 256) -> float:
    total = 0.
    for _, x, _ in dataset.batches(batch_size):
        total += float(distortion_loss(x, codec(x))) * x.shape[0]
    return total / len(dataset)


def train_codec(
        dataset: Dataset,
        codec_cfg: CodecCfg = None,
        cfg: TrainCfg = None,
        model: Optional[LearnedCodec] = None,
) -> Tuple[LearnedCodec, TrainHistory]:
    """ Train g on lambda * MSE + beta * MMD^2 (rate omitted, capacity set by the bottleneck). """
    codec_cfg = codec_cfg or CodecCfg()
    codec_cfg.validate()
    cfg = cfg or TrainCfg()
    cfg.validate()
    require_nonempty(dataset, 'training set')
    if model is None:
        model = _init_model(lambda: LearnedCodec(codec_cfg), cfg.seed)
    optimizer, scheduler = _optimizer(model, cfg.lr, cfg.lr_step, cfg.lr_gamma)
    loader = _loader(dataset, cfg.batch_size, cfg.seed)
    history = TrainHistory(initial_loss=mean_distortion(model, dataset))

    step = 0
    for epoch in range(cfg.epochs):
        model.train()
        total_loss = total_dist = total_real = 0.
        for x, _ in loader:
            optimizer.zero_grad()
            loss, dist, real = codec_objective(model, x, seed=cfg.seed + 2 * step)
            loss.backward()
            optimizer.step()
            step += 1
            n = x.shape[0]
            total_loss += loss.item() * n
            total_dist += dist.item() * n
            total_real += (0. if real is None else real.item()) * n
        if scheduler is not None:
            scheduler.step()
        history.loss.append(total_loss / len(dataset))
        history.distortion.append(total_dist / len(dataset))
        history.realism.append(total_real / len(dataset))
        _logger.info(
            f'codec (lambda={codec_cfg.lambda_distortion}, beta={codec_cfg.beta_realism}) '
            f'epoch {epoch + 1}/{cfg.epochs}: loss {history.loss[-1]:.5f}, '
            f'mse {history.distortion[-1]:.5f}, mmd2 {history.realism[-1]:.5f}')

    model.eval()
    return model, history


def train_surrogate(
        codec: nn.Module,
        dataset: Dataset,
        cfg: SurrogateCfg = None,
) -> Tuple[SurrogatePurifier, TrainHistory]:
    """ Fit g' to mimic one pass of `codec` with an L1 loss.

    Each batch is used noise_passes times with uniform noise of half-width noise_magnitude
    added (clamped to [0,1]), then once clean.
    """
    cfg = cfg or SurrogateCfg()
    cfg.validate()
    require_nonempty(dataset, 'training set')
    if codec is None:
        raise ValueError('train_surrogate needs a codec to imitate.')
    model = _init_model(lambda: SurrogatePurifier(cfg.width), cfg.seed)
    optimizer, scheduler = _optimizer(model, cfg.lr, cfg.lr_step, cfg.lr_gamma)
    loader = _loader(dataset, cfg.batch_size, cfg.seed)
    noise_gen = make_generator(cfg.seed + 1)
    magnitude = float(parse_epsilon(cfg.noise_magnitude))
    passes = cfg.noise_passes if cfg.add_noise else 0
    history = TrainHistory()

    codec_fn = getattr(codec, 'reconstruct', codec)
    for epoch in range(cfg.epochs):
        model.train()
        total, count = 0., 0
        for x, _ in loader:
            inputs = [
                (x + uniform_like(x, -magnitude, magnitude, noise_gen)).clamp(0., 1.)
                for _ in range(passes)
            ] + [x]
            for x_in in inputs:
                with torch.no_grad():
                    target = codec_fn(x_in)
                optimizer.zero_grad()
                loss = F.l1_loss(model(x_in), target)
                loss.backward()
                optimizer.step()
                total += loss.item() * x.shape[0]
                count += x.shape[0]
        if scheduler is not None:
            scheduler.step()
        history.loss.append(total / max(count, 1))
        _logger.info(f'surrogate epoch {epoch + 1}/{cfg.epochs}: l1 {history.loss[-1]:.5f}')

    model.eval()
    return model, history


@torch.no_grad()
def surrogate_fidelity(surrogate: nn.Module, codec: nn.Module, dataset: Dataset, batch_size: int = 256):
    """ Held-out (L1(g'(x), g(x)), L1(x, g(x))). """
    codec_fn = getattr(codec, 'reconstruct', codec)
    fit = base = 0.
    for _, x, _ in dataset.batches(batch_size):
        target = codec_fn(x)
        fit += float(F.l1_loss(surrogate(x), target)) * x.shape[0]
        base += float(F.l1_loss(x, target)) * x.shape[0]
    return fit / len(dataset), base / len(dataset)
