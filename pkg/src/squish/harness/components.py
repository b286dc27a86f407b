""" Train-or-load of every component an experiment needs, cached per run. """
import copy
import logging
import os
import threading
from dataclasses import replace
from typing import Dict, Optional

import torch.nn as nn

from squish.common.config import TrainCfg
from squish.data import (
    DataCfg,
    Dataset,
    gen_shapes,
    load_cifar10_binary,
    load_cifar10_dir,
    load_dataset,
    save_dataset,
)
from squish.jpeg import JpegCodec
from squish.nets import (
    CodecCfg,
    DefendedPipeline,
    IdentityCodec,
    LearnedCodec,
    PixelQuantizer,
    load_checkpoint,
    save_checkpoint,
    train_classifier,
    train_codec,
    train_surrogate,
)
from .config import DefenseCfg, ExperimentCfg

_logger = logging.getLogger(__name__)


def load_data(cfg: DataCfg, seed: int = 0) -> Dataset:
    """ Dataset from the RTF1 cache when present, otherwise generated / read (and cached). """
    cfg.validate()
    if cfg.cache_dir and os.path.exists(os.path.join(cfg.cache_dir, 'manifest.txt')):
        _logger.info(f'Loading cached dataset from {cfg.cache_dir}')
        return load_dataset(cfg.cache_dir)
    if cfg.source == 'shapes':
        ds = gen_shapes(replace(cfg.shapes, seed=seed))
    elif os.path.isdir(cfg.path):
        ds = load_cifar10_dir(cfg.path, seed)
    else:
        ds = load_cifar10_binary(cfg.path)
    if cfg.cache_dir:
        save_dataset(ds, cfg.cache_dir)
        _logger.info(f'Cached dataset to {cfg.cache_dir}')
    return ds


def codec_key(cfg: CodecCfg) -> str:
    # defense_iterations does not change the trained weights
    return (
        f'codec_l{cfg.lambda_distortion:g}_b{cfg.beta_realism:g}_L{cfg.quality_levels}'
        f'_z{cfg.latent_channels}_c{cfg.hidden_channels}'
    )


def with_iterations(codec: nn.Module, iterations: int) -> nn.Module:
    """ Shallow copy sharing weights, applying the codec `iterations` times. """
    if getattr(codec, 'defense_iterations', 1) == iterations:
        return codec
    out = copy.copy(codec)
    out.defense_iterations = iterations
    return out


class Components:
    """ Lazily built dataset, classifier, codecs and surrogates of one experiment.

    Checkpoints go to `<out_dir>/checkpoints/<name>` and are reused on later runs.
    Thread-safe, but `prepare` should run before cells are dispatched to workers so
    training happens once, in order.
    """

    def __init__(self, cfg: ExperimentCfg):
        self.cfg = cfg
        self._lock = threading.RLock()
        self._dataset: Optional[Dataset] = None
        self._classifier: Optional[nn.Module] = None
        self._codecs: Dict[str, LearnedCodec] = {}
        self._surrogates: Dict[str, nn.Module] = {}

    def checkpoint_dir(self, name: str) -> str:
        return os.path.join(self.cfg.out_dir, 'checkpoints', name)

    @property
    def dataset(self) -> Dataset:
        with self._lock:
            if self._dataset is None:
                self._dataset = load_data(self.cfg.data, self.cfg.seed)
            return self._dataset

    @property
    def train_set(self) -> Dataset:
        return self.dataset.split('train')

    @property
    def eval_set(self) -> Dataset:
        return self.dataset.split('test').head(self.cfg.data.eval_size)

    @property
    def sanity_set(self) -> Dataset:
        return self.dataset.split('test').head(self.cfg.data.sanity_size)

    @property
    def classifier(self) -> nn.Module:
        with self._lock:
            if self._classifier is None:
                path = self.cfg.classifier_checkpoint or self.checkpoint_dir('classifier')
                if os.path.exists(os.path.join(path, 'manifest.txt')):
                    _logger.info(f'Loading classifier from {path}')
                    self._classifier = load_checkpoint(path)
                else:
                    train_cfg = self.cfg.classifier_train
                    model, _ = train_classifier(self.train_set, train_cfg, width=self.cfg.classifier_width)
                    save_checkpoint(model, path, seed=train_cfg.seed, epoch=train_cfg.epochs)
                    self._classifier = model
            return self._classifier

    def codec(self, codec_cfg: CodecCfg, checkpoint: Optional[str] = None, train_cfg: TrainCfg = None) -> LearnedCodec:
        key = checkpoint or codec_key(codec_cfg)
        with self._lock:
            if key not in self._codecs:
                path = checkpoint or self.checkpoint_dir(key)
                if os.path.exists(os.path.join(path, 'manifest.txt')):
                    _logger.info(f'Loading codec from {path}')
                    model = load_checkpoint(path)
                else:
                    train_cfg = train_cfg or self.cfg.codec_train
                    model, _ = train_codec(self.train_set, codec_cfg, train_cfg)
                    save_checkpoint(model, path, seed=train_cfg.seed, epoch=train_cfg.epochs)
                self._codecs[key] = model
            return with_iterations(self._codecs[key], codec_cfg.defense_iterations)

    def surrogate(self, label: str, codec: nn.Module) -> nn.Module:
        with self._lock:
            if label not in self._surrogates:
                path = self.checkpoint_dir(f'surrogate_{label}')
                if os.path.exists(os.path.join(path, 'manifest.txt')):
                    model = load_checkpoint(path)
                else:
                    model, _ = train_surrogate(codec, self.train_set, self.cfg.surrogate)
                    save_checkpoint(model, path, seed=self.cfg.surrogate.seed, epoch=self.cfg.surrogate.epochs)
                self._surrogates[label] = model
            return self._surrogates[label]

    def defense(self, defense_cfg: DefenseCfg) -> DefendedPipeline:
        kind = defense_cfg.kind
        assert kind in _defense_factories, \
            f'Unrecognized defense kind: {kind}. Must be one of {list(_defense_factories.keys())}.'
        codec = _defense_factories[kind](self, defense_cfg)
        return DefendedPipeline(
            self.classifier,
            codec,
            gradient_oracle=defense_cfg.gradient_oracle,
            name=defense_cfg.label,
        )

    def codec_family(self, defense_cfg: DefenseCfg, betas) -> Dict[float, nn.Module]:
        """ Sibling codecs of a learned-codec defense differing only in beta. """
        assert defense_cfg.kind == 'codec', 'codec families only exist for learned codec defenses'
        family = {}
        for beta in sorted(set(betas) | {defense_cfg.codec.beta_realism}):
            if beta == defense_cfg.codec.beta_realism:
                family[beta] = self.codec(defense_cfg.codec, defense_cfg.checkpoint)
            else:
                family[beta] = self.codec(replace(defense_cfg.codec, beta_realism=beta))
        return family

    def prepare(self):
        self.classifier
        for d in self.cfg.defenses:
            self.defense(d)
        return self


def _identity_codec(components, cfg):
    return IdentityCodec()


def _jpeg_codec(components, cfg):
    return JpegCodec(cfg.jpeg)


def _learned_codec(components, cfg):
    return components.codec(cfg.codec, cfg.checkpoint)


def _quantize_codec(components, cfg):
    return PixelQuantizer(cfg.quantize_levels, straight_through=cfg.straight_through)


_defense_factories = {
    'identity': _identity_codec,
    'jpeg': _jpeg_codec,
    'codec': _learned_codec,
    'quantize': _quantize_codec,
}
