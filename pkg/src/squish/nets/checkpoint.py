""" Checkpoints: a directory with manifest.txt and one RTF1 file per state_dict entry. """
import json
import logging
import os
from typing import Dict, Optional

import torch
import torch.nn as nn

from squish.common.errors import CheckpointError, TensorFileError
from squish.common.manifest import read_manifest, write_manifest
from squish.data.tensorfile import load_tensorfile, save_tensorfile
from .classifier import Classifier
from .codec import CodecCfg, LearnedCodec
from .surrogate import SurrogatePurifier

_logger = logging.getLogger(__name__)

MANIFEST = 'manifest.txt'


def _build_classifier(config):
    return Classifier(**config)


def _build_codec(config):
    return LearnedCodec(CodecCfg.from_dict(config))


def _build_surrogate(config):
    return SurrogatePurifier(**config)


_arch_factories = {
    Classifier.arch: _build_classifier,
    LearnedCodec.arch: _build_codec,
    SurrogatePurifier.arch: _build_surrogate,
}


def _entry_file(name: str) -> str:
    return f'{name}.rtf'


def save_checkpoint(model: nn.Module, directory: str, seed: int = 0, epoch: int = 0, **extra):
    arch = getattr(model, 'arch', None)
    assert arch in _arch_factories, f'Cannot checkpoint {type(model).__name__}, arch {arch!r} is not registered.'
    os.makedirs(directory, exist_ok=True)
    state = model.state_dict()
    for name, tensor in state.items():
        save_tensorfile(os.path.join(directory, _entry_file(name)), tensor)
    write_manifest(os.path.join(directory, MANIFEST), {
        'arch': arch,
        'config': json.dumps(model.config(), sort_keys=True),
        'seed': seed,
        'epoch': epoch,
        'entries': ','.join(state.keys()),
        **extra,
    })
    _logger.info(f'Saved {arch} checkpoint to {directory} ({len(state)} tensors).')


def read_checkpoint_manifest(directory: str) -> Dict[str, str]:
    path = os.path.join(directory, MANIFEST)
    if not os.path.exists(path):
        raise CheckpointError(f'No checkpoint manifest at {path}.')
    try:
        manifest = read_manifest(path)
    except ValueError as e:
        raise CheckpointError(f'{path}: {e}') from None
    for key in ('arch', 'config', 'entries'):
        if key not in manifest:
            raise CheckpointError(f'{path}: missing key {key!r}.')
    return manifest


def load_state_into(model: nn.Module, directory: str, manifest: Optional[Dict[str, str]] = None):
    manifest = manifest or read_checkpoint_manifest(directory)
    arch = getattr(model, 'arch', None)
    if manifest['arch'] != arch:
        raise CheckpointError(f'Checkpoint {directory} holds arch {manifest["arch"]!r}, expected {arch!r}.')
    expected = model.state_dict()
    names = [n for n in manifest['entries'].split(',') if n]
    if set(names) != set(expected.keys()):
        missing = sorted(set(expected.keys()) - set(names))
        unexpected = sorted(set(names) - set(expected.keys()))
        raise CheckpointError(
            f'Checkpoint {directory} does not match {arch}: missing {missing}, unexpected {unexpected}.')
    state = {}
    for name in names:
        try:
            tensor = load_tensorfile(os.path.join(directory, _entry_file(name)))
        except (OSError, TensorFileError) as e:
            raise CheckpointError(f'Cannot read entry {name} of {directory}: {e}') from None
        if tensor.shape != expected[name].shape:
            raise CheckpointError(
                f'Entry {name} of {directory} has shape {tuple(tensor.shape)}, '
                f'expected {tuple(expected[name].shape)}.')
        state[name] = tensor.to(expected[name].dtype)
    model.load_state_dict(state)
    return model


def load_checkpoint(directory: str) -> nn.Module:
    """ Rebuild the model recorded in the manifest and load its weights (eval mode). """
    manifest = read_checkpoint_manifest(directory)
    arch = manifest['arch']
    if arch not in _arch_factories:
        raise CheckpointError(f'Unknown arch {arch!r} in {directory}, must be one of {list(_arch_factories.keys())}.')
    try:
        config = json.loads(manifest['config'])
        model = _arch_factories[arch](config)
    except (ValueError, TypeError) as e:
        raise CheckpointError(f'Invalid config in {directory}: {e}') from None
    load_state_into(model, directory, manifest)
    model.eval()
    return model
