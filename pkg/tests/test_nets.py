import math

import pytest
import torch

from squish.autodiff import Tape
from squish.common.config import TrainCfg
from squish.common.errors import CheckpointError, ConfigError, ShapeError
from squish.nets import (
    Classifier,
    CodecCfg,
    DefendedPipeline,
    IdentityCodec,
    LearnedCodec,
    PixelQuantizer,
    SurrogateCfg,
    SurrogatePurifier,
    distortion_loss,
    extract_patches,
    load_checkpoint,
    load_state_into,
    mmd2_unbiased,
    patch_features,
    predict,
    realism_loss,
    save_checkpoint,
    surrogate_fidelity,
    train_classifier,
    train_codec,
    train_surrogate,
)

_small_codec = dict(latent_channels=2, hidden_channels=4, realism_patches=16, patch_size=4)


def _input_grad(module, x):
    with Tape() as tape:
        xw = tape.watch(x)
        grads = tape.backward(module(xw).sum())
    return grads[xw.node_id]


def test_classifier_shapes(tiny_classifier, batch):
    x, _ = batch
    assert tiny_classifier(x).shape == (8, 10)
    with pytest.raises(ShapeError):
        tiny_classifier(torch.zeros(2, 3, 32, 32))
    with pytest.raises(ShapeError):
        tiny_classifier(torch.zeros(3, 16, 16))


def test_predict_is_batch_size_invariant(tiny_classifier, tiny_shapes):
    full = predict(tiny_classifier, tiny_shapes.images, batch_size=64)
    assert full.shape == (40,)
    logits = tiny_classifier(tiny_shapes.images)
    assert torch.equal(full, logits.argmax(1))
    assert predict(tiny_classifier, tiny_shapes.images[:0]).shape == (0,)


def test_pixel_quantizer_gradients():
    x = torch.rand(2, 3, 8, 8, generator=torch.Generator().manual_seed(0))
    hard = PixelQuantizer(levels=4)
    out = hard(x)
    assert torch.allclose(out * 3, (out * 3).round())
    assert torch.equal(_input_grad(hard, x), torch.zeros_like(x))
    soft = PixelQuantizer(levels=4, straight_through=True)
    assert torch.equal(soft(x), out)
    assert torch.allclose(_input_grad(soft, x), torch.ones_like(x))


def test_identity_codec_pipeline(tiny_classifier, batch):
    x, _ = batch
    pipeline = DefendedPipeline(tiny_classifier)
    assert isinstance(pipeline.codec, IdentityCodec)
    assert torch.equal(pipeline(x), tiny_classifier(x))
    assert pipeline.defense_iterations == 1
    with pytest.raises(AssertionError):
        DefendedPipeline(tiny_classifier, gradient_oracle='magic')


def test_learned_codec_forward_and_gradient():
    codec = LearnedCodec(CodecCfg(quality_levels=4, **_small_codec))
    x = torch.rand(2, 3, 16, 16, generator=torch.Generator().manual_seed(0))
    out = codec(x)
    assert out.shape == x.shape
    assert float(out.min()) >= 0. and float(out.max()) <= 1.
    z = codec.quantize(codec.encode(x))
    assert z.shape == (2, 2, 4, 4)
    assert torch.allclose(z * 3, (z * 3).round())
    g = _input_grad(codec, x)
    assert torch.isfinite(g).all() and g.abs().sum() > 0
    assert torch.equal(codec(x, iterations=2), codec.reconstruct(codec.reconstruct(x)))


@pytest.mark.parametrize('kwargs', [
    dict(lambda_distortion=0., beta_realism=0.),
    dict(beta_realism=-1.),
    dict(beta_realism=math.nan),
    dict(lambda_distortion=math.inf),
    dict(quality_levels=1),
    dict(defense_iterations=0),
])
def test_codec_cfg_validation(kwargs):
    with pytest.raises(ConfigError):
        CodecCfg(**kwargs).validate()


def test_mmd_is_zero_for_identical_sets():
    f = torch.randn(32, 8, generator=torch.Generator().manual_seed(0))
    assert float(mmd2_unbiased(f, f.clone())) == 0.
    g = torch.randn(32, 8, generator=torch.Generator().manual_seed(1)) + 3.
    assert float(mmd2_unbiased(f, g)) > 0.1
    # unequal sizes use the general unbiased estimator
    assert float(mmd2_unbiased(f, g[:20])) > 0.1
    with pytest.raises(ValueError):
        mmd2_unbiased(f[:1], g)


def test_realism_loss_is_differentiable():
    images = torch.rand(4, 3, 16, 16, generator=torch.Generator().manual_seed(0))
    patches = extract_patches(images, patch_size=4)
    assert patches.shape == (64, 48)
    assert extract_patches(images, patch_size=4, max_patches=10).shape == (10, 48)
    assert patch_features(patches).shape == (64, 64)
    with Tape() as tape:
        fake = tape.watch(patches * 0.5)
        grads = tape.backward(realism_loss(fake, patches))
    assert grads[fake.node_id].abs().sum() > 0
    with pytest.raises(ShapeError):
        distortion_loss(images, images[:2])


@pytest.mark.parametrize('build', [
    lambda: Classifier(num_classes=10, width=4, image_size=16),
    lambda: LearnedCodec(CodecCfg(beta_realism=0.5, **_small_codec)),
    lambda: SurrogatePurifier(width=4),
])
def test_checkpoint_round_trip(tmp_path, build):
    torch.manual_seed(3)
    model = build().eval()
    save_checkpoint(model, tmp_path / 'ckpt', seed=3, epoch=2)
    loaded = load_checkpoint(tmp_path / 'ckpt')
    assert type(loaded) is type(model)
    assert not loaded.training
    x = torch.rand(2, 3, 16, 16)
    assert torch.equal(loaded(x), model(x))


def test_checkpoint_mismatch(tmp_path):
    save_checkpoint(Classifier(width=4, image_size=16), tmp_path / 'c')
    with pytest.raises(CheckpointError):
        load_state_into(SurrogatePurifier(width=4), tmp_path / 'c')
    with pytest.raises(CheckpointError):
        load_state_into(Classifier(width=8, image_size=16), tmp_path / 'c')
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / 'missing')
    (tmp_path / 'c' / 'head.weight.rtf').write_bytes(b'RTF1')
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / 'c')


def test_train_classifier_is_reproducible(tiny_shapes):
    cfg = TrainCfg(epochs=2, batch_size=8, seed=5)
    a, hist = train_classifier(tiny_shapes, cfg, width=4)
    b, _ = train_classifier(tiny_shapes, cfg, width=4)
    assert len(hist.loss) == 2 and len(hist.accuracy) == 2
    for (ka, va), (kb, vb) in zip(a.state_dict().items(), b.state_dict().items()):
        assert ka == kb and torch.equal(va, vb)
    assert not a.training


def test_train_codec_history(tiny_shapes):
    codec, hist = train_codec(
        tiny_shapes, CodecCfg(beta_realism=0.5, **_small_codec), TrainCfg(epochs=2, batch_size=16))
    assert hist.initial_loss is not None
    assert len(hist.distortion) == 2 and len(hist.realism) == 2
    assert all(r != 0. for r in hist.realism)
    assert set(hist.to_dict()) == {'loss', 'distortion', 'realism', 'initial_loss'}


def test_train_surrogate(tiny_shapes):
    codec = PixelQuantizer(levels=4)
    surrogate, hist = train_surrogate(codec, tiny_shapes, SurrogateCfg(epochs=1, batch_size=16, width=4))
    assert len(hist.loss) == 1
    assert surrogate(tiny_shapes.images[:2]).shape == (2, 3, 16, 16)
    fit, base = surrogate_fidelity(surrogate, codec, tiny_shapes)
    assert fit >= 0. and base > 0.
    with pytest.raises(ValueError):
        train_surrogate(None, tiny_shapes)
    with pytest.raises(ConfigError):
        SurrogateCfg(noise_magnitude='2').validate()


@pytest.mark.slow
def test_surrogate_beats_the_identity_baseline(tiny_shapes):
    codec = PixelQuantizer(levels=4)
    surrogate, hist = train_surrogate(
        codec, tiny_shapes, SurrogateCfg(epochs=20, lr=3e-3, lr_step=0, batch_size=8, width=8))
    assert hist.loss[-1] < hist.loss[0]
    fit, base = surrogate_fidelity(surrogate, codec, tiny_shapes)
    assert fit < base
