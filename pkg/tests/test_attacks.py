import pytest
import torch

from squish.attacks import (
    AttackBudget,
    ThreatModel,
    acm_attack,
    ara_search,
    black_box_transfer,
    bpda_surrogate_oracle,
    bpda_st_oracle,
    classifier_only_oracle,
    eot_wrap,
    fgsm,
    ifgsm,
    make_oracle,
    noise_gradient_oracle,
    pgd,
    project,
    random_noise_attack,
    true_wb_oracle,
)
from squish.common.errors import CheckpointError, ConfigError, OracleError, ShapeError, ThreatModelError
from squish.common.random import derive_seed, per_item_uniform
from squish.jpeg import JpegCfg, JpegCodec
from squish.nets import DefendedPipeline, IdentityCodec, PixelQuantizer, SurrogateCfg, train_surrogate

EPS = 8 / 255


def test_budget_step_size():
    assert AttackBudget(epsilon='8/255', steps=10).step_size == pytest.approx(2 / 255)
    assert AttackBudget(epsilon='8/255', steps=1).step_size == pytest.approx(8 / 255)
    assert AttackBudget(epsilon='8/255', alpha='1/255').step_size == pytest.approx(1 / 255)
    assert AttackBudget(epsilon='8/255').with_epsilon('16/255').epsilon == '16/255'


@pytest.mark.parametrize('kwargs', [
    dict(steps=0),
    dict(restarts=0),
    dict(eot_samples=0),
    dict(alpha='9/255'),
    dict(epsilon='-1/255'),
    dict(epsilon='eight'),
])
def test_budget_validation(kwargs):
    with pytest.raises(ConfigError):
        AttackBudget(**kwargs).validate()


def test_threat_model_order():
    assert ThreatModel.white_box.allows(ThreatModel.gray_box)
    assert ThreatModel.gray_box.allows('black_box')
    assert not ThreatModel.black_box.allows(ThreatModel.gray_box)
    assert ThreatModel.gray_box.allows_defense_forward
    assert not ThreatModel.gray_box.allows_defense_gradients


def test_project():
    x = torch.full((1, 3, 2, 2), 0.02)
    out = project(x + torch.tensor([-1., 0.01, 1.]).view(1, 3, 1, 1), x, EPS)
    assert float(out.min()) == 0.
    assert torch.allclose(out[0, 1], x[0, 1] + 0.01)
    assert float(out.max()) == pytest.approx(0.02 + EPS)
    with pytest.raises(ShapeError):
        project(x, x[0], EPS)


def test_fgsm_is_single_step_pgd(identity_pipeline, batch):
    x, y = batch
    oracle = true_wb_oracle(identity_pipeline)
    a = fgsm(identity_pipeline, oracle, x, y, '8/255')
    b = pgd(identity_pipeline, oracle, x, y, AttackBudget(epsilon='8/255', alpha='8/255', steps=1, random_start=False))
    assert torch.equal(a.x_adv, b.x_adv)
    assert a.linf_used.max().item() <= EPS + 1e-6


@pytest.mark.parametrize('seed', range(50))
def test_fgsm_is_optimal_for_linear_models(seed):
    shape = [(1, 2, 2), (3, 1, 2), (3, 2, 2)][seed % 3]
    d = shape[0] * shape[1] * shape[2]
    g = torch.Generator().manual_seed(seed)
    linear = torch.nn.Linear(d, 2)
    with torch.no_grad():
        linear.weight.copy_(torch.randn(2, d, generator=g))
        linear.bias.copy_(torch.randn(2, generator=g))
    pipeline = DefendedPipeline(torch.nn.Sequential(torch.nn.Flatten(), linear))
    oracle = true_wb_oracle(pipeline)
    # interior point so no pattern is clipped
    x = 0.25 + 0.5 * torch.rand((1,) + shape, generator=g)
    y = torch.randint(0, 2, (1,), generator=g)

    result = fgsm(pipeline, oracle, x, y, '8/255')

    patterns = ((torch.arange(2 ** d)[:, None] >> torch.arange(d)) & 1).float() * 2 - 1
    candidates = x + EPS * patterns.view((-1,) + shape)
    losses = oracle.loss(candidates, y.expand(2 ** d))
    best = patterns[losses.argmax()]
    assert torch.equal(torch.sign(result.x_adv - x).flatten(), best)
    assert float(oracle.loss(result.x_adv, y)[0]) == pytest.approx(float(losses.max()), rel=1e-5)


@pytest.mark.parametrize('seed', range(20))
def test_attacks_stay_in_the_ball(identity_pipeline, seed):
    g = torch.Generator().manual_seed(seed)
    x = torch.rand(4, 3, 16, 16, generator=g)
    # saturated pixels exercise the [0,1] clamp
    x[0, 0] = 0.
    x[1, 1] = 1.
    y = torch.randint(0, 10, (4,), generator=g)
    epsilon = ['0', '1/255', '8/255', '16/255', '64/255'][seed % 5]
    eps = float(AttackBudget(epsilon=epsilon).eps_fraction)
    kind = ['fgsm', 'ifgsm', 'pgd', 'noise'][seed % 4]
    budget = AttackBudget(epsilon=epsilon, steps=1 + seed % 3, restarts=1 + seed % 2, seed=seed)
    oracle = true_wb_oracle(identity_pipeline)
    if kind == 'fgsm':
        result = fgsm(identity_pipeline, oracle, x, y, epsilon)
    elif kind == 'ifgsm':
        result = ifgsm(identity_pipeline, oracle, x, y, budget)
    elif kind == 'pgd':
        result = pgd(identity_pipeline, oracle, x, y, budget, torch.arange(4))
    else:
        result = random_noise_attack(identity_pipeline, x, y, epsilon, seed=seed)
    assert (result.x_adv - x).abs().max().item() <= eps + 2 ** -20
    assert float(result.x_adv.min()) >= 0. and float(result.x_adv.max()) <= 1.


def test_ifgsm_is_pgd_without_random_start(identity_pipeline, batch):
    x, y = batch
    oracle = true_wb_oracle(identity_pipeline)
    budget = AttackBudget(epsilon='8/255', steps=4, restarts=3, random_start=True)
    a = ifgsm(identity_pipeline, oracle, x, y, budget)
    b = pgd(identity_pipeline, oracle, x, y, budget.updated(restarts=1, random_start=False))
    assert torch.equal(a.x_adv, b.x_adv)
    assert len(a.loss_trace) == 4


def test_pgd_respects_budget_and_is_reproducible(identity_pipeline, batch):
    x, y = batch
    budget = AttackBudget(epsilon='8/255', steps=5, restarts=2, seed=11, track_accuracy=True)
    idx = torch.arange(8)
    a = pgd(identity_pipeline, None, x, y, budget, idx)
    b = pgd(identity_pipeline, None, x, y, budget, idx)
    assert torch.equal(a.x_adv, b.x_adv)
    assert a.linf_used.max().item() <= EPS + 1e-6
    assert float(a.x_adv.min()) >= 0. and float(a.x_adv.max()) <= 1.
    assert len(a.loss_trace) == 10
    assert len(a.accuracy_trace) == 10
    assert all(n <= acc + 1e-9 for n, acc in zip(a.never_flipped_trace, a.accuracy_trace))
    assert a.flipped.shape == (8,)


def test_pgd_raises_loss(identity_pipeline, batch):
    x, y = batch
    oracle = true_wb_oracle(identity_pipeline)
    clean = oracle.loss(x, y)
    result = pgd(identity_pipeline, oracle, x, y, AttackBudget(epsilon='16/255', steps=10, random_start=False))
    assert result.final_loss.mean() > clean.mean()


def test_random_starts_do_not_depend_on_batching():
    x = torch.rand(6, 3, 4, 4)
    full = per_item_uniform(x, -EPS, EPS, seed=3, indices=range(6))
    part = per_item_uniform(x[2:4], -EPS, EPS, seed=3, indices=[2, 3])
    assert torch.equal(full[2:4], part)
    assert not torch.equal(full, per_item_uniform(x, -EPS, EPS, seed=3, indices=range(6), stream=1))


def test_bpda_st_equals_true_wb_on_identity(identity_pipeline, batch):
    x, y = batch
    la, ga = true_wb_oracle(identity_pipeline)(x, y)
    lb, gb = bpda_st_oracle(identity_pipeline)(x, y)
    lc, gc = classifier_only_oracle(identity_pipeline.classifier)(x, y)
    assert torch.equal(la, lb) and torch.equal(ga, gb)
    assert torch.equal(ga, gc)


def test_true_gradient_vanishes_through_hard_quantizer(tiny_classifier, batch):
    x, y = batch
    pipeline = DefendedPipeline(tiny_classifier, PixelQuantizer(levels=8))
    _, grad = true_wb_oracle(pipeline)(x, y)
    assert torch.equal(grad, torch.zeros_like(x))
    result = pgd(pipeline, None, x, y, AttackBudget(epsilon='8/255', random_start=False))
    assert torch.equal(result.x_adv, x)
    _, grad = bpda_st_oracle(pipeline)(x, y)
    assert grad.abs().sum() > 0


def test_oracle_threat_checks(identity_pipeline, batch):
    x, _ = batch
    with pytest.raises(ThreatModelError):
        make_oracle('true_wb', identity_pipeline, ThreatModel.gray_box)
    with pytest.raises(ThreatModelError):
        make_oracle('bpda_st', identity_pipeline, ThreatModel.black_box)
    with pytest.raises(OracleError):
        make_oracle('bpda_surrogate', identity_pipeline, ThreatModel.white_box)
    with pytest.raises(OracleError):
        make_oracle('nonsense', identity_pipeline)
    assert make_oracle('classifier_only', identity_pipeline, ThreatModel.black_box).tag == 'classifier_only'
    oracle = make_oracle('noise', identity_pipeline, ThreatModel.black_box, shape=x.shape, seed=0)
    assert oracle.pipeline is None


def test_noise_oracle(batch):
    x, y = batch
    oracle = noise_gradient_oracle(x.shape, seed=4)
    _, g1 = oracle(x, y)
    _, g2 = oracle(x, y)
    assert g1.shape == x.shape and not torch.equal(g1, g2)
    _, g3 = noise_gradient_oracle(x.shape, seed=4)(x, y)
    assert torch.equal(g1, g3)
    with pytest.raises(ShapeError):
        oracle(x[:2], y[:2])


def test_eot_wrap(identity_pipeline, batch):
    x, y = batch
    oracle = true_wb_oracle(identity_pipeline)
    assert eot_wrap(oracle, 1) is oracle
    wrapped = eot_wrap(oracle, 3)
    la, ga = oracle(x, y)
    lb, gb = wrapped(x, y)
    assert torch.allclose(la, lb) and torch.allclose(ga, gb, atol=1e-7)


def test_jpeg_pipeline_attack(tiny_classifier, batch):
    x, y = batch
    pipeline = DefendedPipeline(tiny_classifier, JpegCodec(JpegCfg(quality=50)))
    result = pgd(pipeline, None, x, y, AttackBudget(epsilon='8/255', steps=3))
    assert result.linf_used.max().item() <= EPS + 1e-6
    assert all(torch.isfinite(torch.tensor(result.loss_trace)))


def test_acm_and_transfer(identity_pipeline, batch):
    x, y = batch
    codec = PixelQuantizer(levels=4, straight_through=True)
    budget = AttackBudget(epsilon='8/255', steps=3)
    result = acm_attack(codec, x, budget)
    assert result.flipped is None
    assert result.linf_used.max().item() <= EPS + 1e-6
    result = acm_attack(codec, x, budget, y=y, classifier=identity_pipeline.classifier)
    assert result.flipped.shape == (8,)
    result = black_box_transfer(identity_pipeline.classifier, identity_pipeline, x, y, budget)
    assert result.linf_used.max().item() <= EPS + 1e-6


def test_random_noise_attack(identity_pipeline, batch):
    x, y = batch
    a = random_noise_attack(identity_pipeline, x, y, '8/255', seed=1)
    b = random_noise_attack(identity_pipeline, x, y, '8/255', seed=1)
    assert torch.equal(a.x_adv, b.x_adv)
    assert a.linf_used.max().item() <= EPS + 1e-6


def _family():
    codec = IdentityCodec()
    return {0.0: codec, 0.5: codec, 2.0: codec}


def test_ara_ties_pick_smallest_beta(tiny_classifier, batch):
    x, y = batch
    budget = AttackBudget(epsilon='8/255', steps=2)
    beta, result = ara_search(tiny_classifier, _family(), x, y, 0.0, [2.0, 0.5, 0.0], budget)
    assert beta == 0.0
    assert set(result.extra['ara_table']) == {0.0, 0.5, 2.0}
    assert result.extra['beta_star'] == 0.0


def test_ara_gray_box_excludes_defense_codec(tiny_classifier, batch):
    x, y = batch
    budget = AttackBudget(epsilon='8/255', steps=2)
    beta, result = ara_search(
        tiny_classifier, _family(), x, y, 0.0, [0.0, 0.5, 2.0], budget, ThreatModel.gray_box)
    assert beta == 0.5
    assert set(result.extra['ara_table']) == {0.5, 2.0}
    with pytest.raises(ThreatModelError):
        ara_search(tiny_classifier, _family(), x, y, 0.0, [0.0], budget, ThreatModel.gray_box)
    with pytest.raises(ThreatModelError):
        ara_search(tiny_classifier, _family(), x, y, 0.0, [0.5], budget, ThreatModel.black_box)


def test_ara_missing_codec(tiny_classifier, batch):
    x, y = batch
    with pytest.raises(CheckpointError):
        ara_search(tiny_classifier, _family(), x, y, 0.0, [0.0, 4.0], AttackBudget(steps=1))


def test_acm_needs_white_box(identity_pipeline, batch):
    x, y = batch
    codec = PixelQuantizer(levels=4, straight_through=True)
    budget = AttackBudget(epsilon='8/255', steps=2)
    for threat_model in (ThreatModel.gray_box, ThreatModel.black_box):
        with pytest.raises(ThreatModelError):
            acm_attack(codec, x, budget, threat_model=threat_model)
    result = black_box_transfer(
        identity_pipeline.classifier, identity_pipeline, x, y, budget, threat_model=ThreatModel.gray_box)
    assert result.flipped.shape == (8,)


def test_seed_keys_do_not_collide():
    assert derive_seed(7, 1, 0) != derive_seed(7, 0, 1)
    assert derive_seed(7, 2) != derive_seed(8, 1)
    assert derive_seed(7, 3) == derive_seed(7, 3)
    x = torch.zeros(2, 3, 4, 4)
    first = per_item_uniform(x, -EPS, EPS, seed=3, indices=[0, 1], stream=0)
    second = per_item_uniform(x, -EPS, EPS, seed=3, indices=[0, 1], stream=1)
    # image 1 of restart 0 and image 0 of restart 1 draw from different streams
    assert not torch.equal(first[1], second[0])


def test_noise_oracle_does_not_depend_on_batching(batch):
    x, y = batch
    _, full = noise_gradient_oracle(x.shape, seed=4, indices=range(8))(x, y)
    _, part = noise_gradient_oracle(x[3:6].shape, seed=4, indices=[3, 4, 5])(x[3:6], y[3:6])
    assert torch.equal(full[3:6], part)


def test_eot_shrinks_noise_variance(batch):
    x, y = batch
    variances = []
    for k in (1, 4, 16):
        _, grad = eot_wrap(noise_gradient_oracle(x.shape, seed=2), k)(x, y)
        variances.append(grad.var().item())
    assert variances[0] > 2 * variances[1] > 4 * variances[2]


def test_restarts_never_lower_the_final_loss(identity_pipeline, batch):
    x, y = batch
    idx = torch.arange(8)
    one = pgd(identity_pipeline, None, x, y, AttackBudget(epsilon='4/255', steps=2, restarts=1, seed=9), idx)
    three = pgd(identity_pipeline, None, x, y, AttackBudget(epsilon='4/255', steps=2, restarts=3, seed=9), idx)
    assert (three.final_loss >= one.final_loss).all()


@pytest.mark.slow
def test_restarts_do_not_raise_robust_accuracy(trained_classifier, tiny_shapes):
    pipeline = DefendedPipeline(trained_classifier)
    x, y, idx = tiny_shapes.images, tiny_shapes.labels, torch.arange(len(tiny_shapes))
    accs = []
    for restarts in (1, 2, 4):
        budget = AttackBudget(epsilon='2/255', steps=3, restarts=restarts, seed=0)
        accs.append(1. - pgd(pipeline, None, x, y, budget, idx).flipped.float().mean().item())
    assert all(b <= a + 0.05 for a, b in zip(accs, accs[1:]))


def _cosine(a, b):
    return torch.nn.functional.cosine_similarity(a.flatten(1), b.flatten(1), dim=1)


@pytest.mark.slow
def test_surrogate_gradient_aligns_with_true_gradient(trained_classifier, tiny_shapes):
    surrogate, _ = train_surrogate(
        IdentityCodec(), tiny_shapes, SurrogateCfg(epochs=20, lr=3e-3, lr_step=0, batch_size=8, width=8))
    pipeline = DefendedPipeline(trained_classifier)
    x, y = tiny_shapes.images[:16], tiny_shapes.labels[:16]
    _, true_grad = true_wb_oracle(pipeline)(x, y)
    _, surrogate_grad = bpda_surrogate_oracle(pipeline, surrogate)(x, y)
    _, noise_grad = noise_gradient_oracle(x.shape, seed=0)(x, y)
    aligned = _cosine(true_grad, surrogate_grad).mean().item()
    assert aligned > 0.2
    assert aligned > _cosine(true_grad, noise_grad).abs().mean().item()


@pytest.mark.slow
def test_single_pass_gradient_attacks_iterated_jpeg(trained_classifier, tiny_shapes):
    pipeline = DefendedPipeline(trained_classifier, JpegCodec(JpegCfg(quality=50, defense_iterations=3)))
    x, y, idx = tiny_shapes.images, tiny_shapes.labels, torch.arange(len(tiny_shapes))
    budget = AttackBudget(epsilon='8/255', steps=10, seed=0)

    def _robust(attack_iterations):
        oracle = true_wb_oracle(pipeline, attack_iterations=attack_iterations)
        return 1. - pgd(pipeline, oracle, x, y, budget, idx).flipped.float().mean().item()
    assert abs(_robust(1) - _robust(None)) <= 0.1
