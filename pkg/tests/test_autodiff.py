import pytest
import torch

from squish.autodiff import (
    Tape,
    backward,
    clamp_ste,
    conv2d,
    conv_out_size,
    grad_check,
    matmul,
    maximum,
    minimum,
    add,
    relu,
    round_half_away,
    round_ste,
    sigmoid,
    sign,
    softmax_cross_entropy,
    tanh,
)
from squish.common.errors import LabelError, ShapeError, TapeError


def _grads(fn, *inputs):
    with Tape() as tape:
        leaves = [tape.watch(x) for x in inputs]
        grads = tape.backward(fn(*leaves))
    return [grads[leaf.node_id] for leaf in leaves]


def test_tape_is_single_use():
    tape = Tape()
    with tape:
        x = tape.watch(torch.ones(3))
        tape.backward((x * 2).sum())
        with pytest.raises(TapeError):
            tape.backward((x * 3).sum())
    with pytest.raises(TapeError):
        with tape:
            pass


def test_backward_without_tape():
    with pytest.raises(TapeError):
        backward(torch.zeros(()))


def test_backward_needs_scalar():
    with Tape() as tape:
        x = tape.watch(torch.ones(3))
        with pytest.raises(TapeError):
            tape.backward(x * 2)


def test_watch_rejects_integer_tensors():
    with Tape() as tape:
        with pytest.raises(TapeError):
            tape.watch(torch.arange(3))


def test_unused_leaf_gets_zero_gradient():
    ga, gb = _grads(lambda a, b: (a * a).sum(), torch.ones(2, 2), torch.ones(5))
    assert torch.equal(ga, torch.full((2, 2), 2.))
    assert torch.equal(gb, torch.zeros(5))


def test_broadcast_error_names_both_shapes():
    with pytest.raises(ShapeError, match=r'\(2, 3\).*\(4,\)'):
        add(torch.ones(2, 3), torch.ones(4))


def test_max_min_ties_route_to_first_argument():
    ga, gb = _grads(lambda a, b: maximum(a, b).sum(), torch.ones(3), torch.ones(3))
    assert torch.equal(ga, torch.ones(3))
    assert torch.equal(gb, torch.zeros(3))
    ga, gb = _grads(lambda a, b: minimum(a, b).sum(), torch.ones(3), torch.ones(3))
    assert torch.equal(ga, torch.ones(3))
    assert torch.equal(gb, torch.zeros(3))


def test_relu_gradient_is_zero_at_kink():
    (g,) = _grads(lambda x: relu(x).sum(), torch.tensor([-1., 0., 2.]))
    assert torch.equal(g, torch.tensor([0., 0., 1.]))


def test_matmul_and_conv_shape_errors():
    with pytest.raises(ShapeError):
        matmul(torch.ones(2, 3), torch.ones(2, 3))
    with pytest.raises(ShapeError):
        conv2d(torch.ones(1, 3, 4, 4), torch.ones(2, 3, 5, 5))
    with pytest.raises(ShapeError):
        conv2d(torch.ones(1, 3, 8, 8), torch.ones(2, 1, 3, 3))
    assert conv_out_size(32, 3, stride=2, padding=1) == 16
    assert conv2d(torch.ones(1, 3, 4, 4), torch.ones(2, 3, 5, 5), padding=1).shape == (1, 2, 2, 2)


def test_softmax_cross_entropy_is_stable():
    logits = torch.tensor([[1000., 0.], [0., 1000.]])
    loss = softmax_cross_entropy(logits, torch.tensor([0, 1]))
    assert torch.isfinite(loss)
    assert float(loss) == 0.
    big = softmax_cross_entropy(logits, torch.tensor([1, 0]), reduction='none')
    assert torch.allclose(big, torch.tensor([1000., 1000.]))


def test_softmax_cross_entropy_label_checks():
    with pytest.raises(LabelError):
        softmax_cross_entropy(torch.zeros(2, 3), torch.tensor([0, 3]))
    with pytest.raises(ShapeError):
        softmax_cross_entropy(torch.zeros(2, 3), torch.tensor([0, 1, 2]))


def test_round_half_away_from_zero():
    x = torch.tensor([0.5, -0.5, 1.5, 2.5, -2.5, 0.49, -1.2])
    assert torch.equal(round_half_away(x), torch.tensor([1., -1., 2., 3., -3., 0., -1.]))


def test_straight_through_ops():
    x = torch.tensor([0.2, 0.7, 1.6, -0.4])
    (g,) = _grads(lambda t: (round_ste(t) * torch.arange(4.)).sum(), x)
    assert torch.equal(g, torch.arange(4.))
    (g,) = _grads(lambda t: clamp_ste(t, 0., 1.).sum(), x)
    assert torch.equal(g, torch.ones(4))
    assert torch.equal(clamp_ste(x, 0., 1.), x.clamp(0., 1.))
    with pytest.raises(ValueError):
        clamp_ste(x, 1., 0.)


def test_sign_is_not_differentiable():
    report = grad_check(lambda x: sign(x).sum(), torch.tensor([0.3, -0.2]))
    assert not report.passed
    assert 'sign' in report.error
    assert torch.equal(sign(torch.tensor([-2., 0., 3.])), torch.tensor([-1., 0., 1.]))


_w = torch.randn(4, 3, 3, 3, generator=torch.Generator().manual_seed(0))
_labels = torch.tensor([0, 2, 1])


@pytest.mark.parametrize('fn, shape', [
    (lambda x: sigmoid(x).sum(), (6,)),
    (lambda x: tanh(x).pow(2).sum(), (6,)),
    (lambda x: (relu(x) * x).sum(), None),
    (lambda x: softmax_cross_entropy(x, _labels), (3, 4)),
    (lambda x: conv2d(x, _w.to(x.dtype), padding=1).pow(2).mean(), (2, 3, 5, 5)),
    (lambda x: matmul(x, x.T).trace(), (3, 4)),
])
def test_grad_check_matches_finite_differences(fn, shape):
    if shape is None:
        # stay away from the relu kink
        x = torch.linspace(-2., 2., 10) + 0.05
    else:
        x = torch.randn(shape, generator=torch.Generator().manual_seed(1))
    report = grad_check(fn, x)
    assert report.error is None
    assert report.passed, report
