""" Tensor ops used by every classifier, codec, loss and attack in the toolkit.

Thin wrappers over torch that pin down the conventions the attacks rely on: broadcasting
errors naming both shapes, tie routing for max/min, sign(0) = 0, and straight-through
rounding / clamping whose forward is exact.
"""
from numbers import Number
from typing import Union

import torch
import torch.nn.functional as F

from squish.common.errors import LabelError, ShapeError
from .tape import active_tape

TensorOrScalar = Union[torch.Tensor, Number]


def _broadcast_shape(a: torch.Tensor, b: TensorOrScalar):
    if not isinstance(b, torch.Tensor):
        return a.shape
    try:
        return torch.broadcast_shapes(a.shape, b.shape)
    except RuntimeError:
        raise ShapeError(
            f'Shapes {tuple(a.shape)} and {tuple(b.shape)} are not broadcastable.') from None


def _max_first(a, b):
    # ties route the full gradient to the first argument
    b = torch.as_tensor(b, dtype=a.dtype)
    return torch.where(a >= b, a, b)


def _min_first(a, b):
    b = torch.as_tensor(b, dtype=a.dtype)
    return torch.where(a <= b, a, b)


_elementwise_ops = {
    'add': torch.add,
    'sub': torch.sub,
    'mul': torch.mul,
    'div': torch.div,
    'max': _max_first,
    'min': _min_first,
}


def elementwise(kind: str, a: torch.Tensor, b: TensorOrScalar) -> torch.Tensor:
    assert kind in _elementwise_ops, \
        f'Unrecognized elementwise op: {kind}. Must be one of {list(_elementwise_ops.keys())}.'
    _broadcast_shape(a, b)
    return _elementwise_ops[kind](a, b)


def add(a, b):
    return elementwise('add', a, b)


def sub(a, b):
    return elementwise('sub', a, b)


def mul(a, b):
    return elementwise('mul', a, b)


def div(a, b):
    return elementwise('div', a, b)


def maximum(a, b):
    return elementwise('max', a, b)


def minimum(a, b):
    return elementwise('min', a, b)


def matmul(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    if a.dim() != 2 or b.dim() != 2:
        raise ShapeError(f'matmul expects 2D operands, got {tuple(a.shape)} and {tuple(b.shape)}.')
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f'matmul inner dimensions differ: {tuple(a.shape)} @ {tuple(b.shape)}.')
    return a @ b


def conv2d(
        x: torch.Tensor,
        w: torch.Tensor,
        bias: torch.Tensor = None,
        stride: int = 1,
        padding: int = 0,
) -> torch.Tensor:
    if x.dim() != 4 or w.dim() != 4:
        raise ShapeError(f'conv2d expects x [B,C,H,W] and w [O,C,kh,kw], got {tuple(x.shape)}, {tuple(w.shape)}.')
    if x.shape[1] != w.shape[1]:
        raise ShapeError(f'conv2d channel mismatch: input {tuple(x.shape)}, weight {tuple(w.shape)}.')
    kh, kw = w.shape[-2:]
    h, wd = x.shape[-2:]
    if kh > h + 2 * padding or kw > wd + 2 * padding:
        raise ShapeError(
            f'Kernel {kh}x{kw} larger than padded input {h + 2 * padding}x{wd + 2 * padding}.')
    return F.conv2d(x, w, bias=bias, stride=stride, padding=padding)


def conv_out_size(size: int, kernel: int, stride: int = 1, padding: int = 0) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def relu(x: torch.Tensor) -> torch.Tensor:
    # torch's relu backward is (x > 0) * grad, i.e. zero at the kink
    return torch.relu(x)


def sigmoid(x: torch.Tensor) -> torch.Tensor:
    return torch.sigmoid(x)


def tanh(x: torch.Tensor) -> torch.Tensor:
    return torch.tanh(x)


def softmax_cross_entropy(
        logits: torch.Tensor,
        labels: torch.Tensor,
        reduction: str = 'mean',
) -> torch.Tensor:
    """ Mean (or per-row with reduction='none') of -log softmax(logits)[label]. """
    if logits.dim() != 2:
        raise ShapeError(f'logits must be [B,K], got {tuple(logits.shape)}.')
    labels = torch.as_tensor(labels, dtype=torch.long)
    if labels.shape != logits.shape[:1]:
        raise ShapeError(f'labels shape {tuple(labels.shape)} does not match logits {tuple(logits.shape)}.')
    num_classes = logits.shape[1]
    if labels.numel() and (labels.min() < 0 or labels.max() >= num_classes):
        raise LabelError(f'labels must be in [0, {num_classes}), got range [{labels.min()}, {labels.max()}].')
    # log_softmax subtracts the row max before exponentiating
    return F.nll_loss(F.log_softmax(logits, dim=1), labels, reduction=reduction)


def sign(x: torch.Tensor) -> torch.Tensor:
    """ Elementwise sign in {-1, 0, +1}, never recorded on a tape. """
    tape = active_tape()
    if tape is not None and x.requires_grad:
        tape.mark_non_differentiable('sign')
    return torch.sign(x.detach())


def round_half_away(x: torch.Tensor) -> torch.Tensor:
    """ Exact rounding, halves away from zero. Not differentiable, used by STE and reference paths. """
    with torch.no_grad():
        a = x.abs()
        f = torch.floor(a)
        r = f + (a - f >= 0.5).to(x.dtype)
        return torch.copysign(r, x)


class _RoundSte(torch.autograd.Function):

    @staticmethod
    def forward(ctx, x):
        return round_half_away(x)

    @staticmethod
    def backward(ctx, grad_output):
        return grad_output


class _ClampSte(torch.autograd.Function):

    @staticmethod
    def forward(ctx, x, lo, hi):
        return x.clamp(lo, hi)

    @staticmethod
    def backward(ctx, grad_output):
        return grad_output, None, None


def round_ste(x: torch.Tensor) -> torch.Tensor:
    return _RoundSte.apply(x)


def clamp_ste(x: torch.Tensor, lo: float, hi: float) -> torch.Tensor:
    if lo > hi:
        raise ValueError(f'clamp_ste bounds inverted: lo={lo} > hi={hi}.')
    return _ClampSte.apply(x, lo, hi)
