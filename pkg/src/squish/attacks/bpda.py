""" Backward pass differentiable approximation.

`straight_through(fn)` runs fn forward and passes the upstream gradient back unchanged,
`substitute(fn, fn_sub)` runs fn forward and differentiates through fn_sub instead.
"""
from typing import Callable

import torch


def straight_through(forward_fn: Callable) -> Callable:

    class _StraightThrough(torch.autograd.Function):

        @staticmethod
        def forward(ctx, x):
            return forward_fn(x)

        @staticmethod
        def backward(ctx, grad_output):
            return grad_output

    return _StraightThrough.apply


def substitute(forward_fn: Callable, forwardsub_fn: Callable) -> Callable:

    class _Substitute(torch.autograd.Function):

        @staticmethod
        def forward(ctx, x):
            ctx.save_for_backward(x)
            return forward_fn(x)

        @staticmethod
        @torch.enable_grad()
        def backward(ctx, grad_output):
            x, = ctx.saved_tensors
            x = x.detach().clone().requires_grad_()
            out = forwardsub_fn(x)
            return torch.autograd.grad(out, x, grad_output)

    return _Substitute.apply
