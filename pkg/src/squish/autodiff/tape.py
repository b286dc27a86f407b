""" Single-use gradient tape over torch autograd.

A Tape is opened per forward pass. Leaves registered with `watch` get a node id, `backward`
returns gradients keyed by node id and consumes the tape. Tapes are thread-local and must not
be shared across threads; parallelism happens above this level (one tape per image batch).
"""
import itertools
import threading
from typing import Dict, List, Optional

import torch

from squish.common.errors import TapeError

_local = threading.local()


def _tape_stack() -> List['Tape']:
    stack = getattr(_local, 'stack', None)
    if stack is None:
        stack = _local.stack = []
    return stack


def active_tape() -> Optional['Tape']:
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tape:
    """ Records one forward pass for exactly one backward pass.

    Usage:
        with Tape() as tape:
            x = tape.watch(x)
            loss = fn(x)
            grads = tape.backward(loss)
        grad_x = grads[x.node_id]
    """

    def __init__(self):
        self._ids = itertools.count()
        self.leaves: Dict[int, torch.Tensor] = {}
        self.non_differentiable: List[str] = []
        self.consumed = False
        self._grad_mode = None

    def __enter__(self):
        if self.consumed:
            raise TapeError('Tape has already been consumed by a backward pass, open a new one.')
        _tape_stack().append(self)
        self._grad_mode = torch.enable_grad()
        self._grad_mode.__enter__()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        stack = _tape_stack()
        assert stack and stack[-1] is self, 'Tape contexts must be exited in LIFO order'
        stack.pop()
        self._grad_mode.__exit__(exc_type, exc_val, exc_tb)
        return False

    def watch(self, x: torch.Tensor, requires_grad: bool = True) -> torch.Tensor:
        """ Register x as a leaf. Returns a detached leaf tensor (same values) carrying `node_id`. """
        if self.consumed:
            raise TapeError('Cannot watch tensors on a consumed tape.')
        leaf = x.detach()
        if requires_grad:
            if not leaf.is_floating_point():
                raise TapeError(f'Only floating point tensors can be watched, got {leaf.dtype}.')
            leaf.requires_grad_(True)
        node_id = next(self._ids)
        leaf.node_id = node_id
        self.leaves[node_id] = leaf
        return leaf

    def mark_non_differentiable(self, op_name: str):
        self.non_differentiable.append(op_name)

    def backward(self, loss: torch.Tensor) -> Dict[int, torch.Tensor]:
        """ Gradients of a scalar loss for every watched leaf that requires grad.

        Leaves the loss does not depend on get a zero gradient of matching shape.
        """
        if self.consumed:
            raise TapeError('Second backward on the same tape, tapes are single-use.')
        if loss.numel() != 1 or loss.dim() > 1:
            raise TapeError(f'backward needs a scalar loss, got shape {tuple(loss.shape)}.')
        self.consumed = True

        grad_leaves = [(k, v) for k, v in self.leaves.items() if v.requires_grad]
        if not grad_leaves:
            return {}
        grads = [None] * len(grad_leaves)
        if loss.requires_grad:
            grads = torch.autograd.grad(
                loss.reshape(()),
                [v for _, v in grad_leaves],
                allow_unused=True,
            )
        return {
            k: torch.zeros_like(v) if g is None else g.detach()
            for (k, v), g in zip(grad_leaves, grads)
        }


def backward(loss: torch.Tensor, tape: Optional[Tape] = None) -> Dict[int, torch.Tensor]:
    """ Run backward on `tape`, or on the innermost active tape of this thread. """
    tape = tape or active_tape()
    if tape is None:
        raise TapeError('loss is not on a tape, open a Tape() context for the forward pass.')
    return tape.backward(loss)
