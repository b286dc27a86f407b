""" Sign-gradient l-inf attacks: FGSM, iFGSM and PGD with random starts and restarts.

The three share one loop so that PGD with one step, alpha = epsilon and no random start is
FGSM, and PGD without random start and one restart is iFGSM, bit for bit.
"""
import logging
from typing import Optional, Sequence

import torch
import torch.nn as nn

from squish.autodiff import sign
from squish.common.errors import ShapeError
from squish.common.random import per_item_uniform
from .budget import AttackBudget, AttackResult, linf_distance
from .oracles import GradientOracle, eot_wrap, make_oracle

_logger = logging.getLogger(__name__)


def project(x_candidate: torch.Tensor, x_origin: torch.Tensor, epsilon: float) -> torch.Tensor:
    """ Clamp to the epsilon l-inf ball around x_origin, then to [0,1]. """
    if x_candidate.shape != x_origin.shape:
        raise ShapeError(f'project shapes differ: {tuple(x_candidate.shape)} vs {tuple(x_origin.shape)}.')
    epsilon = float(epsilon)
    x = torch.clamp(x_candidate, min=x_origin - epsilon, max=x_origin + epsilon)
    return x.clamp(0., 1.)


@torch.no_grad()
def _predict(pipeline: nn.Module, x: torch.Tensor) -> torch.Tensor:
    return pipeline(x).argmax(dim=1)


def _default_oracle(pipeline, oracle, x, budget):
    if oracle is None:
        assert pipeline is not None, 'An oracle or a pipeline is required'
        tag = getattr(pipeline, 'gradient_oracle', 'true_wb')
        oracle = make_oracle(tag, pipeline, shape=x.shape, seed=budget.seed)
    return eot_wrap(oracle, budget.eot_samples)


def _finish(pipeline, x, y, x_adv, loss_trace, final_loss, acc_trace=(), never_trace=(), **extra) -> AttackResult:
    flipped = None
    if pipeline is not None and y is not None:
        flipped = _predict(pipeline, x_adv) != y
    return AttackResult(
        x_adv=x_adv,
        loss_trace=list(loss_trace),
        flipped=flipped,
        linf_used=linf_distance(x_adv, x),
        final_loss=final_loss,
        accuracy_trace=list(acc_trace),
        never_flipped_trace=list(never_trace),
        extra=dict(extra),
    )


def sign_gradient_attack(
        pipeline: Optional[nn.Module],
        oracle: Optional[GradientOracle],
        x: torch.Tensor,
        y: Optional[torch.Tensor],
        budget: AttackBudget,
        indices: Optional[Sequence[int]] = None,
) -> AttackResult:
    """ Projected sign-gradient ascent with optional random starts and restarts.

    Args:
        pipeline: Evaluation pipeline h, used for `flipped` and accuracy tracking (may be None).
        oracle: Gradient oracle, defaults to the pipeline's configured oracle.
        x: Clean batch [B,3,H,W] in [0,1].
        y: Labels [B].
        budget: epsilon, alpha, steps, restarts, EoT samples, random start, seed.
        indices: Dataset indices of the batch, random starts are seeded per image from them.

    Returns:
        AttackResult holding, per image, the restart with the highest final objective.
    """
    budget.validate()
    oracle = _default_oracle(pipeline, oracle, x, budget)
    x = x.detach()
    eps = budget.eps
    alpha = budget.step_size
    track = budget.track_accuracy and pipeline is not None and y is not None

    best_x = x.clone()
    best_loss = torch.full((x.shape[0],), -float('inf'), dtype=x.dtype)
    loss_trace, acc_trace, never_trace = [], [], []
    never_flipped = torch.ones(x.shape[0], dtype=torch.bool)

    for restart in range(budget.restarts):
        x_adv = x
        if budget.random_start and eps > 0:
            noise = per_item_uniform(x, -eps, eps, budget.seed, indices, stream=restart)
            x_adv = project(x + noise, x, eps)
        for _ in range(budget.steps):
            losses, grad = oracle(x_adv, y, origin=x)
            loss_trace.append(float(losses.mean()))
            x_adv = project(x_adv + alpha * sign(grad), x, eps)
            if track:
                correct = _predict(pipeline, x_adv) == y
                never_flipped &= correct
                acc_trace.append(float(correct.float().mean()))
                never_trace.append(float(never_flipped.float().mean()))
        final = oracle.loss(x_adv, y, origin=x)
        improved = final > best_loss
        best_x[improved] = x_adv[improved]
        best_loss = torch.where(improved, final, best_loss)

    _logger.debug(
        f'{oracle.tag}: eps={budget.epsilon} steps={budget.steps} restarts={budget.restarts} '
        f'final loss {float(best_loss.mean()):.4f}')
    return _finish(pipeline, x, y, best_x, loss_trace, best_loss, acc_trace, never_trace)


def fgsm(pipeline, oracle, x, y, epsilon) -> AttackResult:
    """ x' = clamp01(x + epsilon * sign(grad)), one gradient evaluation. """
    budget = AttackBudget(epsilon=str(epsilon), alpha=str(epsilon), steps=1, restarts=1, random_start=False)
    return sign_gradient_attack(pipeline, oracle, x, y, budget)


def ifgsm(pipeline, oracle, x, y, budget: AttackBudget, indices=None) -> AttackResult:
    """ n FGSM steps of size alpha, each projected back into the ball, no random start. """
    budget = budget.updated(random_start=False, restarts=1)
    return sign_gradient_attack(pipeline, oracle, x, y, budget, indices)


def pgd(pipeline, oracle, x, y, budget: AttackBudget, indices=None) -> AttackResult:
    return sign_gradient_attack(pipeline, oracle, x, y, budget, indices)


def random_noise_attack(
        pipeline: Optional[nn.Module],
        x: torch.Tensor,
        y: Optional[torch.Tensor],
        epsilon,
        seed: int = 0,
        indices: Optional[Sequence[int]] = None,
) -> AttackResult:
    """ Uniform noise inside the epsilon ball, the gradient-free reference point. """
    budget = AttackBudget(epsilon=str(epsilon), seed=seed)
    eps = budget.eps
    x = x.detach()
    x_adv = project(x + per_item_uniform(x, -eps, eps, seed, indices), x, eps)
    return _finish(pipeline, x, y, x_adv, [], None)
