from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, List, Optional

import torch
from simple_parsing.helpers import Serializable

from squish.common.config import check
from squish.common.epsilon import format_epsilon, parse_epsilon


class ThreatModel(str, Enum):
    """ Adversary knowledge. Ordered: black_box < gray_box < white_box. """
    black_box = 'black_box'
    gray_box = 'gray_box'
    white_box = 'white_box'

    @property
    def rank(self) -> int:
        return _threat_rank[self]

    def allows(self, required: 'ThreatModel') -> bool:
        return self.rank >= ThreatModel(required).rank

    @property
    def allows_defense_forward(self) -> bool:
        return self.rank >= 1

    @property
    def allows_defense_gradients(self) -> bool:
        return self.rank >= 2


_threat_rank = {
    ThreatModel.black_box: 0,
    ThreatModel.gray_box: 1,
    ThreatModel.white_box: 2,
}


@dataclass
class AttackBudget(Serializable):
    """ l-inf attack budget.

    Attributes:
        epsilon: Ball radius on the [0,1] pixel scale, exact rational string.
        alpha: Step size, defaults to min(2.5 * epsilon / steps, epsilon).
        steps: Gradient steps n.
        restarts: Random restarts r, the per-image best final loss is kept.
        eot_samples: Gradient samples averaged per step (EoT) k.
        random_start: Start each restart uniformly inside the ball.
        track_accuracy: Record accuracy on the evaluation pipeline after every step.
        seed: Experiment seed, per image seeds are derived from it and the image index.
    """
    epsilon: str = '8/255'
    alpha: Optional[str] = None
    steps: int = 10
    restarts: int = 1
    eot_samples: int = 1
    random_start: bool = True
    track_accuracy: bool = False
    seed: int = 0

    @property
    def eps_fraction(self) -> Fraction:
        return parse_epsilon(self.epsilon)

    @property
    def eps(self) -> float:
        return float(self.eps_fraction)

    @property
    def step_size(self) -> float:
        if self.alpha is not None:
            return float(parse_epsilon(self.alpha, 'alpha'))
        eps = self.eps_fraction
        return float(min(Fraction(5, 2) * eps / self.steps, eps))

    def validate(self):
        eps = parse_epsilon(self.epsilon, 'epsilon')
        check(self.steps >= 1, 'steps', f'must be >= 1, got {self.steps}')
        check(self.restarts >= 1, 'restarts', f'must be >= 1, got {self.restarts}')
        check(self.eot_samples >= 1, 'eot_samples', f'must be >= 1, got {self.eot_samples}')
        if self.alpha is not None:
            alpha = parse_epsilon(self.alpha, 'alpha')
            check(alpha <= eps, 'alpha', f'must be <= epsilon ({self.epsilon}), got {self.alpha}')
            check(alpha > 0 or eps == 0, 'alpha', 'must be > 0')

    def with_epsilon(self, epsilon) -> 'AttackBudget':
        return replace(self, epsilon=format_epsilon(epsilon))

    def updated(self, **changes) -> 'AttackBudget':
        return replace(self, **changes)


@dataclass
class AttackResult:
    """
    Attributes:
        x_adv: Adversarial batch in [0,1], within epsilon of the input.
        loss_trace: Batch-mean objective before each step (all restarts, in order).
        flipped: argmax h(x_adv) != y on the evaluation pipeline, None without one.
        linf_used: Per image max abs perturbation.
        final_loss: Per image objective at x_adv.
        accuracy_trace: Accuracy after each step when tracking is enabled.
        never_flipped_trace: Fraction of images correctly classified at every step so far.
        extra: Attack specific outputs (e.g. the ARA accuracy table).
    """
    x_adv: torch.Tensor
    loss_trace: List[float]
    flipped: Optional[torch.Tensor]
    linf_used: torch.Tensor
    final_loss: Optional[torch.Tensor] = None
    accuracy_trace: List[float] = field(default_factory=list)
    never_flipped_trace: List[float] = field(default_factory=list)
    extra: Dict[str, Any] = field(default_factory=dict)


def linf_distance(x_adv: torch.Tensor, x: torch.Tensor) -> torch.Tensor:
    return (x_adv - x).abs().flatten(1).max(dim=1).values
