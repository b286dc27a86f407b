from dataclasses import dataclass
from typing import Callable, Optional

import torch
import torch.nn as nn

from squish.attacks import AttackResult
from squish.data import Dataset, require_nonempty

# (x, y, dataset indices) -> AttackResult
Attack = Callable[[torch.Tensor, torch.Tensor, torch.Tensor], AttackResult]


@dataclass
class AttackStats:
    """ Outcome of one attack over a dataset.

    Attributes:
        clean_accuracy: Accuracy on unperturbed images.
        robust_accuracy: Accuracy on attacked images.
        success_rate: Fraction of initially correct images the attack flips.
        linf_mean: Mean per image l-inf perturbation.
        num_images: Images evaluated.
    """
    clean_accuracy: float
    robust_accuracy: float
    success_rate: float
    linf_mean: float
    num_images: int


@torch.no_grad()
def _correct(pipeline: nn.Module, x: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    # torch.argmax returns the first maximal index on ties
    return pipeline(x).argmax(dim=1) == y


def evaluate_attack(
        pipeline: nn.Module,
        attack: Optional[Attack],
        dataset: Dataset,
        batch_size: int = 100,
) -> AttackStats:
    require_nonempty(dataset, 'evaluation set')
    clean = robust = flipped = 0
    linf_total = 0.
    for idx, x, y in dataset.batches(batch_size):
        clean_ok = _correct(pipeline, x, y)
        if attack is None:
            adv_ok = clean_ok
        else:
            result = attack(x, y, idx)
            adv_ok = _correct(pipeline, result.x_adv, y)
            linf_total += float(result.linf_used.sum())
        clean += int(clean_ok.sum())
        robust += int(adv_ok.sum())
        flipped += int((clean_ok & ~adv_ok).sum())
    n = len(dataset)
    return AttackStats(
        clean_accuracy=clean / n,
        robust_accuracy=robust / n,
        success_rate=flipped / clean if clean else 0.,
        linf_mean=linf_total / n,
        num_images=n,
    )


def robust_accuracy(pipeline: nn.Module, attack: Optional[Attack], dataset: Dataset, batch_size: int = 100) -> float:
    """ Fraction of images whose post-attack prediction equals the label. attack=None gives clean accuracy. """
    return evaluate_attack(pipeline, attack, dataset, batch_size).robust_accuracy


def attack_success_rate(pipeline: nn.Module, attack: Attack, dataset: Dataset, batch_size: int = 100) -> float:
    return evaluate_attack(pipeline, attack, dataset, batch_size).success_rate
