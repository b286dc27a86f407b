""" Adaptive attacks on compression defenses: ACM, ARA and black-box transfer. """
import logging
from typing import Dict, Optional, Sequence, Tuple

import torch
import torch.nn as nn

from squish.common.errors import CheckpointError, ThreatModelError
from squish.nets import DefendedPipeline
from .budget import AttackBudget, AttackResult, ThreatModel
from .oracles import acm_oracle, classifier_only_oracle, true_wb_oracle
from .pgd import pgd

_logger = logging.getLogger(__name__)


def acm_attack(
        codec: nn.Module,
        x: torch.Tensor,
        budget: AttackBudget,
        y: Optional[torch.Tensor] = None,
        classifier: Optional[nn.Module] = None,
        indices: Optional[Sequence[int]] = None,
        threat_model: ThreatModel = ThreatModel.white_box,
) -> AttackResult:
    """ PGD maximizing MSE(x, g(x')) over the epsilon ball, the classifier is not consulted.

    Needs gradients of g, so anything below white_box raises ThreatModelError. When a classifier
    and labels are given, `flipped` is measured on f o g.
    """
    oracle = acm_oracle(codec, threat_model)
    eval_pipeline = DefendedPipeline(classifier, codec) if classifier is not None else None
    return pgd(eval_pipeline, oracle, x, y, budget, indices)


def black_box_transfer(
        classifier: nn.Module,
        pipeline: nn.Module,
        x: torch.Tensor,
        y: torch.Tensor,
        budget: AttackBudget,
        indices: Optional[Sequence[int]] = None,
        threat_model: ThreatModel = ThreatModel.black_box,
) -> AttackResult:
    """ PGD on the bare classifier f, examples evaluated on the defended pipeline h. """
    return pgd(pipeline, classifier_only_oracle(classifier, threat_model), x, y, budget, indices)


def ara_search(
        classifier: nn.Module,
        codec_family: Dict[float, nn.Module],
        x: torch.Tensor,
        y: torch.Tensor,
        beta_defense: float,
        beta_grid: Sequence[float],
        budget: AttackBudget,
        threat_model: ThreatModel = ThreatModel.white_box,
        indices: Optional[Sequence[int]] = None,
) -> Tuple[float, AttackResult]:
    """ Adaptive realism attack: differentiate through a sibling codec g_beta'.

    For each beta' in the grid, PGD runs with gradients of f o g_beta' and the examples are
    scored on the defense f o g_beta_defense. The beta' with the lowest robust accuracy wins,
    ties go to the smallest beta'. Under gray_box the defense's own codec is excluded.

    Returns:
        (beta_star, result of the winning beta'), result.extra holds the per beta' accuracy table.
    """
    threat_model = ThreatModel(threat_model)
    if not threat_model.allows_defense_forward:
        raise ThreatModelError('ara_search needs at least gray_box access to evaluate the defense.')
    needed = sorted(set(beta_grid) | {beta_defense})
    missing = [b for b in needed if b not in codec_family]
    if missing:
        raise CheckpointError(f'No codec checkpoint for beta {missing}.')

    grid = sorted(set(beta_grid))
    if threat_model is ThreatModel.gray_box:
        grid = [b for b in grid if b != beta_defense]
    if not grid:
        raise ThreatModelError(f'ARA grid is empty under {threat_model.value} (defense beta {beta_defense}).')

    defense = DefendedPipeline(classifier, codec_family[beta_defense], name=f'codec_beta{beta_defense}')
    table = {}
    best_beta, best_result, best_acc = None, None, None
    for beta in grid:
        attacker_view = DefendedPipeline(classifier, codec_family[beta])
        oracle = true_wb_oracle(attacker_view)
        result = pgd(defense, oracle, x, y, budget, indices)
        acc = 1. - float(result.flipped.float().mean())
        table[beta] = acc
        _logger.info(f'ARA beta_defense={beta_defense} beta\'={beta}: robust acc {acc:.4f}')
        if best_acc is None or acc < best_acc:
            best_beta, best_result, best_acc = beta, result, acc

    best_result.extra.update(ara_table=table, beta_star=best_beta, threat_model=threat_model.value)
    return best_beta, best_result
