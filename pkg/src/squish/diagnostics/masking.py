""" Gradient masking checklist.

Five checks, each either computed or recorded as skipped:
  (a) black-box transfer is stronger than the white-box attack
  (b) a very large budget with many steps does not drive accuracy to ~0
  (c) the white-box attack is no better than following random gradients
  (d) multi-step iFGSM is weaker than single-step FGSM
  (e) loss landscape roughness (reported, never flagged)
"""
import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import torch.nn as nn
from simple_parsing.helpers import Serializable

from squish.attacks import (
    AttackBudget,
    ThreatModel,
    black_box_transfer,
    ifgsm,
    make_oracle,
    noise_gradient_oracle,
    pgd,
)
from squish.common.config import check
from squish.common.epsilon import parse_epsilon
from squish.data import Dataset, require_nonempty
from .landscape import LandscapeCfg, mean_landscape_std
from .metrics import evaluate_attack

_logger = logging.getLogger(__name__)

FLAGS = ('bb_stronger_than_wb', 'large_eps_not_failing', 'wb_noise_parity', 'multi_step_weaker')


@dataclass
class MaskingCfg(Serializable):
    """
    Attributes:
        epsilon: Budget for checks (a), (c) and (d).
        steps: PGD / iFGSM steps for (a), (c) and (d).
        large_epsilon: Budget for the large-epsilon sanity attack (b).
        large_steps: Steps for (b), 0 skips the check.
        sanity_size: Images used for (b).
        accuracy_threshold: (b) flags when accuracy stays above this.
        tolerance: Accuracy margin used by the comparative checks.
        landscape_images: Images for (e), 0 skips it.
        seed: Attack seed.
    """
    epsilon: str = '8/255'
    steps: int = 10
    large_epsilon: str = '64/255'
    large_steps: int = 400
    sanity_size: int = 100
    accuracy_threshold: float = 0.1
    tolerance: float = 0.02
    landscape_images: int = 32
    landscape_resolution: int = 21
    seed: int = 0

    def validate(self):
        parse_epsilon(self.epsilon, 'epsilon')
        parse_epsilon(self.large_epsilon, 'large_epsilon')
        check(self.steps >= 1, 'steps', 'must be >= 1')
        check(self.large_steps >= 0, 'large_steps', 'must be >= 0')
        check(self.sanity_size >= 1, 'sanity_size', 'must be >= 1')
        check(0 <= self.accuracy_threshold <= 1, 'accuracy_threshold', 'must be in [0, 1]')
        check(self.tolerance >= 0, 'tolerance', 'must be >= 0')
        check(self.landscape_images >= 0, 'landscape_images', 'must be >= 0')


@dataclass
class MaskingReport:
    wb_accuracy: Optional[float] = None
    bb_accuracy: Optional[float] = None
    bb_vs_wb_gap: Optional[float] = None
    large_eps_accuracy: Optional[float] = None
    noise_oracle_accuracy: Optional[float] = None
    single_step_accuracy: Optional[float] = None
    multi_step_accuracy: Optional[float] = None
    single_vs_multi_step_gap: Optional[float] = None
    landscape_std: Optional[float] = None
    flags: Dict[str, bool] = field(default_factory=dict)
    skipped: List[str] = field(default_factory=list)

    @property
    def masked(self) -> bool:
        return any(self.flags.values())

    def to_dict(self):
        d = asdict(self)
        d['masked'] = self.masked
        return d


def masking_checklist(
        pipeline: nn.Module,
        dataset: Dataset,
        cfg: MaskingCfg = None,
        surrogate: Optional[nn.Module] = None,
        oracle_tag: Optional[str] = None,
        batch_size: int = 100,
) -> MaskingReport:
    """ Run the masking checks against `pipeline` on `dataset`.

    Args:
        pipeline: Defended pipeline h with a `classifier` attribute.
        dataset: Labelled evaluation images.
        cfg: Budgets and thresholds.
        surrogate: Needed when the white-box oracle is bpda_surrogate.
        oracle_tag: White-box oracle, defaults to the pipeline's own.
        batch_size: Attack batch size.
    """
    cfg = cfg or MaskingCfg()
    cfg.validate()
    require_nonempty(dataset, 'masking checklist set')
    tag = oracle_tag or getattr(pipeline, 'gradient_oracle', 'true_wb')
    budget = AttackBudget(epsilon=cfg.epsilon, steps=cfg.steps, seed=cfg.seed)
    report = MaskingReport()

    def _wb(b):
        def _attack(x, y, idx):
            oracle = make_oracle(
                tag, pipeline, ThreatModel.white_box, surrogate=surrogate, shape=x.shape, seed=b.seed, indices=idx)
            return pgd(pipeline, oracle, x, y, b, idx)
        return _attack

    def _acc(attack, ds=dataset):
        return evaluate_attack(pipeline, attack, ds, batch_size).robust_accuracy

    # (a)
    report.wb_accuracy = _acc(_wb(budget))
    report.bb_accuracy = _acc(lambda x, y, idx: black_box_transfer(pipeline.classifier, pipeline, x, y, budget, idx))
    report.bb_vs_wb_gap = report.wb_accuracy - report.bb_accuracy
    report.flags['bb_stronger_than_wb'] = report.bb_vs_wb_gap > cfg.tolerance

    # (b)
    if cfg.large_steps > 0:
        large = AttackBudget(epsilon=cfg.large_epsilon, steps=cfg.large_steps, seed=cfg.seed)
        report.large_eps_accuracy = _acc(_wb(large), dataset.head(cfg.sanity_size))
        report.flags['large_eps_not_failing'] = report.large_eps_accuracy > cfg.accuracy_threshold
    else:
        report.skipped.append('large_eps_accuracy')

    # (c)
    def _noise(x, y, idx):
        oracle = noise_gradient_oracle(x.shape, cfg.seed, pipeline, indices=idx)
        return pgd(pipeline, oracle, x, y, budget, idx)

    report.noise_oracle_accuracy = _acc(_noise)
    report.flags['wb_noise_parity'] = (
        report.wb_accuracy >= report.noise_oracle_accuracy - cfg.tolerance
        and report.wb_accuracy > cfg.accuracy_threshold
    )

    # (d)
    def _ifgsm(steps, alpha):
        b = budget.updated(steps=steps, alpha=alpha)

        def _attack(x, y, idx):
            oracle = make_oracle(
                tag, pipeline, ThreatModel.white_box, surrogate=surrogate, shape=x.shape, seed=b.seed, indices=idx)
            return ifgsm(pipeline, oracle, x, y, b, idx)
        return _attack

    report.single_step_accuracy = _acc(_ifgsm(1, cfg.epsilon))
    report.multi_step_accuracy = _acc(_ifgsm(cfg.steps, None))
    report.single_vs_multi_step_gap = report.multi_step_accuracy - report.single_step_accuracy
    report.flags['multi_step_weaker'] = report.single_vs_multi_step_gap > cfg.tolerance

    # (e)
    if cfg.landscape_images > 0:
        lcfg = LandscapeCfg(
            epsilon=cfg.epsilon,
            resolution=cfg.landscape_resolution,
            num_images=cfg.landscape_images,
            seed=cfg.seed,
        )
        report.landscape_std, _ = mean_landscape_std(pipeline, dataset, lcfg)
    else:
        report.skipped.append('landscape_std')

    for name in report.skipped:
        _logger.warning(f'Masking check {name} skipped.')
    raised = [k for k, v in report.flags.items() if v]
    _logger.info(f'Masking checklist for {getattr(pipeline, "name", "pipeline")}: flags {raised or "none"}')
    return report
