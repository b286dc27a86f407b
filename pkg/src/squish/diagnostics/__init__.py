from .landscape import (
    LandscapeCfg,
    LossLandscape,
    landscape_std,
    landscape_subset,
    mean_landscape_std,
    sample_landscape,
)
from .masking import FLAGS, MaskingCfg, MaskingReport, masking_checklist
from .metrics import Attack, AttackStats, attack_success_rate, evaluate_attack, robust_accuracy
from .mmd import mmd_metric
