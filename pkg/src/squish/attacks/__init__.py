from .adaptive import acm_attack, ara_search, black_box_transfer
from .bpda import straight_through, substitute
from .budget import AttackBudget, AttackResult, ThreatModel, linf_distance
from .oracles import (
    GradientOracle,
    acm_oracle,
    bpda_st_oracle,
    bpda_surrogate_oracle,
    check_threat,
    classifier_only_oracle,
    eot_wrap,
    make_oracle,
    noise_gradient_oracle,
    true_wb_oracle,
)
from .pgd import fgsm, ifgsm, pgd, project, random_noise_attack, sign_gradient_attack
