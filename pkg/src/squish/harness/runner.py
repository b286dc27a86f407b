""" Experiment runner: the defense x attack x epsilon matrix plus per-defense diagnostics. """
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, List, Optional

from squish.attacks import (
    AttackBudget,
    AttackResult,
    acm_attack,
    ara_search,
    black_box_transfer,
    check_threat,
    fgsm,
    ifgsm,
    make_oracle,
    noise_gradient_oracle,
    pgd,
    random_noise_attack,
)
from squish.common.epsilon import format_epsilon, parse_epsilon
from squish.diagnostics import Attack, evaluate_attack, masking_checklist, mean_landscape_std
from squish.diagnostics.landscape import DIRECTION_KIND, landscape_std
from squish.nets import DefendedPipeline
from squish.version import __version__
from .components import Components
from .config import AttackCfg, DefenseCfg, ExperimentCfg
from .report import CellResult, EvalReport
from .sweeps import iterative_sweep, realism_sweep

_logger = logging.getLogger(__name__)


@dataclass
class CellSpec:
    defense: DefenseCfg
    attack: Optional[AttackCfg]
    epsilon: str


def _oracle_attack(components: Components, pipeline, attack_cfg, defense_cfg, budget, runner: Callable) -> Attack:
    tag = attack_cfg.oracle or pipeline.gradient_oracle
    surrogate = None
    if tag == 'bpda_surrogate':
        surrogate = components.surrogate(defense_cfg.label, pipeline.codec)

    def _attack(x, y, idx):
        oracle = make_oracle(
            tag, pipeline, attack_cfg.threat,
            surrogate=surrogate,
            shape=x.shape,
            seed=budget.seed,
            indices=idx,
        )
        return runner(pipeline, oracle, x, y, budget, idx)
    return _attack


def _fgsm(components, pipeline, attack_cfg, defense_cfg, budget):
    return _oracle_attack(
        components, pipeline, attack_cfg, defense_cfg, budget,
        lambda h, o, x, y, b, idx: fgsm(h, o, x, y, b.epsilon))


def _ifgsm(components, pipeline, attack_cfg, defense_cfg, budget):
    return _oracle_attack(components, pipeline, attack_cfg, defense_cfg, budget, ifgsm)


def _pgd(components, pipeline, attack_cfg, defense_cfg, budget):
    return _oracle_attack(components, pipeline, attack_cfg, defense_cfg, budget, pgd)


def _bb_transfer(components, pipeline, attack_cfg, defense_cfg, budget):
    def _attack(x, y, idx):
        return black_box_transfer(pipeline.classifier, pipeline, x, y, budget, idx, attack_cfg.threat)
    return _attack


def _acm(components, pipeline, attack_cfg, defense_cfg, budget):
    check_threat('acm_mse', attack_cfg.threat)

    def _attack(x, y, idx):
        return acm_attack(pipeline.codec, x, budget, y, pipeline.classifier, idx, attack_cfg.threat)
    return _attack


def _noise(components, pipeline, attack_cfg, defense_cfg, budget):
    def _attack(x, y, idx):
        oracle = noise_gradient_oracle(x.shape, budget.seed, pipeline, attack_cfg.threat, indices=idx)
        return pgd(pipeline, oracle, x, y, budget, idx)
    return _attack


def _random_noise(components, pipeline, attack_cfg, defense_cfg, budget):
    def _attack(x, y, idx):
        return random_noise_attack(pipeline, x, y, budget.epsilon, budget.seed, idx)
    return _attack


_attack_factories = {
    'fgsm': _fgsm,
    'ifgsm': _ifgsm,
    'pgd': _pgd,
    'bb_transfer': _bb_transfer,
    'acm': _acm,
    'noise': _noise,
    'random_noise': _random_noise,
}


def matrix_cells(cfg: ExperimentCfg) -> List[CellSpec]:
    """ Cells in report order. Attack-free configs give one clean cell per defense; ARA only
    applies to learned-codec defenses.
    """
    cells = []
    for d in cfg.defenses:
        if not cfg.attacks:
            cells.append(CellSpec(d, None, '0'))
        for a in cfg.attacks:
            if a.kind == 'ara' and d.kind != 'codec':
                _logger.warning(f'Skipping ARA on {d.label}: ARA needs a learned codec defense.')
                continue
            if a.kind == 'none':
                cells.append(CellSpec(d, a, '0'))
                continue
            for eps in cfg.epsilons:
                cells.append(CellSpec(d, a, format_epsilon(eps)))
    return cells


def run_cell(components: Components, spec: CellSpec) -> CellResult:
    cfg = components.cfg
    pipeline = components.defense(spec.defense)
    dataset = components.eval_set
    batch_size = cfg.data.batch_size
    start = time.perf_counter()
    extra = {}
    attack_cfg = spec.attack
    oracle = '-'
    threat = 'white_box'

    if attack_cfg is None or attack_cfg.kind == 'none':
        stats = evaluate_attack(pipeline, None, dataset, batch_size)
        label = 'none'
    else:
        label = attack_cfg.label
        threat = attack_cfg.threat_model
        budget = attack_cfg.budget.updated(epsilon=spec.epsilon, seed=cfg.seed)
        if attack_cfg.kind == 'ara':
            stats, extra = _run_ara(components, pipeline, spec, budget)
            oracle = 'true_wb'
        else:
            attack = _attack_factories[attack_cfg.kind](components, pipeline, attack_cfg, spec.defense, budget)
            stats = evaluate_attack(pipeline, attack, dataset, batch_size)
            oracle = _oracle_label(attack_cfg, pipeline)

    wall = time.perf_counter() - start
    _logger.info(
        f'[{spec.defense.label} | {label} | eps={spec.epsilon}] clean {stats.clean_accuracy:.4f} '
        f'robust {stats.robust_accuracy:.4f} ({wall:.1f}s)')
    return CellResult(
        defense=spec.defense.label,
        attack=label,
        threat_model=threat,
        oracle=oracle,
        epsilon=spec.epsilon,
        epsilon_float=float(parse_epsilon(spec.epsilon)),
        clean_acc=stats.clean_accuracy,
        robust_acc=stats.robust_accuracy,
        success_rate=stats.success_rate,
        linf_mean=stats.linf_mean,
        num_images=stats.num_images,
        wall_time=wall,
        extra=extra,
    )


def _oracle_label(attack_cfg: AttackCfg, pipeline: DefendedPipeline) -> str:
    return {
        'bb_transfer': 'classifier_only',
        'acm': 'acm_mse',
        'noise': 'noise',
        'random_noise': '-',
    }.get(attack_cfg.kind, attack_cfg.oracle or pipeline.gradient_oracle)


def _run_ara(components: Components, pipeline, spec: CellSpec, budget: AttackBudget):
    attack_cfg = spec.attack
    family = components.codec_family(spec.defense, attack_cfg.beta_grid)
    dataset = components.eval_set
    beta_star, result = ara_search(
        pipeline.classifier,
        family,
        dataset.images,
        dataset.labels,
        spec.defense.codec.beta_realism,
        attack_cfg.beta_grid,
        budget,
        attack_cfg.threat,
        indices=range(len(dataset)),
    )

    def _replay(x, y, idx):
        # ara_search already attacked the whole evaluation set
        return AttackResult(
            x_adv=result.x_adv[idx], loss_trace=[], flipped=None, linf_used=result.linf_used[idx])

    stats = evaluate_attack(pipeline, _replay, dataset, components.cfg.data.batch_size)
    extra = {
        'beta_star': beta_star,
        'ara_table': {str(k): v for k, v in result.extra['ara_table'].items()},
    }
    return stats, extra


def landscape_summary(pipeline: DefendedPipeline, components: Components, cfg: ExperimentCfg) -> dict:
    mean_std, landscapes = mean_landscape_std(pipeline, components.eval_set, cfg.landscape)
    return {
        'mean_std': mean_std,
        'stds': [landscape_std(ls) for ls in landscapes],
        'resolution': cfg.landscape.resolution,
        'extent': format_epsilon(cfg.landscape.epsilon),
        'grid': landscapes[0].grid.tolist() if landscapes else None,
    }


def run_experiment(cfg: ExperimentCfg) -> EvalReport:
    """ Train or load all components, run every matrix cell and the enabled diagnostics.

    Cells run on `cfg.threads` worker threads; each cell is deterministic given the seed and
    results are assembled in config order.
    """
    cfg.validate()
    components = Components(cfg).prepare()
    specs = matrix_cells(cfg)
    _logger.info(f'Running {len(specs)} cells on {cfg.threads} thread(s)')

    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            cells = list(pool.map(lambda s: run_cell(components, s), specs))
    else:
        cells = [run_cell(components, s) for s in specs]

    report = EvalReport(
        cells=cells,
        manifest={
            'name': cfg.name,
            'seed': str(cfg.seed),
            'config_hash': cfg.config_hash(),
            'version': __version__,
            'landscape_directions': DIRECTION_KIND,
        },
    )

    for d in cfg.defenses:
        pipeline = components.defense(d)
        if cfg.run_masking:
            surrogate = None
            if pipeline.gradient_oracle == 'bpda_surrogate':
                surrogate = components.surrogate(d.label, pipeline.codec)
            masking_cfg = replace(cfg.masking, seed=cfg.seed)
            report.diagnostics[d.label] = masking_checklist(
                pipeline, components.eval_set, masking_cfg, surrogate=surrogate,
                batch_size=cfg.data.batch_size).to_dict()
        if cfg.run_landscape:
            report.landscapes[d.label] = landscape_summary(pipeline, components, cfg)

    if cfg.run_realism_sweep:
        report.realism_sweep = realism_sweep(cfg, cfg.realism.beta_grid, cfg.realism.lambda_grid, components)
    if cfg.run_iterative_sweep:
        report.iterative_sweep = iterative_sweep(
            cfg, cfg.iterative.defense_iterations, cfg.iterative.attack_iterations, components)
    return report
