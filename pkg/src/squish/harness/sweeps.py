""" Realism and iterative-defense sweeps. """
import logging
from dataclasses import replace
from typing import Any, Dict, Optional, Sequence

from squish.attacks import AttackBudget, true_wb_oracle, pgd
from squish.common.epsilon import format_epsilon
from squish.diagnostics import evaluate_attack
from squish.jpeg import JpegCodec
from squish.nets import CodecCfg, DefendedPipeline
from .components import Components, with_iterations
from .config import ExperimentCfg

_logger = logging.getLogger(__name__)


def _wb_pgd(pipeline, budget: AttackBudget, attack_iterations: Optional[int] = None):
    def _attack(x, y, idx):
        oracle = true_wb_oracle(pipeline, attack_iterations=attack_iterations)
        return pgd(pipeline, oracle, x, y, budget, idx)
    return _attack


def _normalise(values: Sequence[float]) -> Dict[float, float]:
    lo, hi = min(values), max(values)
    return {v: (v - lo) / (hi - lo) if hi > lo else 0. for v in values}


def _base_codec_cfg(cfg: ExperimentCfg) -> CodecCfg:
    for d in cfg.defenses:
        if d.kind == 'codec':
            return d.codec
    return CodecCfg()


def realism_sweep(
        cfg: ExperimentCfg,
        beta_grid: Sequence[float],
        lambda_grid: Sequence[float],
        components: Optional[Components] = None,
) -> Dict[str, Any]:
    """ White-box PGD robust accuracy for every (lambda, beta) codec.

    Returns:
        points: one entry per (lambda, beta, epsilon) with raw and [0,1]-normalised weights.
        drop: per epsilon, robust accuracy at max beta minus at min beta, averaged over lambda.
        best_lambda: per epsilon and beta, the lambda with the highest robust accuracy.
    """
    components = components or Components(cfg)
    base = _base_codec_cfg(cfg)
    dataset = components.eval_set
    lambda_norm = _normalise(lambda_grid)
    beta_norm = _normalise(beta_grid)
    epsilons = [format_epsilon(e) for e in cfg.realism.epsilons]

    acc = {}
    points = []
    for lam in lambda_grid:
        for beta in beta_grid:
            codec = components.codec(replace(base, lambda_distortion=lam, beta_realism=beta))
            pipeline = DefendedPipeline(components.classifier, codec, name=f'codec_l{lam:g}_b{beta:g}')
            for eps in epsilons:
                budget = AttackBudget(epsilon=eps, steps=cfg.realism.steps, seed=cfg.seed)
                stats = evaluate_attack(pipeline, _wb_pgd(pipeline, budget), dataset, cfg.data.batch_size)
                acc[(lam, beta, eps)] = stats.robust_accuracy
                points.append(dict(
                    lambda_distortion=lam,
                    beta_realism=beta,
                    lambda_norm=lambda_norm[lam],
                    beta_norm=beta_norm[beta],
                    epsilon=eps,
                    clean_acc=stats.clean_accuracy,
                    robust_acc=stats.robust_accuracy,
                ))
                _logger.info(f'realism sweep lambda={lam:g} beta={beta:g} eps={eps}: robust {stats.robust_accuracy:.4f}')

    b_lo, b_hi = min(beta_grid), max(beta_grid)
    drop = {
        eps: sum(acc[(lam, b_hi, eps)] - acc[(lam, b_lo, eps)] for lam in lambda_grid) / len(lambda_grid)
        for eps in epsilons
    }
    best_lambda = {
        eps: {str(beta): max(lambda_grid, key=lambda lam: (acc[(lam, beta, eps)], -lam)) for beta in beta_grid}
        for eps in epsilons
    }
    return dict(
        lambda_grid=list(lambda_grid),
        beta_grid=list(beta_grid),
        epsilons=epsilons,
        points=points,
        drop=drop,
        best_lambda=best_lambda,
    )


def _iterated_codec(cfg: ExperimentCfg, components: Components):
    label = cfg.iterative.defense
    if label is None:
        return f'jpeg_q{cfg.iterative.jpeg.quality}', JpegCodec(cfg.iterative.jpeg)
    for d in cfg.defenses:
        if d.label == label:
            return label, components.defense(d).codec
    raise KeyError(f'Unknown defense {label!r}.')


def iterative_sweep(
        cfg: ExperimentCfg,
        defense_iters_grid: Sequence[int],
        attack_iters_grid: Sequence[int],
        components: Optional[Components] = None,
) -> Dict[str, Any]:
    """ Robust accuracy grid, rows = codec applications the attacker differentiates through,
    columns = codec applications the defense performs.
    """
    components = components or Components(cfg)
    label, codec = _iterated_codec(cfg, components)
    dataset = components.eval_set
    budget = AttackBudget(epsilon=cfg.iterative.epsilon, steps=cfg.iterative.steps, seed=cfg.seed)

    grid = []
    for a in attack_iters_grid:
        row = []
        for d in defense_iters_grid:
            pipeline = DefendedPipeline(components.classifier, with_iterations(codec, d), name=label)
            stats = evaluate_attack(pipeline, _wb_pgd(pipeline, budget, a), dataset, cfg.data.batch_size)
            row.append(stats.robust_accuracy)
            _logger.info(f'iterative sweep {label} attack_iters={a} defense_iters={d}: robust {stats.robust_accuracy:.4f}')
        grid.append(row)
    return dict(
        defense=label,
        epsilon=format_epsilon(cfg.iterative.epsilon),
        attack_iterations=list(attack_iters_grid),
        defense_iterations=list(defense_iters_grid),
        grid=grid,
    )
