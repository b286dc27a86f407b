""" SVG figures for a report: realism drop bars, accuracy vs epsilon, landscapes, iterative grid. """
import logging
import os
from typing import List

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .report import EvalReport  # noqa: E402

_logger = logging.getLogger(__name__)

# fixed id salt so identical reports give identical SVG bytes
matplotlib.rcParams['svg.hashsalt'] = 'squish'


def _save(fig, path: str, written: List[str]):
    fig.savefig(path, format='svg', metadata={'Date': None})
    plt.close(fig)
    written.append(path)


def plot_realism_drop(report: EvalReport, path: str, written: List[str]):
    drop = report.realism_sweep['drop']
    eps = list(drop.keys())
    fig, ax = plt.subplots(1, 1, figsize=(6, 4))
    ax.bar(np.arange(len(eps)), [drop[e] for e in eps], color='tab:blue')
    ax.set_xticks(np.arange(len(eps)))
    ax.set_xticklabels(eps)
    ax.set_xlabel('epsilon')
    ax.set_ylabel('robust acc (max beta) - robust acc (min beta)')
    ax.set_title('Robust accuracy lost by reducing realism')
    ax.axhline(0., color='black', linewidth=0.8)
    _save(fig, path, written)


def plot_accuracy_vs_epsilon(report: EvalReport, path: str, written: List[str]):
    df = report.matrix()
    df = df[df['epsilon_float'] > 0]
    fig, ax = plt.subplots(1, 1, figsize=(7, 5))
    for (defense, attack), rows in df.groupby(['defense', 'attack'], sort=False):
        rows = rows.sort_values('epsilon_float')
        ax.plot(rows['epsilon_float'] * 255, rows['robust_acc'], marker='o', label=f'{defense} / {attack}')
    ax.set_xlabel('epsilon (x 1/255)')
    ax.set_ylabel('robust accuracy')
    ax.set_ylim(0., 1.)
    ax.legend(fontsize='small')
    _save(fig, path, written)


def plot_heatmap(grid, path: str, written: List[str], title: str, xlabel: str, ylabel: str,
                 xticks=None, yticks=None, cmap='viridis'):
    grid = np.asarray(grid, dtype=np.float64)
    fig, ax = plt.subplots(1, 1, figsize=(5, 4))
    mesh = ax.pcolormesh(grid, cmap=cmap)
    fig.colorbar(mesh, ax=ax)
    if xticks is not None:
        ax.set_xticks(np.arange(len(xticks)) + 0.5)
        ax.set_xticklabels([str(t) for t in xticks])
    if yticks is not None:
        ax.set_yticks(np.arange(len(yticks)) + 0.5)
        ax.set_yticklabels([str(t) for t in yticks])
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    _save(fig, path, written)


def emit_plots(report: EvalReport, directory: str) -> List[str]:
    """ Write one SVG per available report section, sections that are missing are skipped
    with a warning. Returns the written paths.
    """
    os.makedirs(directory, exist_ok=True)
    written = []

    if report.realism_sweep:
        plot_realism_drop(report, os.path.join(directory, 'realism_drop.svg'), written)
    else:
        _logger.warning('No realism sweep in report, skipping realism_drop.svg')

    if any(c.epsilon_float > 0 for c in report.cells):
        plot_accuracy_vs_epsilon(report, os.path.join(directory, 'accuracy_vs_epsilon.svg'), written)
    else:
        _logger.warning('No attacked cells in report, skipping accuracy_vs_epsilon.svg')

    landscapes = {k: v for k, v in report.landscapes.items() if v.get('grid') is not None}
    if not landscapes:
        _logger.warning('No landscapes in report, skipping landscape heatmaps')
    for label, ls in landscapes.items():
        plot_heatmap(
            ls['grid'], os.path.join(directory, f'landscape_{label}.svg'), written,
            title=f'{label}: loss landscape (std {ls["mean_std"]:.4f})',
            xlabel='direction 2', ylabel='direction 1', cmap='magma')

    if report.iterative_sweep:
        sweep = report.iterative_sweep
        # darker cells mean lower robust accuracy
        plot_heatmap(
            sweep['grid'], os.path.join(directory, 'iterative_grid.svg'), written,
            title=f'{sweep["defense"]} robust accuracy, eps {sweep["epsilon"]}',
            xlabel='defense iterations', ylabel='attack iterations',
            xticks=sweep['defense_iterations'], yticks=sweep['attack_iterations'], cmap='gray')
    else:
        _logger.warning('No iterative sweep in report, skipping iterative_grid.svg')

    return written
