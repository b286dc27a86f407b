from .components import Components, codec_key, load_data, with_iterations
from .config import (
    ATTACK_KINDS,
    DEFENSE_KINDS,
    AttackCfg,
    DefenseCfg,
    ExperimentCfg,
    IterativeSweepCfg,
    RealismSweepCfg,
    load_experiment,
)
from .plots import emit_plots
from .report import CellResult, EvalReport, MATRIX_COLUMNS, emit_report, load_matrix, load_report
from .runner import CellSpec, landscape_summary, matrix_cells, run_cell, run_experiment
from .sweeps import iterative_sweep, realism_sweep
