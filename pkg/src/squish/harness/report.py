""" Evaluation reports and their on-disk formats.

A run directory holds report.json (the full nested report), matrix.csv (one row per
defense x attack x epsilon cell), manifest.txt (seed, config hash, version) and one RTF1
grid per sampled loss landscape.
"""
import json
import logging
import os
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional

import pandas as pd
import torch

from squish.common.manifest import write_manifest
from squish.data import save_tensorfile

_logger = logging.getLogger(__name__)

REPORT_FILE = 'report.json'
MATRIX_FILE = 'matrix.csv'
MANIFEST_FILE = 'manifest.txt'
MATRIX_COLUMNS = [
    'defense', 'attack', 'threat_model', 'oracle', 'epsilon', 'epsilon_float',
    'clean_acc', 'robust_acc', 'success_rate', 'linf_mean', 'num_images',
]


@dataclass
class CellResult:
    defense: str
    attack: str
    threat_model: str
    oracle: str
    epsilon: str
    epsilon_float: float
    clean_acc: float
    robust_acc: float
    success_rate: float
    linf_mean: float
    num_images: int
    wall_time: float = 0.
    extra: Dict[str, Any] = field(default_factory=dict)


@dataclass
class EvalReport:
    """
    Attributes:
        cells: Matrix cells in config order (defense, then attack, then epsilon).
        diagnostics: Masking report per defense label.
        landscapes: Landscape summary per defense label (mean std, example grid).
        realism_sweep: Realism sweep output, None when not run.
        iterative_sweep: Iterative defense grid, None when not run.
        manifest: Seed, config hash and toolkit version, enough to replay the run.
    """
    cells: List[CellResult] = field(default_factory=list)
    diagnostics: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    landscapes: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    realism_sweep: Optional[Dict[str, Any]] = None
    iterative_sweep: Optional[Dict[str, Any]] = None
    manifest: Dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> 'EvalReport':
        d = dict(d)
        d['cells'] = [CellResult(**c) for c in d.get('cells', [])]
        return cls(**d)

    def payload(self) -> Dict[str, Any]:
        """ Report content without wall-time fields, identical across same-seed reruns. """
        d = self.to_dict()
        for c in d['cells']:
            c.pop('wall_time', None)
        return d

    def matrix(self) -> pd.DataFrame:
        rows = [{k: getattr(c, k) for k in MATRIX_COLUMNS} for c in self.cells]
        return pd.DataFrame(rows, columns=MATRIX_COLUMNS)

    def cell(self, defense: str, attack: str, epsilon: str) -> CellResult:
        for c in self.cells:
            if (c.defense, c.attack, c.epsilon) == (defense, attack, epsilon):
                return c
        raise KeyError(f'No cell ({defense}, {attack}, {epsilon}).')


def emit_report(report: EvalReport, directory: str) -> List[str]:
    """ Write report.json, matrix.csv, manifest.txt and landscape grids. Returns written paths. """
    os.makedirs(directory, exist_ok=True)
    written = []

    path = os.path.join(directory, REPORT_FILE)
    with open(path, 'w') as f:
        json.dump(report.to_dict(), f, indent=2, sort_keys=True)
    written.append(path)

    path = os.path.join(directory, MATRIX_FILE)
    report.matrix().to_csv(path, index=False)
    written.append(path)

    path = os.path.join(directory, MANIFEST_FILE)
    write_manifest(path, report.manifest)
    written.append(path)

    for label, ls in report.landscapes.items():
        if ls.get('grid') is None:
            continue
        path = os.path.join(directory, f'landscape_{label}.rtf')
        save_tensorfile(path, torch.tensor(ls['grid'], dtype=torch.float32))
        written.append(path)

    _logger.info(f'Wrote report ({len(report.cells)} cells) to {directory}')
    return written


def load_report(directory: str) -> EvalReport:
    with open(os.path.join(directory, REPORT_FILE), 'r') as f:
        return EvalReport.from_dict(json.load(f))


def load_matrix(directory: str) -> pd.DataFrame:
    return pd.read_csv(
        os.path.join(directory, MATRIX_FILE),
        dtype={'epsilon': str},
        float_precision='round_trip',
    )
