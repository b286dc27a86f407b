""" squish command line.

    squish gen-data --out runs/data
    squish evaluate --config configs/canonical.yaml --out runs/canonical --threads 4
    squish report --out runs/canonical

Exit codes: 0 success, 2 config error, 3 checkpoint error, 4 any other failure.
"""
import json
import logging
import os
import sys
from dataclasses import dataclass, replace
from typing import Optional, Union

import simple_parsing

from squish.common.epsilon import format_epsilon
from squish.common.errors import CheckpointError, ConfigError
from squish.data import save_dataset
from squish.harness import (
    AttackCfg,
    CellSpec,
    Components,
    EvalReport,
    ExperimentCfg,
    emit_plots,
    emit_report,
    iterative_sweep,
    landscape_summary,
    load_data,
    load_experiment,
    load_report,
    realism_sweep,
    run_cell,
    run_experiment,
)

_logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CHECKPOINT = 3
EXIT_FAILURE = 4


@dataclass
class CommonArgs:
    config: Optional[str] = None  # experiment config file (yaml / json)
    seed: Optional[int] = None  # overrides the config seed
    out: Optional[str] = None  # output directory, overrides the config out_dir
    threads: Optional[int] = None  # worker threads for matrix cells
    log_level: str = 'INFO'

    def experiment(self) -> ExperimentCfg:
        cfg = load_experiment(self.config) if self.config else ExperimentCfg()
        changes = {k: v for k, v in dict(seed=self.seed, out_dir=self.out, threads=self.threads).items() if v is not None}
        return replace(cfg, **changes).validate()

    def find_defense(self, cfg: ExperimentCfg, label: Optional[str]):
        if label is None:
            return cfg.defenses[0]
        for d in cfg.defenses:
            if d.label == label:
                return d
        raise ConfigError('defense', f'unknown defense {label!r}, must be one of {[d.label for d in cfg.defenses]}')


@dataclass
class GenData(CommonArgs):
    """ Generate (or read) the dataset and write the RTF1 cache. """

    def execute(self):
        cfg = self.experiment()
        out = os.path.join(cfg.out_dir, 'data')
        ds = load_data(replace(cfg.data, cache_dir=None), cfg.seed)
        save_dataset(ds, out)
        _logger.info(f'Wrote {len(ds)} images to {out}')


@dataclass
class TrainClassifier(CommonArgs):
    """ Train the classifier f (or load it when its checkpoint exists). """

    def execute(self):
        components = Components(self.experiment())
        components.classifier


@dataclass
class TrainCodec(CommonArgs):
    """ Train one learned codec g, weights from the named codec defense with optional overrides. """
    defense: Optional[str] = None
    lambda_distortion: Optional[float] = None
    beta_realism: Optional[float] = None
    quality_levels: Optional[int] = None

    def execute(self):
        cfg = self.experiment()
        d = self.find_defense(cfg, self.defense)
        overrides = dict(
            lambda_distortion=self.lambda_distortion,
            beta_realism=self.beta_realism,
            quality_levels=self.quality_levels,
        )
        codec_cfg = replace(d.codec, **{k: v for k, v in overrides.items() if v is not None})
        try:
            codec_cfg.validate()
        except ConfigError as e:
            raise e.nested('codec') from None
        components = Components(cfg)
        components.codec(codec_cfg)


@dataclass
class TrainSurrogate(CommonArgs):
    """ Train the surrogate purifier g' for a defense's codec. """
    defense: Optional[str] = None

    def execute(self):
        cfg = self.experiment()
        d = self.find_defense(cfg, self.defense)
        components = Components(cfg)
        components.surrogate(d.label, components.defense(d).codec)


@dataclass
class Attack(CommonArgs):
    """ Run one matrix cell (defense x attack x epsilon) and write its result as JSON. """
    defense: Optional[str] = None
    attack: Optional[str] = None  # attack label from the config, or an attack kind
    epsilon: str = '8/255'

    def execute(self):
        cfg = self.experiment()
        d = self.find_defense(cfg, self.defense)
        attack = next((a for a in cfg.attacks if a.label == self.attack), None)
        if attack is None:
            attack = AttackCfg(kind=self.attack or 'pgd')
            try:
                attack.validate()
            except ConfigError as e:
                raise e.nested('attack') from None
        cell = run_cell(Components(cfg).prepare(), CellSpec(d, attack, format_epsilon(self.epsilon)))
        os.makedirs(cfg.out_dir, exist_ok=True)
        path = os.path.join(cfg.out_dir, f'cell_{d.label}_{attack.label}.json')
        with open(path, 'w') as f:
            json.dump(EvalReport(cells=[cell]).to_dict()['cells'][0], f, indent=2, sort_keys=True)
        _logger.info(f'Wrote {path}')


@dataclass
class Evaluate(CommonArgs):
    """ Run the full experiment and write report, matrix and plots. """

    def execute(self):
        cfg = self.experiment()
        report = run_experiment(cfg)
        emit_report(report, cfg.out_dir)
        emit_plots(report, cfg.out_dir)


@dataclass
class Landscape(CommonArgs):
    """ Sample loss landscapes for every defense. """

    def execute(self):
        cfg = self.experiment()
        components = Components(cfg).prepare()
        report = EvalReport(manifest={'seed': str(cfg.seed), 'config_hash': cfg.config_hash()})
        for d in cfg.defenses:
            report.landscapes[d.label] = landscape_summary(components.defense(d), components, cfg)
        emit_report(report, cfg.out_dir)
        emit_plots(report, cfg.out_dir)


@dataclass
class SweepRealism(CommonArgs):
    """ Robust accuracy over the lambda x beta codec grid. """

    def execute(self):
        cfg = self.experiment()
        report = EvalReport(manifest={'seed': str(cfg.seed), 'config_hash': cfg.config_hash()})
        report.realism_sweep = realism_sweep(cfg, cfg.realism.beta_grid, cfg.realism.lambda_grid)
        emit_report(report, cfg.out_dir)
        emit_plots(report, cfg.out_dir)


@dataclass
class SweepIterative(CommonArgs):
    """ Robust accuracy over attack iterations x defense iterations. """

    def execute(self):
        cfg = self.experiment()
        report = EvalReport(manifest={'seed': str(cfg.seed), 'config_hash': cfg.config_hash()})
        report.iterative_sweep = iterative_sweep(
            cfg, cfg.iterative.defense_iterations, cfg.iterative.attack_iterations)
        emit_report(report, cfg.out_dir)
        emit_plots(report, cfg.out_dir)


@dataclass
class Report(CommonArgs):
    """ Re-render plots for an existing run directory and log its matrix. """

    def execute(self):
        directory = self.out or self.experiment().out_dir
        report = load_report(directory)
        emit_plots(report, directory)
        _logger.info('\n' + report.matrix().to_string(index=False))


_commands = {
    'gen-data': GenData,
    'train-classifier': TrainClassifier,
    'train-codec': TrainCodec,
    'train-surrogate': TrainSurrogate,
    'attack': Attack,
    'evaluate': Evaluate,
    'landscape': Landscape,
    'sweep-realism': SweepRealism,
    'sweep-iterative': SweepIterative,
    'report': Report,
}


@dataclass
class Program:
    command: Union[
        GenData, TrainClassifier, TrainCodec, TrainSurrogate, Attack,
        Evaluate, Landscape, SweepRealism, SweepIterative, Report,
    ] = simple_parsing.subparsers(_commands)


def main(argv=None) -> int:
    args = simple_parsing.parse(
        Program,
        args=argv,
        add_option_string_dash_variants=simple_parsing.DashVariant.DASH,
    )
    command = args.command
    logging.basicConfig(
        level=getattr(logging, command.log_level.upper(), logging.INFO),
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
    )
    try:
        command.execute()
    except ConfigError as e:
        _logger.error(f'Config error: {e}')
        return EXIT_CONFIG
    except CheckpointError as e:
        _logger.error(f'Checkpoint error: {e}')
        return EXIT_CHECKPOINT
    except Exception as e:
        _logger.exception(f'{type(e).__name__}: {e}')
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
