""" Experiment configuration.

One ExperimentCfg describes a full run: data, component training, the defense x attack x
epsilon matrix, diagnostics and sweeps. Every section is a Serializable dataclass so a run
loads from YAML / JSON (see configs/canonical.yaml) and overrides compose on the CLI.
"""
import hashlib
import json
from dataclasses import dataclass, field
from typing import List, Optional

import yaml
from simple_parsing.helpers import Serializable

from squish.attacks import AttackBudget, ThreatModel
from squish.common.config import TrainCfg, check, validate_nested
from squish.common.epsilon import parse_epsilon
from squish.common.errors import ConfigError
from squish.data import DataCfg
from squish.diagnostics import LandscapeCfg, MaskingCfg
from squish.jpeg import JpegCfg
from squish.nets import CodecCfg, ORACLE_TAGS, SurrogateCfg

DEFENSE_KINDS = ('identity', 'jpeg', 'codec', 'quantize')
ATTACK_KINDS = ('none', 'fgsm', 'ifgsm', 'pgd', 'bb_transfer', 'acm', 'ara', 'noise', 'random_noise')


@dataclass
class DefenseCfg(Serializable):
    """
    Attributes:
        name: Report label, defaults to the kind.
        kind: identity | jpeg | codec | quantize.
        jpeg: Settings for kind=jpeg.
        codec: Settings for kind=codec.
        checkpoint: Codec checkpoint directory, the codec is trained when absent.
        quantize_levels: Pixel levels for kind=quantize.
        straight_through: kind=quantize backward, identity instead of the true zero gradient.
        gradient_oracle: Oracle used by attacks that do not name one.
    """
    name: Optional[str] = None
    kind: str = 'identity'
    jpeg: JpegCfg = field(default_factory=JpegCfg)
    codec: CodecCfg = field(default_factory=CodecCfg)
    checkpoint: Optional[str] = None
    quantize_levels: int = 8
    straight_through: bool = False
    gradient_oracle: str = 'true_wb'

    @property
    def label(self) -> str:
        return self.name or self.kind

    def validate(self):
        check(self.kind in DEFENSE_KINDS, 'kind', f'must be one of {DEFENSE_KINDS}, got {self.kind!r}')
        check(self.gradient_oracle in ORACLE_TAGS, 'gradient_oracle',
              f'must be one of {ORACLE_TAGS}, got {self.gradient_oracle!r}')
        if self.kind == 'jpeg':
            validate_nested(self.jpeg, 'jpeg')
        elif self.kind == 'codec':
            validate_nested(self.codec, 'codec')
        elif self.kind == 'quantize':
            check(self.quantize_levels >= 2, 'quantize_levels', 'must be >= 2')


@dataclass
class AttackCfg(Serializable):
    """
    Attributes:
        name: Report label, defaults to the kind.
        kind: none | fgsm | ifgsm | pgd | bb_transfer | acm | ara | noise | random_noise.
        oracle: Gradient oracle tag, defaults to the defense's.
        threat_model: black_box | gray_box | white_box.
        budget: Attack budget, epsilon is overridden by the experiment epsilon grid.
        beta_grid: Realism weights of the sibling codecs ARA differentiates through.
    """
    name: Optional[str] = None
    kind: str = 'pgd'
    oracle: Optional[str] = None
    threat_model: str = 'white_box'
    budget: AttackBudget = field(default_factory=AttackBudget)
    beta_grid: List[float] = field(default_factory=lambda: [0.0, 0.5, 2.0])

    @property
    def label(self) -> str:
        return self.name or self.kind

    @property
    def threat(self) -> ThreatModel:
        return ThreatModel(self.threat_model)

    def validate(self):
        check(self.kind in ATTACK_KINDS, 'kind', f'must be one of {ATTACK_KINDS}, got {self.kind!r}')
        check(self.threat_model in ThreatModel.__members__, 'threat_model',
              f'must be one of {list(ThreatModel.__members__)}, got {self.threat_model!r}')
        if self.oracle is not None:
            check(self.oracle in ORACLE_TAGS, 'oracle', f'must be one of {ORACLE_TAGS}, got {self.oracle!r}')
        validate_nested(self.budget, 'budget')
        if self.kind == 'ara':
            check(len(self.beta_grid) >= 1, 'beta_grid', 'must not be empty')


@dataclass
class RealismSweepCfg(Serializable):
    lambda_grid: List[float] = field(default_factory=lambda: [1.0, 4.0, 16.0])
    beta_grid: List[float] = field(default_factory=lambda: [0.0, 0.5, 2.0])
    epsilons: List[str] = field(default_factory=lambda: ['8/255'])
    steps: int = 10

    def validate(self):
        check(len(self.lambda_grid) >= 1, 'lambda_grid', 'must not be empty')
        check(len(self.beta_grid) >= 1, 'beta_grid', 'must not be empty')
        check(len(self.epsilons) >= 1, 'epsilons', 'must not be empty')
        for i, e in enumerate(self.epsilons):
            parse_epsilon(e, f'epsilons[{i}]')
        check(self.steps >= 1, 'steps', 'must be >= 1')


@dataclass
class IterativeSweepCfg(Serializable):
    """
    Attributes:
        defense: Label of the configured defense to iterate, a JPEG defense at jpeg.quality when None.
        jpeg: JPEG settings used when no defense label is given.
        defense_iterations: Columns, codec applications performed by the defense.
        attack_iterations: Rows, codec applications the attacker differentiates through.
    """
    defense: Optional[str] = None
    jpeg: JpegCfg = field(default_factory=JpegCfg)
    defense_iterations: List[int] = field(default_factory=lambda: [1, 2, 3])
    attack_iterations: List[int] = field(default_factory=lambda: [1, 2, 3])
    epsilon: str = '8/255'
    steps: int = 10

    def validate(self):
        check(len(self.defense_iterations) >= 1 and min(self.defense_iterations) >= 1,
              'defense_iterations', 'must be a non-empty list of integers >= 1')
        check(len(self.attack_iterations) >= 1 and min(self.attack_iterations) >= 1,
              'attack_iterations', 'must be a non-empty list of integers >= 1')
        parse_epsilon(self.epsilon, 'epsilon')
        validate_nested(self.jpeg, 'jpeg')


@dataclass
class ExperimentCfg(Serializable):
    """ A full evaluation run.

    Attributes:
        name: Run name.
        seed: Experiment seed, per image attack seeds derive from it.
        out_dir: Output directory (report, checkpoints, plots).
        threads: Worker threads for matrix cells.
        data: Dataset source.
        classifier_checkpoint: Classifier checkpoint directory, trained when absent.
        classifier_train: Classifier training settings.
        classifier_width: Base width of a trained classifier.
        codec_train: Codec training settings.
        surrogate: Surrogate training settings.
        defenses: Defense list.
        attacks: Attack list.
        epsilons: Epsilon grid, exact rational strings.
        masking: Checklist settings.
        run_masking: Run the masking checklist per defense.
        landscape: Landscape settings.
        run_landscape: Sample loss landscapes per defense.
        realism: Realism sweep settings.
        run_realism_sweep: Run the realism sweep.
        iterative: Iterative defense sweep settings.
        run_iterative_sweep: Run the iterative sweep.
    """
    name: str = 'experiment'
    seed: int = 0
    out_dir: str = 'runs/experiment'
    threads: int = 1
    data: DataCfg = field(default_factory=DataCfg)
    classifier_checkpoint: Optional[str] = None
    classifier_train: TrainCfg = field(default_factory=TrainCfg)
    classifier_width: int = 16
    codec_train: TrainCfg = field(default_factory=TrainCfg)
    surrogate: SurrogateCfg = field(default_factory=SurrogateCfg)
    defenses: List[DefenseCfg] = field(default_factory=lambda: [DefenseCfg()])
    attacks: List[AttackCfg] = field(default_factory=list)
    epsilons: List[str] = field(default_factory=lambda: ['4/255', '8/255', '16/255'])
    masking: MaskingCfg = field(default_factory=MaskingCfg)
    run_masking: bool = False
    landscape: LandscapeCfg = field(default_factory=LandscapeCfg)
    run_landscape: bool = False
    realism: RealismSweepCfg = field(default_factory=RealismSweepCfg)
    run_realism_sweep: bool = False
    iterative: IterativeSweepCfg = field(default_factory=IterativeSweepCfg)
    run_iterative_sweep: bool = False

    def validate(self):
        check(self.threads >= 1, 'threads', f'must be >= 1, got {self.threads}')
        check(self.classifier_width >= 1, 'classifier_width', 'must be >= 1')
        check(len(self.epsilons) >= 1, 'epsilons', 'epsilon grid must not be empty')
        for i, e in enumerate(self.epsilons):
            parse_epsilon(e, f'epsilons[{i}]')
        for prefix in ('data', 'classifier_train', 'codec_train', 'surrogate', 'masking', 'landscape',
                       'realism', 'iterative'):
            validate_nested(getattr(self, prefix), prefix)
        check(len(self.defenses) >= 1, 'defenses', 'must not be empty')
        labels = set()
        for i, d in enumerate(self.defenses):
            validate_nested(d, f'defenses[{i}]')
            check(d.label not in labels, f'defenses[{i}].name', f'duplicate defense label {d.label!r}')
            labels.add(d.label)
        for i, a in enumerate(self.attacks):
            validate_nested(a, f'attacks[{i}]')
        if self.iterative.defense is not None:
            check(self.iterative.defense in labels, 'iterative.defense',
                  f'unknown defense {self.iterative.defense!r}, must be one of {sorted(labels)}')
        return self

    def config_hash(self) -> str:
        """ Hash of every setting that can change results (out_dir and threads excluded). """
        d = self.to_dict()
        d.pop('out_dir', None)
        d.pop('threads', None)
        payload = json.dumps(d, sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def load_experiment(path: str) -> ExperimentCfg:
    """ Load and validate an experiment config (YAML or JSON by extension). """
    try:
        cfg = ExperimentCfg.load(path)
    except (OSError, ValueError, TypeError, KeyError, yaml.YAMLError) as e:
        raise ConfigError('', f'cannot load experiment config {path}: {e}') from None
    if not isinstance(cfg, ExperimentCfg):
        raise ConfigError('', f'{path} does not describe an experiment')
    return cfg.validate()
