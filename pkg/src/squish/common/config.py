from dataclasses import dataclass, replace

from simple_parsing.helpers import Serializable

from .errors import ConfigError


def check(cond: bool, path: str, message: str):
    if not cond:
        raise ConfigError(path, message)


def validate_nested(cfg, prefix: str):
    """ Run cfg.validate() re-rooting any ConfigError under `prefix`. """
    try:
        cfg.validate()
    except ConfigError as e:
        raise e.nested(prefix) from None


@dataclass
class TrainCfg(Serializable):
    """ Optimisation settings shared by the classifier, codec and surrogate training loops.

    Attributes:
        epochs: Full passes over the training split.
        lr: Adam learning rate.
        batch_size: Samples per optimisation step.
        seed: Seed for parameter init and shuffling, training is bit-reproducible per seed.
        lr_step: StepLR step size in epochs (0 disables the schedule).
        lr_gamma: StepLR decay factor.
    """
    epochs: int = 8
    lr: float = 1e-3
    batch_size: int = 64
    seed: int = 0
    lr_step: int = 0
    lr_gamma: float = 0.1

    def validate(self):
        check(self.epochs >= 0, 'epochs', f'must be >= 0, got {self.epochs}')
        check(self.lr >= 0, 'lr', f'must be >= 0, got {self.lr}')
        check(self.batch_size >= 1, 'batch_size', f'must be >= 1, got {self.batch_size}')
        check(self.lr_step >= 0, 'lr_step', f'must be >= 0, got {self.lr_step}')

    def merge(self, **kwargs):
        # override fields that are explicitly set (not None)
        changes = {k: v for k, v in kwargs.items() if v is not None}
        return replace(self, **changes)
