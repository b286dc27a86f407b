import torch
import torch.nn as nn

from .classifier import predict
from .codec import IdentityCodec

ORACLE_TAGS = ('true_wb', 'bpda_st', 'bpda_surrogate', 'classifier_only', 'noise', 'acm_mse')


class DefendedPipeline(nn.Module):
    """ h = f o g^k: codec g applied `defense_iterations` times, then classifier f.

    Args:
        classifier: f.
        codec: g, any codec module with `reconstruct` and `forward(x, iterations)`. None means identity.
        gradient_oracle: Default oracle tag used when an attack does not name one.
        name: Label used in reports.
    """

    def __init__(
            self,
            classifier: nn.Module,
            codec: nn.Module = None,
            gradient_oracle: str = 'true_wb',
            name: str = None,
    ):
        super().__init__()
        assert gradient_oracle in ORACLE_TAGS, \
            f'Unknown gradient oracle {gradient_oracle}, must be one of {ORACLE_TAGS}.'
        self.classifier = classifier
        self.codec = codec if codec is not None else IdentityCodec()
        self.gradient_oracle = gradient_oracle
        self.name = name or type(self.codec).__name__

    @property
    def defense_iterations(self) -> int:
        return getattr(self.codec, 'defense_iterations', 1)

    def defend(self, x: torch.Tensor, iterations: int = None) -> torch.Tensor:
        return self.codec(x, iterations=iterations)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.classifier(self.defend(x))

    def predict(self, x: torch.Tensor, batch_size: int = 256) -> torch.Tensor:
        return predict(self, x, batch_size)


def pipeline_forward(h: DefendedPipeline, x: torch.Tensor) -> torch.Tensor:
    return h(x)
