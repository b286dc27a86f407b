""" Gradient oracles: how an attack obtains grad_x of its objective.

An oracle is called as `oracle(x, y, origin)` and returns the per-image objective at x and
the gradient of its sum with respect to x. `origin` is the clean batch, only the ACM
objective uses it. Which oracle may be built depends on the threat model:

    true_wb          white_box   gradient of L(f(g(x)), y)
    bpda_st          gray_box    forward f(g(x)), gradient of f taken at g(x)
    bpda_surrogate   gray_box    forward f(g(x)), gradient through f(g'(x))
    classifier_only  black_box   gradient of L(f(x), y), defense untouched
    noise            black_box   standard normal gradient (gray_box when it evaluates h)
    acm_mse          white_box   gradient of MSE(origin, g(x))
"""
import logging
from typing import Callable, Optional, Sequence, Tuple

import torch
import torch.nn as nn

from squish.autodiff import Tape, softmax_cross_entropy
from squish.common.errors import OracleError, ShapeError, ThreatModelError
from squish.common.random import derive_seed, make_generator
from squish.nets import DefendedPipeline
from .bpda import straight_through, substitute
from .budget import ThreatModel

_logger = logging.getLogger(__name__)

Objective = Callable[[torch.Tensor, torch.Tensor, Optional[torch.Tensor]], torch.Tensor]


class GradientOracle:
    """ Tape-backed gradient of a per-image objective.

    Args:
        tag: Oracle kind.
        objective: (x, y, origin) -> per-image loss [B].
        threat_model: Threat model the oracle was built under.
        pipeline: Pipeline the objective attacks, if any.
    """

    def __init__(
            self,
            tag: str,
            objective: Objective,
            threat_model: ThreatModel = ThreatModel.white_box,
            pipeline: Optional[nn.Module] = None,
            gradient_fn: Optional[Callable[[torch.Tensor], torch.Tensor]] = None,
    ):
        self.tag = tag
        self.objective = objective
        self.threat_model = ThreatModel(threat_model)
        self.pipeline = pipeline
        self._gradient_fn = gradient_fn

    def loss(self, x: torch.Tensor, y: torch.Tensor, origin: torch.Tensor = None) -> torch.Tensor:
        with torch.no_grad():
            return self.objective(x, y, origin).detach()

    def __call__(
            self,
            x: torch.Tensor,
            y: torch.Tensor,
            origin: torch.Tensor = None,
    ) -> Tuple[torch.Tensor, torch.Tensor]:
        if self._gradient_fn is not None:
            return self.loss(x, y, origin), self._gradient_fn(x)
        with Tape() as tape:
            xw = tape.watch(x)
            losses = self.objective(xw, y, origin)
            grads = tape.backward(losses.sum())
        return losses.detach(), grads[xw.node_id]

    def __repr__(self):
        return f'GradientOracle(tag={self.tag}, threat_model={self.threat_model.value})'


_required_threat = {
    'true_wb': ThreatModel.white_box,
    'bpda_st': ThreatModel.gray_box,
    'bpda_surrogate': ThreatModel.gray_box,
    'classifier_only': ThreatModel.black_box,
    'noise': ThreatModel.black_box,
    'acm_mse': ThreatModel.white_box,
}


def check_threat(tag: str, threat_model: ThreatModel, required: ThreatModel = None):
    required = required or _required_threat[tag]
    threat_model = ThreatModel(threat_model)
    if not threat_model.allows(required):
        raise ThreatModelError(
            f'Oracle {tag} needs at least {required.value} access, threat model is {threat_model.value}.')


def _cross_entropy(model: Callable) -> Objective:
    def _objective(x, y, origin=None):
        return softmax_cross_entropy(model(x), y, reduction='none')
    return _objective


def true_wb_oracle(
        pipeline: DefendedPipeline,
        threat_model: ThreatModel = ThreatModel.white_box,
        attack_iterations: Optional[int] = None,
) -> GradientOracle:
    """ Exact gradient of the defended pipeline, optionally differentiating through
    `attack_iterations` codec applications instead of the defense's own count.
    """
    check_threat('true_wb', threat_model)

    def _model(x):
        return pipeline.classifier(pipeline.defend(x, iterations=attack_iterations))

    return GradientOracle('true_wb', _cross_entropy(_model), threat_model, pipeline)


def bpda_st_oracle(pipeline: DefendedPipeline, threat_model: ThreatModel = ThreatModel.gray_box) -> GradientOracle:
    check_threat('bpda_st', threat_model)
    defend = straight_through(lambda x: pipeline.defend(x))

    def _model(x):
        return pipeline.classifier(defend(x))

    return GradientOracle('bpda_st', _cross_entropy(_model), threat_model, pipeline)


def bpda_surrogate_oracle(
        pipeline: DefendedPipeline,
        surrogate: Optional[nn.Module],
        threat_model: ThreatModel = ThreatModel.gray_box,
) -> GradientOracle:
    check_threat('bpda_surrogate', threat_model)
    if surrogate is None:
        raise OracleError('bpda_surrogate needs a trained surrogate purifier.')
    iterations = pipeline.defense_iterations

    def _surrogate(x):
        for _ in range(iterations):
            x = surrogate(x)
        return x

    defend = substitute(lambda x: pipeline.defend(x), _surrogate)

    def _model(x):
        return pipeline.classifier(defend(x))

    return GradientOracle('bpda_surrogate', _cross_entropy(_model), threat_model, pipeline)


def classifier_only_oracle(classifier: nn.Module, threat_model: ThreatModel = ThreatModel.black_box) -> GradientOracle:
    check_threat('classifier_only', threat_model)
    return GradientOracle('classifier_only', _cross_entropy(classifier), threat_model)


def noise_gradient_oracle(
        shape,
        seed: int = 0,
        pipeline: Optional[nn.Module] = None,
        threat_model: ThreatModel = ThreatModel.gray_box,
        indices: Optional[Sequence[int]] = None,
) -> GradientOracle:
    """ Gradient replaced by fresh standard normal noise per call.

    Image i draws from its own stream seeded with derive_seed(seed, indices[i]), so the noise an
    image sees does not depend on the rest of the batch. With a pipeline the reported loss is the
    pipeline's cross-entropy, otherwise zero.
    """
    required = ThreatModel.gray_box if pipeline is not None else ThreatModel.black_box
    check_threat('noise', threat_model, required)
    shape = tuple(shape)
    if indices is None:
        indices = range(shape[0])
    generators = [make_generator(derive_seed(seed, int(index))) for index in indices]
    assert len(generators) == shape[0], f'Expected {shape[0]} indices, got {len(generators)}'

    def _gradient(x):
        if tuple(x.shape) != shape:
            raise ShapeError(f'noise oracle built for shape {shape}, called with {tuple(x.shape)}.')
        return torch.stack([torch.randn(shape[1:], generator=g, dtype=x.dtype) for g in generators])

    if pipeline is not None:
        objective = _cross_entropy(pipeline)
    else:
        def objective(x, y, origin=None):
            return torch.zeros(x.shape[0], dtype=x.dtype)

    return GradientOracle('noise', objective, threat_model, pipeline, gradient_fn=_gradient)


def acm_oracle(codec: nn.Module, threat_model: ThreatModel = ThreatModel.white_box) -> GradientOracle:
    """ Gradient of the per-image reconstruction MSE(origin, g(x)), classifier not consulted. """
    check_threat('acm_mse', threat_model)

    def _objective(x, y, origin=None):
        if origin is None:
            raise OracleError('acm_mse needs the clean batch as origin.')
        return (codec(x) - origin).pow(2).flatten(1).mean(dim=1)

    return GradientOracle('acm_mse', _objective, threat_model)


def _build_true_wb(pipeline, threat_model, **kwargs):
    return true_wb_oracle(pipeline, threat_model, kwargs.get('attack_iterations'))


def _build_bpda_st(pipeline, threat_model, **kwargs):
    return bpda_st_oracle(pipeline, threat_model)


def _build_bpda_surrogate(pipeline, threat_model, **kwargs):
    return bpda_surrogate_oracle(pipeline, kwargs.get('surrogate'), threat_model)


def _build_classifier_only(pipeline, threat_model, **kwargs):
    return classifier_only_oracle(pipeline.classifier, threat_model)


def _build_noise(pipeline, threat_model, **kwargs):
    shape = kwargs.get('shape')
    if shape is None:
        raise OracleError('noise oracle needs the batch shape.')
    with_pipeline = ThreatModel(threat_model).allows_defense_forward
    return noise_gradient_oracle(
        shape, kwargs.get('seed', 0), pipeline if with_pipeline else None, threat_model, kwargs.get('indices'))


def _build_acm(pipeline, threat_model, **kwargs):
    return acm_oracle(pipeline.codec, threat_model)


_oracle_factories = {
    'true_wb': _build_true_wb,
    'bpda_st': _build_bpda_st,
    'bpda_surrogate': _build_bpda_surrogate,
    'classifier_only': _build_classifier_only,
    'noise': _build_noise,
    'acm_mse': _build_acm,
}


def make_oracle(
        tag: str,
        pipeline: DefendedPipeline,
        threat_model: ThreatModel = ThreatModel.white_box,
        **kwargs,
) -> GradientOracle:
    """ Build an oracle by tag.

    Args:
        tag: One of the oracle tags.
        pipeline: Pipeline under attack.
        threat_model: Adversary knowledge, oracles that need more access raise ThreatModelError.
        **kwargs: surrogate (bpda_surrogate), shape, seed and indices (noise), attack_iterations (true_wb).
    """
    if tag not in _oracle_factories:
        raise OracleError(f'Unknown oracle {tag!r}, must be one of {list(_oracle_factories.keys())}.')
    return _oracle_factories[tag](pipeline, ThreatModel(threat_model), **kwargs)


def eot_wrap(oracle: GradientOracle, k: int) -> GradientOracle:
    """ Average loss and gradient over k oracle evaluations. k == 1 returns the oracle itself. """
    assert k >= 1, f'EoT sample count must be >= 1, got {k}'
    if k == 1:
        return oracle

    class _EotOracle(GradientOracle):

        def __call__(self, x, y, origin=None):
            losses, grads = zip(*(oracle(x, y, origin) for _ in range(k)))
            return torch.stack(losses).mean(0), torch.stack(grads).mean(0)

    return _EotOracle(f'eot{k}_{oracle.tag}', oracle.objective, oracle.threat_model, oracle.pipeline)
