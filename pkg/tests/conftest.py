import pytest
import torch

from squish.common.config import TrainCfg
from squish.data import ShapesSpec, gen_shapes
from squish.nets import Classifier, DefendedPipeline, train_classifier


@pytest.fixture(scope='session')
def tiny_shapes():
    # 40 images of 16x16, four per class
    return gen_shapes(ShapesSpec(samples_per_class=4, image_size=16, seed=0))


@pytest.fixture(scope='session')
def tiny_classifier():
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(0)
        model = Classifier(num_classes=10, width=4, image_size=16)
    return model.eval()


@pytest.fixture(scope='session')
def trained_classifier(tiny_shapes):
    # fitted to tiny_shapes, only the slow directional tests use it
    model, _ = train_classifier(tiny_shapes, TrainCfg(epochs=60, lr=3e-3, batch_size=8, seed=0), width=8)
    return model


@pytest.fixture
def batch(tiny_shapes):
    return tiny_shapes.images[:8].clone(), tiny_shapes.labels[:8].clone()


@pytest.fixture
def identity_pipeline(tiny_classifier):
    return DefendedPipeline(tiny_classifier, name='identity')
