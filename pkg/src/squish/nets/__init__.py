from .checkpoint import load_checkpoint, load_state_into, read_checkpoint_manifest, save_checkpoint
from .classifier import Classifier, classifier_forward, predict
from .codec import Codec, CodecCfg, IdentityCodec, LearnedCodec, PixelQuantizer, codec_forward
from .losses import distortion_loss, extract_patches, median_bandwidth, mmd2_unbiased, patch_features, realism_loss
from .pipeline import DefendedPipeline, ORACLE_TAGS, pipeline_forward
from .surrogate import SurrogatePurifier
from .train import (
    SurrogateCfg,
    TrainHistory,
    accuracy,
    codec_objective,
    mean_distortion,
    surrogate_fidelity,
    train_classifier,
    train_codec,
    train_surrogate,
)
