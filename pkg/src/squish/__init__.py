from .attacks import (
    AttackBudget,
    AttackResult,
    ThreatModel,
    acm_attack,
    ara_search,
    black_box_transfer,
    eot_wrap,
    fgsm,
    ifgsm,
    make_oracle,
    pgd,
    random_noise_attack,
)
from .autodiff import Tape, grad_check
from .common import (
    CheckpointError,
    ConfigError,
    SquishError,
    TrainCfg,
    format_epsilon,
    parse_epsilon,
)
from .data import DataCfg, Dataset, ShapesSpec, gen_shapes, load_cifar10_dir, load_dataset, save_dataset
from .diagnostics import (
    LandscapeCfg,
    MaskingCfg,
    MaskingReport,
    evaluate_attack,
    masking_checklist,
    mean_landscape_std,
    mmd_metric,
    sample_landscape,
)
from .harness import ExperimentCfg, EvalReport, emit_plots, emit_report, load_experiment, run_experiment
from .jpeg import JpegCfg, JpegCodec, jpeg_forward, jpeg_reference
from .nets import (
    Classifier,
    CodecCfg,
    DefendedPipeline,
    IdentityCodec,
    LearnedCodec,
    PixelQuantizer,
    SurrogatePurifier,
    load_checkpoint,
    save_checkpoint,
    train_classifier,
    train_codec,
    train_surrogate,
)
from .version import __version__
