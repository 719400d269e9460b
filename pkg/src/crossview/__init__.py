"""Cross-view pseudo-label machinery for panoptic segmentation predictions.

The package selects confident pseudo labels with class-balanced thresholds,
regularizes them across tasks (instance vs semantic) and across image styles,
fuses both branches into panoptic maps, scores them with PQ/SQ/RQ, and ships
a seeded synthetic benchmark plus a bit-exact container format and CLI.
"""

__version__ = "0.1.0"

from .catalog import Category, ClassCatalog, default_catalog
from .containers import read_container, write_container
from .entropy import (
    argmax_label,
    instance_entropy,
    instance_entropy_map,
    semantic_entropy_map,
)
from .errors import (
    ContainerIOError,
    CrossviewError,
    GenerationError,
    HashMismatchError,
    ValidationError,
)
from .estimators import (
    ClassBalancedSelector,
    HistogramMatcher,
    InstanceSelector,
    InterStyleUnifier,
    InterTaskRegularizer,
    PanopticFuser,
)
from .evaluation import (
    PQReport,
    evaluate_dataset,
    evaluate_pair,
    format_report_table,
    match_segments,
    mean_pq_over,
    pq_per_class,
)
from .fusion import FusionConfig, fuse_panoptic
from .instances import Instance, InstanceSet
from .interstyle import (
    IsrConfig,
    match_histograms,
    pick_reference,
    unify_instance_sets,
    unify_instances,
    unify_label_maps,
    unify_semantic,
)
from .intertask import (
    ItrConfig,
    judge_consistency,
    regularize_instances,
    regularize_semantic,
    to_semantic,
)
from .maps import (
    EntropyMap,
    PanopticMap,
    RgbImage,
    SemanticLabelMap,
    SemanticProbMap,
)
from .rle import RleMask, mask_iou, rle_decode, rle_encode
from .selection import (
    ClassBalancedWeights,
    SelectionPolicy,
    compute_class_balanced_weights,
    compute_instance_weights,
    select_instances,
    select_semantic,
)
from .synth import (
    AblationResult,
    ExperimentConfig,
    NoiseModel,
    SceneSpec,
    derive_scene_specs,
    generate_scene,
    run_ablation_experiment,
    simulate_instance_predictor,
    simulate_semantic_predictor,
)

__all__ = [name for name in dir() if not name.startswith("_")]
