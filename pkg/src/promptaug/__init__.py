"""Prompt augmentation strategies and an evaluation harness for promptable
segmenters.

The package is segmenter-agnostic: anything that maps (image, clicks, box)
to a mask can plug in, either in-process (see `segmenter.MockRegionGrow` and
friends) or as a child process speaking the newline-JSON adapter protocol
(`segmenter.ExternalSegmenter`).
"""

from .imgcore import (
    BACKGROUND,
    BinaryMask,
    Box,
    DimensionMismatch,
    EmptyMask,
    FOREGROUND,
    Image,
    InvalidRle,
    Point,
    PointPrompt,
    PromptAugError,
    RleMask,
    dice,
    load_image_png,
    load_mask_png,
    rle_decode,
    rle_encode,
    rle_from_json_dict,
    rle_to_json_dict,
    save_image_png,
    save_mask_png,
    tight_bbox,
    to_grayscale,
)
from .rng import SplitMix64, derive_seed
from .sampling import (
    CandidateSet,
    EmptyCandidates,
    InsufficientCandidates,
    StrategyKind,
    build_candidates,
    centroid_point,
    patch_entropy,
    patch_histogram,
    sample_max_distance,
    sample_max_entropy,
    sample_random,
    sample_top_k,
    uniform_mask_point,
)
from .saliency import (
    ProviderUnavailable,
    SaliencyEmpty,
    SaliencyMap,
    binarize_saliency,
    crop_with_margin,
    sample_saliency_points,
    spectral_residual_saliency,
)
from .boxaug import BoxScheme, inner_box, outer_box, run_box_scheme
from .segmenter import (
    AdapterError,
    AdapterProcess,
    ExternalSegmenter,
    InvalidPrompt,
    MockBoxFill,
    MockDiskAroundSeeds,
    MockRegionGrow,
    ProtocolError,
    SegmentationResult,
    Segmenter,
    SegmenterUnavailable,
    VersionMismatch,
    spawn_adapter,
)
from .dataset import (
    DatasetError,
    LoaderStats,
    Sample,
    load_coco_dataset,
    load_dir_dataset,
    rasterize_polygons,
    rasterize_ring,
)
from .harness import (
    AggregateRow,
    ConfigError,
    ExperimentConfig,
    ExperimentRecord,
    PointSource,
    RunResult,
    aggregate_records,
    config_from_dict,
    load_config,
    run_experiment,
    write_reports,
)
from .synthetic import TwoBlobSpec, two_blob_sample, two_blob_samples

__version__ = "0.1.0"
