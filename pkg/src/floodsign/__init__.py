"""Flood depth estimation from detections of submerged stop signs."""

from .augment import (
    AnnotatedSample,
    AugmentConfig,
    ImageBuffer,
    augment_pipeline,
    hflip,
    hsv_jitter,
    mosaic,
    resize_to_network,
)
from .errors import (
    ConfigError,
    CoordError,
    FloodsignError,
    FormatError,
    GeometryError,
    NoBaselineError,
    NoPoleError,
    NoSignError,
    PhaseError,
    UnusableBaselineError,
)
from .geometry import (
    BBox,
    DepthEstimate,
    DepthFlag,
    LatLon,
    SignObservation,
    SignSpec,
    estimate_depth,
    pole_length_inches,
    ppi_ratio,
)
from .io import PipelineConfig, emit_geojson, load_config, load_photos, save_photos
from .metrics import (
    DepthRecord,
    FoldSplit,
    GroundTruthBox,
    PoleLengthRecord,
    aggregate_optimal_iteration,
    average_precision,
    iou,
    kfold_split,
    mae_depth_polesum,
    mae_depth_table,
    mae_pole,
    mean_ap,
)
from .oracle import CameraSpec, SceneSpec, SceneTruth, generate_pair, render_scene
from .pipeline import EstimateReport, EvalReport, run_estimate, run_evaluate
from .registry import (
    BaselineEntry,
    Registry,
    haversine_m,
    pair,
    register_baseline,
)
from .selection import (
    Detection,
    DetectionClass,
    Phase,
    PhotoRecord,
    build_observation,
    match_pole,
    select_primary_sign,
)

__version__ = "0.1.0"
