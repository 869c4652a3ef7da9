"""Biofouling level-of-fouling assessment toolkit.

Converts 4-class hull segmentation into coverage-based LoF ratings via a
threshold decision tree, runs prompt-based multimodal LLM assessment
against any chat-completions endpoint (or the bundled replay server), and
scores every prediction source with one evaluation harness.
"""

__version__ = "0.1.0"

from .coverage import (
    CoverageReport,
    MaskRaster,
    ProbabilityRaster,
    SegClass,
    compute_coverage,
    compute_coverage_soft,
    coverage_distribution,
)
from .errors import (
    CodecError,
    EndpointError,
    LofkitError,
    ManifestError,
    NoHullVisibleError,
    SplitError,
    ValidationError,
)
from .rules import (
    FIGURE1_DEFAULT,
    PRESETS,
    FoulingObservation,
    ThresholdConfig,
    classify_lof,
    validate_thresholds,
)

__all__ = [
    "CodecError",
    "CoverageReport",
    "EndpointError",
    "FIGURE1_DEFAULT",
    "FoulingObservation",
    "LofkitError",
    "ManifestError",
    "MaskRaster",
    "NoHullVisibleError",
    "PRESETS",
    "ProbabilityRaster",
    "SegClass",
    "SplitError",
    "ThresholdConfig",
    "ValidationError",
    "classify_lof",
    "compute_coverage",
    "compute_coverage_soft",
    "coverage_distribution",
    "validate_thresholds",
    "__version__",
]
