"""Evaluation toolkit for clinical-text de-identification systems."""

__version__ = "0.1.0"

from .alignment import GAP, AlignmentParams, AlignmentPair, align
from .analysis import (
    CorrelationReport,
    FpCategory,
    FpSample,
    GroundTruthLabel,
    Severity,
    build_context,
    correlate,
    ground_truth_cir,
    pearson,
    sample_false_positives,
    spearman,
    tally_annotations,
)
from .cire import ChunkPair, CireConfig, CireScore, JudgeDecision, SplitMode, chunk_alignment, cire_score
from .errors import BackendError, DeidevalError, InputError, ProtocolError
from .icd import IcdConfig, ReportScale, jsc, nsdcg, predict_codes
from .scoring import (
    ConfusionCounts,
    MatchingMode,
    MetricsReport,
    SchemaConfig,
    TokenVerdict,
    bin_by_length,
    classify_tokens,
    compute_metrics,
    count,
)
from .surrogate import SurrogateConfig, build_surrogate_text, inject_noise, replace_placeholders
from .textcore import AnnotatedDocument, PiiCategory, PiiSpan, Token, levenshtein, tokenize
