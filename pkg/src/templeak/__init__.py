"""Template-redundancy detection, leakage audits, and group-atomic resampling
for document information-extraction datasets (forms and receipts).

The pipeline: load a corpus, group documents that share a template, measure
how many test documents share a template with a training document, and
resample the splits so that no template straddles a split boundary. A
template-memorizer baseline quantifies how much of a benchmark score such
leakage can account for.
"""
from __future__ import annotations

from .version import TOOL_NAME, __version__
from .errors import (
    DuplicateDocId,
    InfeasibleRatios,
    InvalidParameter,
    MalformedAnnotation,
    MalformedOcrLine,
    TempleakError,
    UnassignedDocument,
    UnknownDocId,
    UnknownLabel,
)
from .model import (
    BoundingBox,
    Corpus,
    Dataset,
    Document,
    Entity,
    Issue,
    Split,
    Token,
    document_from_dict,
    document_to_dict,
    validate_corpus,
    validate_document,
)
from .ingest import (
    LoadError,
    LoadReport,
    load_corpus,
    parse_funsd_document,
    parse_sroie_document,
)
from .similarity import (
    SimilarityEdge,
    TemplateKey,
    business_key,
    candidate_pairs,
    extract_question_set,
    normalize_text,
    pair_scorer,
    question_overlap,
    shingle_jaccard,
)
from .grouping import (
    GroundTruthGrouping,
    GroupingResult,
    TemplateGroup,
    TuningRow,
    build_similarity_graph,
    connected_components,
    group_by_key,
    group_corpus,
    group_size_histogram,
    grouping_digest,
    grouping_from_dict,
    grouping_to_dict,
    pairwise_grouping_metrics,
    rebin_histogram,
    tune_threshold,
)
from .resampling import (
    CvFolds,
    LeakageReport,
    Ratios,
    SplitManifest,
    SplitMix64,
    Violation,
    derived_ratios,
    leakage_report,
    make_cv_folds,
    origin_manifest,
    parse_manifest,
    render_manifest,
    resample_splits,
    verify_manifest,
)
from .evaluation import (
    EvalMetrics,
    ExtractedEntity,
    GapResult,
    MemorizerModel,
    document_entities,
    entity_f1,
    fit_memorizer,
    group_signature,
    leakage_gap_experiment,
    predict_memorizer,
)
from .config import RunConfig, build_config, parse_config_file

__all__ = [
    "TOOL_NAME",
    "__version__",
    # errors
    "TempleakError",
    "MalformedAnnotation",
    "UnknownLabel",
    "MalformedOcrLine",
    "DuplicateDocId",
    "UnknownDocId",
    "UnassignedDocument",
    "InvalidParameter",
    "InfeasibleRatios",
    # model
    "BoundingBox",
    "Token",
    "Entity",
    "Document",
    "Corpus",
    "Dataset",
    "Split",
    "Issue",
    "validate_document",
    "validate_corpus",
    "document_to_dict",
    "document_from_dict",
    # ingest
    "LoadError",
    "LoadReport",
    "load_corpus",
    "parse_funsd_document",
    "parse_sroie_document",
    # similarity
    "normalize_text",
    "extract_question_set",
    "question_overlap",
    "business_key",
    "shingle_jaccard",
    "TemplateKey",
    "SimilarityEdge",
    "candidate_pairs",
    "pair_scorer",
    # grouping
    "TemplateGroup",
    "GroupingResult",
    "GroundTruthGrouping",
    "TuningRow",
    "build_similarity_graph",
    "connected_components",
    "group_by_key",
    "group_corpus",
    "group_size_histogram",
    "rebin_histogram",
    "pairwise_grouping_metrics",
    "tune_threshold",
    "grouping_to_dict",
    "grouping_from_dict",
    "grouping_digest",
    # resampling
    "SplitMix64",
    "Ratios",
    "SplitManifest",
    "LeakageReport",
    "CvFolds",
    "Violation",
    "derived_ratios",
    "origin_manifest",
    "leakage_report",
    "resample_splits",
    "make_cv_folds",
    "verify_manifest",
    "render_manifest",
    "parse_manifest",
    # evaluation
    "ExtractedEntity",
    "EvalMetrics",
    "MemorizerModel",
    "GapResult",
    "document_entities",
    "entity_f1",
    "fit_memorizer",
    "predict_memorizer",
    "group_signature",
    "leakage_gap_experiment",
    # config
    "RunConfig",
    "build_config",
    "parse_config_file",
]
