"""Detection and categorization of obfuscated malware from memory-dump features.

A from-scratch pipeline: CSV ingestion, stratified splitting, z-score
standardization, class rebalancing (undersampling and ADASYN), four
classifiers (random forest, KNN, gradient-boosted trees, MLP), weighted
evaluation metrics, and a reproducible experiment runner with a CLI.
"""
from .errors import (
    ConfigError,
    DatasetError,
    MalmemError,
    ModelFormatError,
    SchemaMismatchError,
)
from .evaluation import (
    ConfusionMatrix,
    EvaluationReport,
    confusion,
    malicious_leakage,
    metrics_from_confusion,
    parse_report,
    render_report,
)
from .ingest import (
    BENIGN_LABEL,
    FeatureTable,
    LabelCodec,
    SplitSpec,
    StandardizationParams,
    apply_standardizer,
    binary_labels,
    derive_family_label,
    encode_labels,
    family_distribution,
    family_labels,
    fit_standardizer,
    load_csv,
    malicious_family_share,
    stratified_split,
    stratified_split_indices,
)
from .neighbors import k_nearest, nearest_neighbors
from .persist import load_model, save_model
from .resample import (
    AdasynParams,
    ResampleOutput,
    UndersampleParams,
    adasyn,
    all_knn,
    apply_technique,
    edited_nearest_neighbor,
    near_miss,
    random_undersample,
)
from .runner import (
    ExperimentConfig,
    RunRecord,
    best_technique_per_model,
    classify_csv,
    inspect_dataset,
    run_experiment,
    run_suite,
)

__version__ = "0.1.0"
