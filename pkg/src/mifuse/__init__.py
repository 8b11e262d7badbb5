"""Region-grouped multi-domain feature fusion for two-class motor-imagery EEG.

Raw multichannel recordings are band-pass filtered, reduced to named
brain-region channel groups by binary spatial weighting, and summarized per
region with three complementary feature families: log-variance of learned
spatial filters, fuzzy cluster memberships, and tangent-space coordinates
of trial covariances. The fused vectors feed forest-importance feature
selection and an SVM or random-forest classifier, evaluated with a
leakage-guarded stratified k-fold harness.
"""

from .classify import (
    ForestClassifier,
    MetricsReport,
    Standardizer,
    SvmClassifier,
    compute_metrics,
    load_model,
    save_model,
)
from .config import PipelineConfig
from .csp import CspFeatures, SpatialFilterBank, csp_features, fit_csp, normalized_covariance
from .dataset import (
    ContinuousRecording,
    DatasetManifest,
    Epoch,
    EpochSet,
    SyntheticSpec,
    extract_epochs,
    generate_synthetic,
    load_dataset,
    persist_epochs,
    read_epochs,
    write_recording,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    DataError,
    LeakageError,
    MiFuseError,
    NumericalError,
)
from .evaluation import (
    AblationReport,
    CvReport,
    emit_report,
    load_report,
    run_ablation,
    run_cv,
    run_evaluation,
    run_pipeline_fold,
    run_split,
    stratified_kfold,
    stratified_split,
)
from .fcm import FcmModel, FuzzyCMeansFeatures, fcm_membership, fit_fcm, trial_descriptor
from .fusion import (
    BlockLayout,
    FeatureMatrix,
    FeatureSelection,
    FusedFeatureVector,
    ImportanceSelector,
    apply_selection,
    feature_matrix_to_csv,
    fuse_trial,
    fuse_trials,
    rf_feature_importance,
    select_features,
)
from .geometry import (
    affine_invariant_distance,
    regularize_spd,
    riemannian_mean,
    spd_log,
    spd_power,
    sym_exp,
    tangent_project,
    vectorize_symmetric,
)
from .pipeline import RegionFusionExtractor, TangentFeatures
from .preprocessing import (
    BandpassFilter,
    ChannelGroups,
    FilterCoeffs,
    GroupedEpoch,
    apply_spatial_weighting,
    design_bandpass,
    filter_epoch,
    filter_epoch_set,
    load_montage,
    write_montage,
)

__version__ = "0.1.0"
