"""Linearized optimal transport embeddings for point-cloud data.

Point clouds become rows of a flat feature matrix by solving optimal
transport against a shared reference cloud and evaluating the resulting map
at the reference points.  On top of that embedding the library provides
dimensionality reduction (PCA/LDA with class re-balancing), classifier
selection (KNN and hinge-loss SVMs with stratified cross-validation),
barycenter synthesis with a true free-support barycenter oracle and relative
error metric, and iterative refinement of the reference toward the data's
barycenter.  The `lotkit` CLI drives the same pipeline from dataset
manifests to CSV/JSON artifacts.
"""

__version__ = "0.1.0"

from .barycenter import (
    FIXED_TRIO_WEIGHTS,
    BarycenterResult,
    TrueBarycenterResult,
    WeightVector,
    embedded_diameter,
    generate_barycenters_between_classes,
    generate_barycenters_general,
    generate_barycenters_within_class,
    iteration_delta_stats,
    random_simplex_weights,
    relative_error,
    true_barycenter,
)
from .classify import (
    ClassifierSpec,
    EvaluationReport,
    cross_validate,
    default_roster,
    fit_predict,
    get_best_classifier,
    stratified_folds,
)
from .embedding import (
    IterationTrace,
    LabeledEmbeddingSet,
    LotEmbedding,
    compute_barycenter_embeddings,
    embed_cloud,
    embed_point_clouds,
    embedding_from_row,
    lot_distance,
    pushforward,
    read_embedding_csv,
    write_embedding_csv,
)
from .errors import LotError, LotWarning
from .measures import (
    DiscreteMeasure,
    LabeledCloudSet,
    gaussian_reference,
    read_cloud_csv,
    read_manifest,
    synthetic_family,
    uniform_measure,
    write_cloud_csv,
    write_manifest,
)
from .reduction import (
    BalancedSet,
    LdaModel,
    PcaModel,
    balance,
    fisher_ratio,
    lda_reduction,
    pca_reduction,
)
from .transport import (
    CostMatrix,
    SinkhornConfig,
    TransportPlan,
    barycentric_projection,
    cost_matrix,
    solve_exact,
    solve_sinkhorn,
    w2_distance,
)

__all__ = [
    "__version__",
    # measures
    "DiscreteMeasure",
    "LabeledCloudSet",
    "uniform_measure",
    "gaussian_reference",
    "synthetic_family",
    "read_cloud_csv",
    "write_cloud_csv",
    "read_manifest",
    "write_manifest",
    # transport
    "CostMatrix",
    "SinkhornConfig",
    "TransportPlan",
    "cost_matrix",
    "solve_exact",
    "solve_sinkhorn",
    "barycentric_projection",
    "w2_distance",
    # embedding
    "LotEmbedding",
    "LabeledEmbeddingSet",
    "IterationTrace",
    "embed_cloud",
    "embed_point_clouds",
    "embedding_from_row",
    "lot_distance",
    "pushforward",
    "compute_barycenter_embeddings",
    "read_embedding_csv",
    "write_embedding_csv",
    # reduction
    "BalancedSet",
    "PcaModel",
    "LdaModel",
    "balance",
    "pca_reduction",
    "lda_reduction",
    "fisher_ratio",
    # classify
    "ClassifierSpec",
    "EvaluationReport",
    "default_roster",
    "fit_predict",
    "cross_validate",
    "stratified_folds",
    "get_best_classifier",
    # barycenter
    "WeightVector",
    "BarycenterResult",
    "TrueBarycenterResult",
    "FIXED_TRIO_WEIGHTS",
    "random_simplex_weights",
    "generate_barycenters_within_class",
    "generate_barycenters_between_classes",
    "generate_barycenters_general",
    "true_barycenter",
    "embedded_diameter",
    "relative_error",
    "iteration_delta_stats",
    # errors
    "LotError",
    "LotWarning",
]
