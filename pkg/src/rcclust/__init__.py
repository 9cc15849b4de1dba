"""Robust Continuous Clustering and friends for unsupervised image clustering."""

from .dataset import (
    DatasetError,
    IngestConfig,
    LabelVector,
    load_image_dataset,
    normalize,
    read_labels_csv,
    read_matrix_csv,
    write_labels_csv,
    write_matrix_csv,
)
from .graph import NeighborGraph, assign_edge_weights, mutual_knn_graph
from .kmeans import KmeansConfig, kmeans_fit, kmeanspp_seed
from .metrics import (
    ami,
    confusion_matrix,
    contingency,
    expected_mi,
    macro_average,
    majority_map,
    mutual_information,
    sensitivity_specificity,
)
from .pca import PcaModel, pca_fit, pca_transform
from .rcc import (
    RccConfig,
    RccState,
    extract_clusters,
    geman_mcclure,
    lifted_objective,
    optimal_line_process,
    rcc_fit,
    update_representatives,
)
from .result import ClusteringResult
from .tsne import TsneConfig, build_affinities, kl_divergence, perplexity_search, tsne_embed

__all__ = [
    "ami",
    "assign_edge_weights",
    "build_affinities",
    "ClusteringResult",
    "confusion_matrix",
    "contingency",
    "DatasetError",
    "expected_mi",
    "extract_clusters",
    "geman_mcclure",
    "IngestConfig",
    "kl_divergence",
    "kmeans_fit",
    "KmeansConfig",
    "kmeanspp_seed",
    "LabelVector",
    "lifted_objective",
    "load_image_dataset",
    "macro_average",
    "majority_map",
    "mutual_information",
    "mutual_knn_graph",
    "NeighborGraph",
    "normalize",
    "optimal_line_process",
    "pca_fit",
    "pca_transform",
    "PcaModel",
    "perplexity_search",
    "rcc_fit",
    "RccConfig",
    "RccState",
    "read_labels_csv",
    "read_matrix_csv",
    "sensitivity_specificity",
    "tsne_embed",
    "TsneConfig",
    "update_representatives",
    "write_labels_csv",
    "write_matrix_csv",
]

__version__ = "0.1.0"
