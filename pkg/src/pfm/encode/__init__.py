from .bow import bow_encode, fit_codebook
from .fisher import fisher_vector, fv_statistics, power_l2_normalize
from .gmm import GmmModel, fit_gmm, kmeans
from .pca import HIGH_LEVEL, LOW_LEVEL, PcaModel, apply_pca, fit_pca
from .pyramid import PfmDescriptor, PyramidConfig, pfm_encode, subsequence_windows

__all__ = [
    "GmmModel", "fit_gmm", "kmeans",
    "fisher_vector", "fv_statistics", "power_l2_normalize",
    "bow_encode", "fit_codebook",
    "PcaModel", "fit_pca", "apply_pca", "LOW_LEVEL", "HIGH_LEVEL",
    "PfmDescriptor", "PyramidConfig", "pfm_encode", "subsequence_windows",
]
