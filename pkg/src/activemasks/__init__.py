"""Skewed majority-vote dynamics on finite grids.

Voting operators smooth per-label indicator masks; each pixel then takes the
smallest label with the maximal vote plus skew. The package certifies when
these dynamics must converge, verifies the cycle-length bounds exhaustively
on tiny domains, and runs image segmentation with convergence traces.
"""

from .automaton import (
    AmConfig,
    CycleReport,
    DetectMode,
    IterationRecord,
    SkewStack,
    TcaParams,
    iterate_voting,
    run,
    step,
    tca_step,
    to_tca,
)
from .domain import (
    Boundary,
    DomainMismatchError,
    DomainSpec,
    InvalidLabelError,
    LabelField,
    RealField,
    adjacent_pairs,
    boundary_crossings,
    label_masks,
    mask_of,
)
from .operators import (
    CircularConv,
    DenseMatrix,
    NoncircularStar,
    OperatorSizeError,
    QuasiFactorization,
    VotingOperator,
    gershgorin_psd_bound,
    is_self_adjoint,
    quadratic_form,
    quasi_factorize,
)
from .skew import (
    ImageField,
    SoftThresholdSpec,
    background_skew,
    local_average,
    otsu_threshold,
    zero_skew,
)
from .spectral import (
    Filter,
    GaussianSpec,
    GuaranteeTier,
    SpectrumReport,
    UnsupportedDomainError,
    analyze_filter,
    dft,
    fourier_series_min,
    inverse_dft,
    periodized_gaussian,
    quadratic_form_spectral,
    sampled_gaussian,
)
from .verify import (
    BudgetExceededError,
    EnumerationReport,
    QuadFormReport,
    TheoremSuiteReport,
    enumerate_all,
    exhaustive_quadform,
    submatrix_sum_form,
    theorem_suite,
)

__version__ = "0.1.0"

__all__ = [
    "AmConfig", "Boundary", "BudgetExceededError", "CircularConv",
    "CycleReport", "DenseMatrix", "DetectMode", "DomainMismatchError",
    "DomainSpec", "EnumerationReport", "Filter", "GaussianSpec",
    "GuaranteeTier", "ImageField", "InvalidLabelError", "IterationRecord",
    "LabelField", "NoncircularStar", "OperatorSizeError", "QuadFormReport",
    "QuasiFactorization", "RealField", "SkewStack", "SoftThresholdSpec",
    "SpectrumReport", "TcaParams", "TheoremSuiteReport",
    "UnsupportedDomainError", "VotingOperator", "adjacent_pairs",
    "analyze_filter", "background_skew", "boundary_crossings", "dft",
    "enumerate_all", "exhaustive_quadform", "fourier_series_min",
    "gershgorin_psd_bound", "inverse_dft", "is_self_adjoint",
    "iterate_voting", "label_masks", "local_average", "mask_of",
    "otsu_threshold", "periodized_gaussian", "quadratic_form",
    "quadratic_form_spectral", "quasi_factorize", "run", "sampled_gaussian",
    "step", "submatrix_sum_form", "tca_step", "theorem_suite", "to_tca",
    "zero_skew",
]
