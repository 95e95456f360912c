"""Stein importance sampling: reproducing Stein kernels, KSD, and
post-hoc correction of (possibly biased) sample chains."""

from .errors import (
    ConfigError,
    ContractViolation,
    DomainError,
    NumericalError,
    SteinisError,
)
from .gram import (
    GramMatrix,
    assemble_gram,
    export_gram_csv,
    ksd_squared,
    load_gram_csv,
    mmd_squared_gaussian_ref,
    uniform_ksd_squared,
)
from .kernels import (
    BaseKernel,
    CanonicalSteinKernel,
    GraphSpec,
    LatticeSteinKernel,
    MarginalSteinKernel,
    SubsampledSteinKernel,
    ZanellaSteinKernel,
    base_derivatives,
    base_eval,
    gaussian,
    imq,
    inverse_log,
)
from .qp import QpSettings, QpSolution, kkt_residual, project_simplex, solve
from .rng import stream
from .samplers import Chain, ChainConfig, draw_subsample, run_chain, tula_step
from .sis import (
    CorrectionResult,
    classical_is_weights,
    correct_gram,
    ksd_of_weights,
    stein_correct,
    weighted_estimate,
)
from .targets import (
    CustomScoreModel,
    Dataset,
    LogisticPosterior,
    PoissonLattice,
    StandardGaussian,
    TabulatedLattice,
    discrete_ratio,
    score,
    subsampled_score,
)

__version__ = "0.1.0"
