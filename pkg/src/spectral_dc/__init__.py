"""Near-quadratic Hermitian eigensolvers: band reduction, tree-accelerated
divide and conquer for tridiagonals, and spectral utilities built on them."""

from .afmm import EvalRequest, Kernel, KernelSum, eval_exact, eval_fmm
from .arrowhead import arrowhead_diagonalize, arrowhead_eigenvalues
from .band_reduction import BlockBanded, ReductionResult, tridiagonalize
from .errors import (
    InvalidInputError,
    IterationCapError,
    PrecisionFloorError,
    RankDeficiencyError,
    SpectralError,
)
from .matrix_core import Arrowhead, DenseHermitian, SymTridiagonal
from .oracle import jacobi_eig, sturm_bisect_eigenvalues
from .spectral_apps import (
    GapResult,
    SvdResult,
    condition_number,
    hermitian_diagonalize,
    hermitian_eigenvalues,
    pencil_eigenvalues,
    singular_value,
    spectral_gap,
    spectral_projector,
    svd,
)
from .tridiag_dc import Diagonalization, diagonalize, eigenvalues_only

__version__ = "0.1.0"

__all__ = [
    "Arrowhead", "BlockBanded", "DenseHermitian", "Diagonalization", "EvalRequest",
    "GapResult", "InvalidInputError", "IterationCapError", "Kernel", "KernelSum",
    "PrecisionFloorError", "RankDeficiencyError", "ReductionResult", "SpectralError",
    "SvdResult", "SymTridiagonal", "arrowhead_diagonalize", "arrowhead_eigenvalues",
    "condition_number", "diagonalize", "eigenvalues_only", "eval_exact", "eval_fmm",
    "hermitian_diagonalize", "hermitian_eigenvalues", "jacobi_eig", "pencil_eigenvalues",
    "singular_value", "spectral_gap", "spectral_projector", "sturm_bisect_eigenvalues",
    "svd", "tridiagonalize",
]
