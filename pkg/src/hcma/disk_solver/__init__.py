"""Extremal holomorphic disks for the distortion functional and the foliation they sweep out."""
from .model import HermitianModel
from .spectral import (
    RHFactorization,
    WindingError,
    hilbert_transform,
    rh_factorize,
    szego_project,
)
from .disks import (
    BoundaryDisk,
    ContractionError,
    ConvergenceError,
    EmbeddingError,
    continuation,
    distortion_energy,
    grad_energy,
    newton_disk,
    robin_constant,
    second_variation_check,
    solve_boundary,
    tangent_delta_fn,
)
