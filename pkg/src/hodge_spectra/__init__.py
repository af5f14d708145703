"""Discrete Hodge Laplacian spectra on metrized simplicial complexes."""
__version__ = "0.1.0"

from .kernels import BACKEND
from .complex import (
    OrientedSimplicialComplex, Subdomain, TensorProductComplex, betti_numbers, build_complex,
    cohomology_summary, relative_cohomology_dim, tensor_product_complex,
)
from .metric import ConformalField, MetricData, mass_matrix, smoothing_sequence, squeeze_field, volume
from .spectra import (
    BoundaryCondition, KernelMismatchError, NotExactError, SolverError, SpectrumReport, assemble,
    coexact_spectrum, exact_spectrum_down, full_spectrum, hodge_decompose, minimal_primitive,
    spectrum,
)
from .gap import EigenspacePack, SubspacesTooFarError, n_gap
from .meshes import Mesh, generate, load_mesh, save_mesh

__all__ = [
    "BACKEND", "OrientedSimplicialComplex", "Subdomain", "TensorProductComplex", "betti_numbers",
    "build_complex", "cohomology_summary", "relative_cohomology_dim", "tensor_product_complex",
    "ConformalField", "MetricData", "mass_matrix", "smoothing_sequence", "squeeze_field", "volume",
    "BoundaryCondition", "KernelMismatchError", "NotExactError", "SolverError", "SpectrumReport",
    "assemble", "coexact_spectrum", "exact_spectrum_down", "full_spectrum", "hodge_decompose",
    "minimal_primitive", "spectrum", "EigenspacePack", "SubspacesTooFarError", "n_gap", "Mesh",
    "generate", "load_mesh", "save_mesh",
]
