"""Numerical laboratory for symmetrization and rearrangement inequalities on graphs."""

from .graphs import GroundSpace, Order, ProductSpace, build_space, product
from .operators import dirichlet_energy, heat_kernel, star_function
from .rearrange import polarize, rearrange_function, steiner_rearrange
from .solver import ProblemSpec, compare_elliptic, solve_elliptic
from .verify import Report, SearchConfig

__version__ = "0.1.0"

__all__ = [
    "GroundSpace", "Order", "ProductSpace", "build_space", "product",
    "dirichlet_energy", "heat_kernel", "star_function",
    "polarize", "rearrange_function", "steiner_rearrange",
    "ProblemSpec", "compare_elliptic", "solve_elliptic",
    "Report", "SearchConfig",
]
