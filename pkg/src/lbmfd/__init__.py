"""Lattice Boltzmann schemes as multi-step finite-difference schemes."""

from .ring import LaurentPoly, OperatorMatrix, ZPoly, exact_divide, solve_over_ring
from .scheme import Initialisation, SchemeOperators, SchemeSpec, build_scheme, builtin
from .fdreduce import FDScheme, bulk_fd, observability, reduced_fd, starting_scheme, transfer_function

__all__ = [
    "LaurentPoly", "OperatorMatrix", "ZPoly", "exact_divide", "solve_over_ring",
    "Initialisation", "SchemeOperators", "SchemeSpec", "build_scheme", "builtin",
    "FDScheme", "bulk_fd", "observability", "reduced_fd", "starting_scheme", "transfer_function",
]
