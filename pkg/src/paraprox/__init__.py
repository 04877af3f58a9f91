"""One-sided approximation of Lipschitz functions by a few paraboloids.

The pieces: ``funcspace`` (target functions), ``milp`` (model container,
solvers, LP files), ``parafit`` (the fitting MIP and both search loops),
``verify`` (certified condition checks), ``lookup`` (stored approximations)
and ``relax`` (substituting terms of nonlinear instances).
"""

from .funcspace import REGISTRY, BoxDomain, FuncDef, get_function
from .lookup import LookupTable, TableEntry
from .paraboloid import Paraboloid, ParaboloidSet
from .parafit import FitReport, SearchOptions, fit
from .verify import check_conditions

__version__ = "0.1.0"

__all__ = ["BoxDomain", "FitReport", "FuncDef", "LookupTable", "Paraboloid", "ParaboloidSet",
           "REGISTRY", "SearchOptions", "TableEntry", "check_conditions", "fit", "get_function"]
