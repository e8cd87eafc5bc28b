"""Hierarchical penalties for two-way interaction regression, and a bench for their theory."""
from .design import (
    DataError,
    DesignMatrix,
    DomainError,
    InteractionIndex,
    SupportSet,
    column_to_pair,
    expand_design,
    hierarchy_check,
    hierarchy_closure,
    pair_to_column,
)
from .penalties import (
    A3Check,
    A3Constants,
    Atom,
    AtomList,
    PenaltySpec,
    a3_constants,
    a3_constants_sharp,
    atoms,
    check_a3,
    evaluate,
)
from .prox import prox_atom
from .solver import (
    FitResult,
    SolverConfig,
    TheoryConstants,
    fit,
    holdout_select,
    lambda_max_lasso,
    lambda_path,
    lambda_theory,
    objective,
)

__version__ = "0.1.0"
