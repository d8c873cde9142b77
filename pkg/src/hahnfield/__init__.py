"""Exact computer algebra for grid-based Hahn series and exp-log
transseries: lazy arithmetic, truncation, derivations from additive
c-maps, Neumann inversion of I - a*d, exponentials/logarithms with
asymptotic integration, and truncation/IL closure predicates."""

from .errors import (
    BudgetExhausted,
    DomainError,
    NonRationalConstant,
    NotSmall,
    NotSummable,
    ParseError,
)
from .monomial import (
    GeneratorId,
    GridWitness,
    Group,
    Monomial,
    TransMonomial,
    compare,
    count_factorizations,
    in_grid,
    x_mono,
)
from .series import (
    Budget,
    EXP_SERIES,
    GEOM_SERIES,
    Geometric,
    GridIndexed,
    LOG1P_SERIES,
    PowerSeriesN,
    Series,
    Term,
    eval_ps,
    sum_family,
)

__all__ = [
    "BudgetExhausted",
    "DomainError",
    "NonRationalConstant",
    "NotSmall",
    "NotSummable",
    "ParseError",
    "GeneratorId",
    "GridWitness",
    "Group",
    "Monomial",
    "TransMonomial",
    "compare",
    "count_factorizations",
    "in_grid",
    "x_mono",
    "Budget",
    "EXP_SERIES",
    "GEOM_SERIES",
    "Geometric",
    "GridIndexed",
    "LOG1P_SERIES",
    "PowerSeriesN",
    "Series",
    "Term",
    "eval_ps",
    "sum_family",
]
