"""Error types shared across the library.

Plain ``ZeroDivisionError`` is reused for division by a series that is
certified zero, so callers can catch the builtin they expect.
"""


class DomainError(Exception):
    """An argument lies outside an operation's domain (wrong group,
    non-infinitesimal argument, missing c-map entry, ...)."""


class NotSmall(DomainError):
    """An operator fails the smallness contract needed for Neumann
    inversion: its support shift contains a monomial that is not
    strictly infinitesimal."""


class NotSummable(DomainError):
    """A family descriptor violates the summability requirements."""


class BudgetExhausted(Exception):
    """A lazy computation could not be certified within the allotted
    work budget.  Zero tests and truncation cuts on infinite streams
    are budgeted, never silently assumed."""


class NonRationalConstant(Exception):
    """An operation would need a transcendental constant (exp or log of
    a nonzero rational) which the exact coefficient field cannot
    represent."""


class ParseError(Exception):
    """Syntax error with position and expectation info."""

    def __init__(self, message: str, line: int, column: int, expected=()):
        super().__init__(f"{line}:{column}: {message}")
        self.message = message
        self.line = line
        self.column = column
        self.expected = tuple(expected)
