"""Exception hierarchy shared by all modules.

Each class carries the CLI exit code it maps to.
"""


class McpError(Exception):
    exit_code = 3


class SchemaError(McpError):
    """Missing or malformed columns in an input table."""


class ParseError(McpError):
    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class DesignError(McpError):
    """Empty cells, dimension mismatches, unbalanced grids."""


class DomainError(McpError):
    """Parameter outside the admissible range."""


class DegenerateVarianceError(McpError):
    """A standard error is zero, so the test statistic is unbounded."""


class DegenerateSeparationError(DegenerateVarianceError):
    """Complete separation: all placement variances of a comparison vanish."""


class NumericError(McpError):
    exit_code = 4
