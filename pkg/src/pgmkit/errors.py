"""Exception hierarchy shared across the toolkit.

The command line maps these onto exit codes: UsageError/OptionError are
user mistakes on the command line (exit 1), InputError covers anything
wrong with supplied files or models (exit 2), and RuntimeFailure covers
numeric or algorithmic failures on valid inputs (exit 3).
"""


class ToolkitError(Exception):
    """Base class for every error raised by this package."""


class UsageError(ToolkitError):
    """Command line misuse: unknown command, malformed flags."""


class OptionError(ToolkitError):
    """An option value is out of range or inconsistent."""


class InputError(ToolkitError):
    """Problem with user-supplied data, evidence, or model content."""


class ParseError(InputError):
    """Syntax error in an input file, annotated with a line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(InputError):
    """A structurally well-formed model violates its invariants."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class SchemaMismatchError(InputError):
    """Two artifacts disagree on variable count or cardinalities."""


class InvalidScopeError(InputError):
    """A variable-index list is duplicated, out of range, or degenerate."""


class UnsupportedConversionError(InputError):
    """mconvert was asked for a conversion pair it does not provide."""


class RuntimeFailure(ToolkitError):
    """An algorithm failed on otherwise valid inputs."""


class IncompleteAssignmentError(RuntimeFailure):
    """An operation needed a value that the assignment leaves unknown."""


class UndefinedDistributionError(RuntimeFailure):
    """A requested distribution has no mass to normalize."""


class ZeroProbabilityEvidenceError(RuntimeFailure):
    """Conditioning on evidence whose probability is zero."""


class TractabilityError(RuntimeFailure):
    """A compiled artifact exceeded its size budget."""

    def __init__(self, message: str, size: int | None = None):
        self.size = size
        super().__init__(message)


class NumericError(RuntimeFailure):
    """An optimizer or evaluator produced a non-finite quantity."""

    def __init__(self, message: str, iteration: int | None = None):
        self.iteration = iteration
        if iteration is not None:
            message = f"iteration {iteration}: {message}"
        super().__init__(message)
