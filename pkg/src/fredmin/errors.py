"""Exception hierarchy. Every error the CLI can surface carries a stable code."""


class FredminError(Exception):
    """Base class for all fredmin errors; `code` is the machine-readable id."""

    code = "E_VALIDATION"

    def __init__(self, message, code=None):
        super().__init__(message)
        if code is not None:
            self.code = code


class ExprSyntaxError(FredminError):
    """Malformed expression text. `offset` is the byte offset of the problem."""

    code = "E_PARSE_EXPR"

    def __init__(self, message, offset):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class UnknownIdentifierError(FredminError):
    """Expression references a name outside its declared variables."""

    code = "E_PARSE_EXPR"

    def __init__(self, name, offset, allowed):
        super().__init__(
            f"unknown identifier {name!r} (offset {offset}); "
            f"allowed: {', '.join(allowed)}"
        )
        self.name = name
        self.offset = offset


class EvalDomainError(FredminError):
    """Evaluation left the real line (ln/sqrt of a negative, division by zero...).

    `subexpr` is the offending subexpression, pretty-printed.
    """

    code = "E_EVAL_DOMAIN"

    def __init__(self, message, subexpr):
        super().__init__(f"{message} in {subexpr!r}")
        self.subexpr = subexpr


class DomainValidationError(FredminError):
    code = "E_DOMAIN"


class ValidationError(FredminError):
    code = "E_VALIDATION"


class ProblemFormatError(FredminError):
    """Problem file is structurally malformed (sections, keys, counts)."""

    code = "E_PROBLEM"


class GramConditioningError(FredminError):
    """A function family is numerically dependent (condition number too large)."""

    code = "E_GRAM_SINGULAR"


class SingularMatrixError(FredminError):
    """Rank-deficient square solve. Callers may catch this and fall back."""

    code = "E_SINGULAR"

    def __init__(self, message, rank, size):
        super().__init__(f"{message} (rank {rank} of {size})")
        self.rank = rank
        self.size = size


class TruncationError(FredminError):
    """Series truncation failed to meet the tail tolerance."""

    code = "E_TRUNCATION"

    def __init__(self, message, last_tail):
        super().__init__(message)
        self.last_tail = last_tail
