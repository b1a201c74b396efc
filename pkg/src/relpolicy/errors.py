"""Exception hierarchy. Every error carries a stable ``code`` string."""


class RelPolicyError(Exception):
    code = "E_GENERIC"

    def __init__(self, message: str = "", **context):
        super().__init__(message)
        self.context = context

    def __str__(self) -> str:
        msg = super().__str__()
        return f"{self.code}: {msg}" if msg else self.code


class ArityError(RelPolicyError):
    code = "E_ARITY"


class SortError(RelPolicyError):
    code = "E_SORT"


class DSLSyntaxError(RelPolicyError):
    code = "E_SYNTAX"

    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{message} at line {line}, column {col}", line=line, col=col)
        self.line = line
        self.col = col


class UnknownSymbolError(RelPolicyError):
    code = "E_UNKNOWN_SYMBOL"


class DuplicateError(RelPolicyError):
    code = "E_DUPLICATE"


class NoSSAError(RelPolicyError):
    code = "E_NO_SSA"


class UnboundError(RelPolicyError):
    code = "E_UNBOUND"


class NotApplicableError(RelPolicyError):
    code = "E_NOT_APPLICABLE"


class ExplosionError(RelPolicyError):
    code = "E_EXPLOSION"


class ProbMassError(RelPolicyError):
    code = "E_PROB_MASS"


class PartitionError(RelPolicyError):
    code = "E_PARTITION"


class NoActionError(RelPolicyError):
    code = "E_NO_ACTION"


class EmptyExamplesError(RelPolicyError):
    code = "E_EMPTY_EXAMPLES"


class NoBinderError(RelPolicyError):
    code = "E_NO_BINDER"


class UncoveredStateError(RelPolicyError):
    code = "E_UNCOVERED_STATE"

    def __init__(self, message: str, rollout=None):
        super().__init__(message)
        self.rollout = rollout


class IOFailure(RelPolicyError):
    code = "E_IO"
