"""
Planner error hierarchy
Every error carries the exit code the CLI terminates with
"""


class PlannerError(Exception):
    """Base class for all planner errors"""

    exit_code: int = 1


class ContractError(PlannerError):
    """Operation called outside its contract (a bug, not bad input)"""


class DimensionError(ContractError):
    """Tensor shapes do not agree"""


class AllMaskedError(ContractError):
    """Softmax over a vector whose entries are all -inf"""


class DomainError(ContractError):
    """Argument outside the domain of a physical formula"""


class UsageError(PlannerError):
    """Bad command-line usage"""

    exit_code = 2


class ConfigError(PlannerError):
    """Configuration value outside its allowed range"""

    exit_code = 3


class InstanceValidationError(PlannerError):
    """Instance violates the box, disjointness or bounds invariants"""

    exit_code = 3


class InstanceFormatError(PlannerError):
    """Instance file could not be parsed"""

    exit_code = 3

    def __init__(self, path: str, detail: str, line: int | None = None, field: str | None = None):
        self.path = path
        self.line = line
        self.field = field
        location = path
        if line is not None:
            location = f"{location}:{line}"
        if field:
            location = f"{location} [{field}]"
        super().__init__(f"{location}: {detail}")


class ConstraintViolationError(PlannerError):
    """Tour does not visit every cluster exactly once in a single loop"""

    exit_code = 3


class CapacityError(PlannerError):
    """Problem too large for the requested solver"""

    exit_code = 4


class GenerationError(CapacityError):
    """Rejection sampling could not pack the clusters"""


class StorageError(PlannerError):
    """Reading or writing a file failed"""

    exit_code = 5


class TrainingDivergenceError(PlannerError):
    """NaN encountered in gradients or loss"""

    exit_code = 6
