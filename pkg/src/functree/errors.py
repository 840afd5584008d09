"""Exception hierarchy shared across the package."""


class FuncTreeError(Exception):
    """Base class for all package errors."""


class NoCodeBlock(FuncTreeError):
    """Completion contained no usable code block. Caller should retry."""


class NoValidFunction(FuncTreeError):
    """A code block was found but parsed to zero functions. Caller should retry."""


class MissingCurrentFunction(FuncTreeError):
    """The completion did not implement the requested function. Caller should retry."""


class CircularReference(FuncTreeError):
    """Inserting this node would create a cycle in the dependency tree."""


class DepthExceeded(FuncTreeError):
    """The dependency tree is already at its configured maximum depth."""


class DivideFailed(FuncTreeError):
    """All divide attempts for a node were exhausted."""


class MissingSlot(FuncTreeError):
    """A prompt template slot was not supplied."""


class BackendUnavailable(FuncTreeError):
    """The live LLM backend could not be reached within the retry budget."""


class MockMiss(FuncTreeError):
    """The mock transcript has no entry for a requested completion."""


class NoInputs(FuncTreeError):
    """Input generation produced zero parseable calls after retries."""


class SandboxUnavailable(FuncTreeError):
    """The execution driver is missing or cannot be launched."""


class FormatError(FuncTreeError):
    """A dataset record does not match the documented schema."""


class RowTooShort(FuncTreeError):
    """A verdict row has fewer entries than the requested k."""


class IntegrityViolation(FuncTreeError):
    """An impossible predicate combination occurred in the self-test study."""


class ConfigError(FuncTreeError):
    """Invalid run configuration."""
