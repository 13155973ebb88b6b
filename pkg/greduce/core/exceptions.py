"""
Custom exception classes
"""
from typing import Any, Optional


class GReduceException(Exception):
    """Base toolkit exception"""

    def __init__(
        self,
        message: str,
        exit_code: int = 1,
        error_code: str = "INTERNAL_ERROR",
        details: Optional[Any] = None
    ):
        self.message = message
        self.exit_code = exit_code
        self.error_code = error_code
        self.details = details
        super().__init__(self.message)


class MalformedTraceException(GReduceException):
    """Trace nesting or numbering is inconsistent"""

    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(
            message=message if index is None else f"decision {index}: {message}",
            error_code="MALFORMED_TRACE",
            details={"index": index}
        )


class InvalidLabelException(GReduceException):
    """Labeling references a node that is not a removable unit of the tree"""

    def __init__(self, node: Any):
        super().__init__(
            message=f"node {node!r} is not an Iteration or Block of this tree",
            error_code="INVALID_LABEL",
            details={"node": node}
        )


class ParseException(GReduceException):
    """Document is not well-formed"""

    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(
            message=f"{message} (at byte {offset})",
            error_code="PARSE_ERROR",
            details={"offset": offset}
        )


class SchemaException(GReduceException):
    """Document is well-formed but violates its schema"""

    def __init__(self, message: str, details: Optional[Any] = None):
        super().__init__(
            message=message,
            error_code="SCHEMA_ERROR",
            details=details
        )


class InvalidDomainException(GReduceException):
    """Choice domain is empty"""

    def __init__(self, message: str):
        super().__init__(message=message, error_code="INVALID_DOMAIN")


class ContextFinishedException(GReduceException):
    """Combinator called after the generator returned"""

    def __init__(self, site: str):
        super().__init__(
            message=f"choice at site '{site}' requested after the generator returned",
            error_code="CONTEXT_FINISHED"
        )


class DuplicateSiteException(GReduceException):
    """One site label used by structurally different choice points"""

    def __init__(self, site: str, first: str, second: str):
        super().__init__(
            message=f"site '{site}' used as {first} and as {second}",
            error_code="DUPLICATE_SITE",
            details={"site": site}
        )


class GeneratorException(GReduceException):
    """The generator itself raised"""

    def __init__(self, generator_id: str, cause: BaseException):
        super().__init__(
            message=f"generator '{generator_id}' failed: {cause!r}",
            error_code="GENERATOR_ERROR",
            details={"generator_id": generator_id}
        )


class PropertyNotExhibitedException(GReduceException):
    """Original input does not satisfy the property"""

    def __init__(self, generator_id: str):
        super().__init__(
            message=f"original input of '{generator_id}' does not exhibit the property",
            error_code="PROPERTY_NOT_EXHIBITED"
        )


class OracleTooLargeException(GReduceException):
    """Powerset search requested over too many removable units"""

    def __init__(self, units: int, ceiling: int):
        super().__init__(
            message=f"powerset search over {units} removable units exceeds the ceiling of {ceiling}",
            error_code="ORACLE_TOO_LARGE",
            details={"units": units, "ceiling": ceiling}
        )


class ReductionTimeoutException(GReduceException):
    """Reduction session ran past its deadline"""

    def __init__(self, timeout: float):
        super().__init__(
            message=f"reduction exceeded {timeout:g}s",
            error_code="TIMEOUT_EXCEEDED"
        )


class UnknownCaseException(GReduceException):
    """Case name is not registered"""

    def __init__(self, name: str):
        super().__init__(
            message=f"case '{name}' is not registered",
            exit_code=2,
            error_code="UNKNOWN_CASE"
        )


class UnknownGeneratorException(GReduceException):
    """Trace names a generator that is not registered"""

    def __init__(self, generator_id: str):
        super().__init__(
            message=f"generator '{generator_id}' is not registered",
            exit_code=2,
            error_code="UNKNOWN_GENERATOR"
        )


class ConfigException(GReduceException):
    """Invalid search or campaign configuration"""

    def __init__(self, message: str, details: Optional[Any] = None):
        super().__init__(
            message=message,
            exit_code=2,
            error_code="CONFIG_ERROR",
            details=details
        )


class ReportIOException(GReduceException):
    """Report could not be written"""

    def __init__(self, path: str, cause: BaseException):
        super().__init__(
            message=f"cannot write report to {path}: {cause}",
            error_code="IO_ERROR",
            details={"path": path}
        )
