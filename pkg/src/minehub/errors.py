"""Exception types shared across the toolkit.

Every error that should surface as a domain failure (CLI exit code 1)
derives from MinehubError; usage problems are left to argparse.
"""


class MinehubError(Exception):
    """Base class for domain errors."""

    code = "error"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    def to_doc(self) -> dict:
        return {"code": self.code, "message": self.message}


class UnknownCollectionError(MinehubError):
    code = "unknown-collection"


class UnknownFieldError(MinehubError):
    code = "unknown-field"


class MissingNaturalKeyError(MinehubError):
    code = "missing-natural-key"


class SchemaViolationError(MinehubError):
    code = "schema-violation"


class AppendOnlyViolationError(MinehubError):
    code = "append-only-violation"


class NotFoundError(MinehubError):
    code = "not-found"


class RepositoryError(MinehubError):
    code = "repository-error"


class MissingCloneError(MinehubError):
    code = "missing-clone"


class UnknownRevisionError(MinehubError):
    code = "unknown-revision"


class PathMissingError(MinehubError):
    code = "path-missing"


class MalformedPayloadError(MinehubError):
    code = "malformed-payload"


class TrackerAuthError(MinehubError):
    code = "auth-failure"


class RateLimitExhaustedError(MinehubError):
    code = "rate-limit-exhausted"

    def __init__(self, message: str, watermark: str | None = None):
        super().__init__(message)
        self.watermark = watermark


class TaxonomyError(MinehubError):
    code = "taxonomy-violation"


class LineRangeError(MinehubError):
    code = "line-out-of-range"


class ValidatorRequiredError(MinehubError):
    code = "validator-required"


class StageFailedError(MinehubError):
    code = "stage-failed"
