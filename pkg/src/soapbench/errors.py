"""Exception types shared across the package."""


class SoapBenchError(Exception):
    """Base class for all domain errors raised by this package."""


class CorpusError(SoapBenchError):
    """The corpus on disk or in memory violates its invariants."""


class MissingReference(CorpusError):
    def __init__(self, consultation_id: str):
        super().__init__(f"transcript {consultation_id!r} has no paired reference report")
        self.consultation_id = consultation_id


class ParseFailure(CorpusError):
    def __init__(self, path, line: int, reason: str):
        super().__init__(f"{path}:{line}: {reason}")
        self.path = path
        self.line = line
        self.reason = reason


class EmptyCorpus(CorpusError):
    """No usable consultations were found."""


class NoSectionsFound(SoapBenchError):
    """Report text contains no recognizable SOAP section marker."""


class InsufficientShots(SoapBenchError):
    """The corpus does not supply enough shot examples for the requested matrix."""


class UnknownVariant(SoapBenchError):
    def __init__(self, unknown, valid):
        self.unknown = tuple(unknown)
        self.valid = tuple(valid)
        super().__init__(
            "unknown variant id(s): %s (valid: %s)"
            % (", ".join(self.unknown), ", ".join(self.valid))
        )


class BackendError(SoapBenchError):
    """A completion backend failed to produce a response."""


class MissingCredential(BackendError):
    pass


class AuthError(BackendError):
    pass


class RateLimited(BackendError):
    pass


class Timeout(BackendError):
    pass


class MalformedResponse(BackendError):
    pass


class ExperimentError(SoapBenchError):
    pass


class EmptyLedger(ExperimentError):
    """No scored runs are available to aggregate."""


class LedgerError(ExperimentError):
    """The on-disk run ledger is corrupt (duplicate keys, bad JSON)."""


class AnnotationError(SoapBenchError):
    pass


class DuplicateVote(AnnotationError):
    def __init__(self, category: str, rater_id: str):
        super().__init__(f"rater {rater_id!r} voted twice on category {category!r}")
        self.category = category
        self.rater_id = rater_id
