"""Exception types shared across the pipeline.

The CLI maps these onto process exit codes, so stages raise the most
specific type that applies instead of bare ValueError/RuntimeError.
"""


class OodSynthError(Exception):
    """Base class for all toolkit errors."""


class FormatError(OodSynthError):
    """Input file does not match the documented format."""


class RecordValidationError(OodSynthError):
    """A record inside an otherwise well-formed file violates an invariant."""


class CorruptionError(FormatError):
    """Binary container truncated or internally inconsistent."""


class ArgumentError(OodSynthError, ValueError):
    """Caller passed an argument outside the documented domain."""


class ConfigError(OodSynthError):
    """Pipeline configuration failed validation."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class MissingArtifactError(OodSynthError):
    """A stage's upstream artifact is absent or has a stale fingerprint."""

    def __init__(self, message, stage=None):
        super().__init__(message)
        self.stage = stage


class PlanningError(OodSynthError):
    """Job planning cannot proceed (no candidates, or a label with no concepts)."""


class PairingError(OodSynthError):
    """Feature pairing failed; carries the lineage ids that could not be joined."""

    def __init__(self, message, lineage_ids=()):
        super().__init__(message)
        self.lineage_ids = tuple(lineage_ids)


class EmptyMaskError(OodSynthError):
    """Mask contains no foreground pixels."""


class DegenerateVectorError(ArgumentError):
    """Cosine similarity of a zero-norm vector is undefined."""


class EmptyResponseError(OodSynthError):
    """Backend response parsed to zero concepts; carries the raw text."""

    def __init__(self, message, raw_text=""):
        super().__init__(message)
        self.raw_text = raw_text


class PartialConceptsError(OodSynthError):
    """Retry budget exhausted before every label reached its concept quota."""

    def __init__(self, message, short_labels=(), concept_map=None):
        super().__init__(message)
        self.short_labels = tuple(short_labels)
        self.concept_map = concept_map


class BackendError(OodSynthError):
    """Base class for model-backend failures."""


class TransportError(BackendError):
    """Network-level failure (connect, timeout, 5xx). Retryable."""


class ProtocolError(BackendError):
    """Backend answered but violated the wire contract (4xx, malformed body). Not retryable."""


class DivergenceError(OodSynthError):
    """Training produced a non-finite loss."""

    def __init__(self, message, epoch=None, learning_rate=None):
        super().__init__(message)
        self.epoch = epoch
        self.learning_rate = learning_rate
