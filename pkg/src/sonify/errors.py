"""Exception hierarchy shared across the pipeline."""


class SonifyError(Exception):
    """Base class for all pipeline errors."""


class AudioDecodeError(SonifyError):
    """Raised when a file cannot be decoded into an audio clip."""


class AudioFormatError(SonifyError):
    """Raised when audio data violates an operation's preconditions."""


class LoudnessError(SonifyError):
    """Raised when loudness cannot be measured or applied."""


class EmbeddingFormatError(SonifyError):
    """Raised when an embedding file or matrix is malformed."""


class RetrievalError(SonifyError):
    """Raised when a concept cannot be matched to an audio chunk."""


class MixerError(SonifyError):
    """Raised when a mix cannot be rendered."""


class ConceptError(SonifyError):
    """Raised on malformed concept or image records."""


class ConceptServiceError(SonifyError):
    """Raised when the external concept service fails after retries."""


class MetricsError(SonifyError):
    """Raised on invalid metric inputs."""


class ManifestError(SonifyError):
    """Raised on manifest schema violations or broken references."""
