from django.core.exceptions import ImproperlyConfigured


class PipelineError(Exception):
    """Base class for every error raised by the pipeline apps."""


class ConfigurationError(PipelineError, ImproperlyConfigured):
    pass


class DimensionError(PipelineError, ValueError):
    pass


class NumericDomainError(PipelineError, ValueError):
    pass


class EmptyAttentionError(PipelineError, ValueError):
    pass


class GraphReuseError(PipelineError, RuntimeError):
    pass


class TrainingDivergenceError(PipelineError, ArithmeticError):
    def __init__(self, message, parameter=None, epoch=None, batch=None):
        super().__init__(message)
        self.parameter = parameter
        self.epoch = epoch
        self.batch = batch


class EmptyHistoryError(PipelineError, ValueError):
    pass


class LeakageError(PipelineError):
    pass


class UndefinedSimilarityError(PipelineError, ValueError):
    pass


class InternalConsistencyError(PipelineError):
    pass


class AucUndefinedError(PipelineError, ValueError):
    pass


class MissingArtifactError(PipelineError, FileNotFoundError):
    def __init__(self, message, command=None):
        super().__init__(message)
        self.command = command
