class FlowBRError(Exception):
    def __init__(self, *args, **kwargs):
        self.message = args[0] if args else self.__class__.__name__

    def __str__(self):
        return f"{self.message}"

    def __repr__(self):
        return self.__class__.__name__


class InvalidInput(FlowBRError):
    pass


class FormatError(FlowBRError):
    def __init__(self, *args, offset=None, **kwargs):
        super().__init__(*args, **kwargs)
        self.offset = offset


class TruncationError(FlowBRError):
    def __init__(self, *args, frame_index=None, **kwargs):
        super().__init__(*args, **kwargs)
        self.frame_index = frame_index


class InsufficientInput(FlowBRError):
    pass


class DimensionMismatch(FlowBRError):
    def __init__(self, *args, filename=None, **kwargs):
        super().__init__(*args, **kwargs)
        self.filename = filename


class NumericError(FlowBRError):
    pass


class AllPointsLost(FlowBRError):
    def __init__(self, *args, frame_index=None, **kwargs):
        super().__init__(*args, **kwargs)
        self.frame_index = frame_index


class KeypointParseError(FlowBRError):
    def __init__(self, *args, line=None, **kwargs):
        super().__init__(*args, **kwargs)
        self.line = line


class DuplicateLandmark(FlowBRError):
    pass


class UnknownLandmark(FlowBRError):
    pass


class MissingLandmark(FlowBRError):
    def __init__(self, *args, name=None, **kwargs):
        super().__init__(*args, **kwargs)
        self.name = name


class DegenerateGrid(FlowBRError):
    pass


class EmptySignal(FlowBRError):
    pass


class FilterDesignError(FlowBRError):
    pass


class SignalTooShort(FlowBRError):
    pass


class SpecError(FlowBRError):
    pass


class ManifestError(FlowBRError):
    pass


class PipelineError(FlowBRError):
    """Wraps an error raised inside one stage of the estimation pipeline."""

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
