"""Exception types shared across the package."""


class TextScaleError(Exception):
    """Base class for all data errors raised by textscale."""


class FormatError(TextScaleError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)


class EmptyVocabulary(TextScaleError):
    pass


class EmptySignal(TextScaleError):
    pass


class MissingEmbedding(TextScaleError):
    def __init__(self, doc_id, sentence_index):
        self.doc_id = doc_id
        self.sentence_index = sentence_index
        super().__init__(f"no topic embedding for document {doc_id!r}, sentence {sentence_index}")


class ZeroMass(TextScaleError):
    pass


class InvalidScale(TextScaleError, ValueError):
    pass


class UnsupportedOrder(TextScaleError, ValueError):
    pass


class UnstableStep(TextScaleError, ValueError):
    pass


class SingularSystem(TextScaleError):
    pass


class InvalidRange(TextScaleError, ValueError):
    pass


class DimensionMismatch(TextScaleError, ValueError):
    pass


class DegenerateClass(TextScaleError):
    pass


class NoPreferencePairs(TextScaleError):
    pass


class NoPositiveMargin(TextScaleError):
    pass


class TooShort(TextScaleError):
    pass


class MissingJudgments(TextScaleError):
    pass


class LabelMismatch(TextScaleError):
    pass


class EmptyGraphWarning(UserWarning):
    """No edge survived the PMI cut-off."""
