"""Exception hierarchy shared across the toolkit."""


class SpeechEditError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(SpeechEditError):
    """An argument violates a documented precondition."""


class OOVError(SpeechEditError):
    """A word is missing from the pronunciation lexicon."""

    def __init__(self, word: str):
        self.word = word
        super().__init__(f"word not in lexicon: {word!r}")


class MalformedAlignmentError(SpeechEditError):
    """An alignment file violates the span invariants."""


class InvalidRequestError(SpeechEditError):
    """An edit request is inconsistent with the utterance it targets."""


class UnknownIdError(SpeechEditError):
    """Lookup of an utterance or audio artifact id failed."""


class TrainingDivergedError(SpeechEditError):
    """Training produced a non-finite loss."""
