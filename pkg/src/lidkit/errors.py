"""Exception hierarchy shared by every lidkit module."""


class LidError(Exception):
    """Base class for all data/model errors raised by lidkit."""


class MalformedWav(LidError):
    pass


class UnsupportedEncoding(LidError):
    pass


class EmptySignal(LidError, ValueError):
    pass


class BadFftSize(LidError, ValueError):
    pass


class DegenerateBank(LidError, ValueError):
    pass


class ShapeMismatch(LidError, ValueError):
    pass


class SingularAutocorr(LidError, ValueError):
    pass


class NonPositiveGain(LidError, ValueError):
    pass


class TooShort(LidError, ValueError):
    pass


class InsufficientData(LidError, ValueError):
    pass


class EmptySequence(LidError, ValueError):
    pass


class DegenerateComponent(LidError, RuntimeError):
    pass


class BadManifest(LidError):
    pass


class MissingFile(LidError, FileNotFoundError):
    pass


class BadModelFile(LidError):
    pass
