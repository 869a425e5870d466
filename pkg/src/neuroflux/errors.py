"""Exception types raised across the toolkit.

Every error derives from :class:`NeurofluxError` (itself a ``ValueError``) so
callers can catch the whole family at once. Errors that carry location
information (channel, epoch, frequency, ...) expose it as attributes.
"""


class NeurofluxError(ValueError):
    pass


# signal-core
class NonFinite(NeurofluxError):
    def __init__(self, channel, index):
        self.channel = channel
        self.index = index
        super().__init__(f"non-finite sample in channel {channel} at index {index}")


class LengthMismatch(NeurofluxError):
    pass


class NonPositiveRate(NeurofluxError):
    pass


class BadRegionMap(NeurofluxError):
    pass


# dsp
class CutoffOutOfRange(NeurofluxError):
    pass


class UnsupportedOrder(NeurofluxError):
    pass


class RateMismatch(NeurofluxError):
    pass


class BadWindow(NeurofluxError):
    pass


class BadRatio(NeurofluxError):
    pass


class TooShort(NeurofluxError):
    pass


class BadLevels(NeurofluxError):
    pass


class BadLevel(NeurofluxError):
    pass


class ZeroVariance(NeurofluxError):
    def __init__(self, msg="zero variance", channel=None, epoch=None):
        self.channel = channel
        self.epoch = epoch
        super().__init__(msg)


# mbll
class SingularExtinction(NeurofluxError):
    pass


# pipeline
class WindowOutOfBounds(NeurofluxError):
    def __init__(self, event_index, msg=None):
        self.event_index = event_index
        super().__init__(msg or f"epoch window of event {event_index} exceeds the recording")


class MissingChannel(NeurofluxError):
    pass


class EpochCountMismatch(NeurofluxError):
    pass


# fc
class BadBand(NeurofluxError):
    pass


class TooFewSegments(NeurofluxError):
    pass


# ec
class InsufficientData(NeurofluxError):
    pass


class BadOrder(NeurofluxError):
    pass


class SingularAbar(NeurofluxError):
    def __init__(self, freq):
        self.freq = freq
        super().__init__(f"I - sum A_k z^-k is singular at {freq:g} Hz")


class SingularSpectrum(NeurofluxError):
    def __init__(self, freq):
        self.freq = freq
        super().__init__(f"spectral matrix is singular at {freq:g} Hz")


class ZeroNoiseVariance(NeurofluxError):
    pass


class MetricMismatch(NeurofluxError):
    pass


class UnstableModelWarning(UserWarning):
    """Fitted MVAR model has companion spectral radius >= 1."""


# stats
class AllZeroDifferences(NeurofluxError):
    pass


# synth
class UnstableSpec(NeurofluxError):
    pass


# cli
class BadConfig(NeurofluxError):
    def __init__(self, msg, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + msg)


class IoError(NeurofluxError, OSError):
    pass


class IncompleteResults(NeurofluxError):
    pass
