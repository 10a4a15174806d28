"""Exception hierarchy shared across the package.

Data-shaped problems (bad files, bad values) derive from DataError so the
CLI can map them to a single exit code; numerical blow-ups get their own
branch.
"""


class TwinSyncError(Exception):
    pass


class DataError(TwinSyncError):
    pass


class NumericError(TwinSyncError):
    pass


# ingest
class UnknownMagic(DataError):
    pass


class EmptyCapture(DataError):
    pass


class InvalidProfile(DataError):
    pass


class MalformedRow(DataError):
    pass


class NonUniformSpacing(DataError):
    pass


# series
class TooShort(DataError):
    pass


class EmptyInput(DataError):
    pass


# predictor
class ShapeMismatch(DataError):
    pass


class DegenerateBatch(DataError):
    pass


class EmptyDataset(DataError):
    pass


class NonFiniteLoss(NumericError):
    pass


class VersionMismatch(DataError):
    pass


class CorruptModel(DataError):
    pass


# pid
class NotEnabled(TwinSyncError):
    pass


class NonFiniteError(NumericError):
    pass


class InvalidGains(DataError):
    pass


# synchronizer
class InvalidCommand(TwinSyncError):
    pass


class Exhausted(TwinSyncError):
    pass
