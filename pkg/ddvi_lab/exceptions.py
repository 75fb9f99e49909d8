# -*- coding: utf-8 -*-
"""Errors raised by ddvi_lab."""


class ContractViolation(ValueError):
    """An operation was called outside its preconditions."""


class IdxFormatError(ValueError):
    """Base class of IDX container parse errors."""


class BadMagicError(IdxFormatError):
    def __init__(self, path, magic, expected):
        self.path = path
        self.magic = magic
        self.expected = expected
        super().__init__("bad magic 0x%08x in %s (expected 0x%08x)" % (magic, path, expected))


class TruncatedPayloadError(IdxFormatError):
    def __init__(self, path, expected, found):
        self.path = path
        self.expected = expected
        self.found = found
        super().__init__("truncated payload in %s: expected %d bytes, found %d" % (path, expected, found))


class CountMismatchError(IdxFormatError):
    def __init__(self, images, labels):
        self.images = images
        self.labels = labels
        super().__init__("image/label count mismatch: %d images, %d labels" % (images, labels))


class MatrixParseError(ValueError):
    def __init__(self, row, reason):
        self.row = row
        self.reason = reason
        super().__init__("row %d: %s" % (row, reason))


class ConfigError(ValueError):
    def __init__(self, key, reason, line=None):
        self.key = key
        self.line = line
        self.reason = reason
        where = "line %d: " % line if line is not None else ""
        super().__init__("%s'%s': %s" % (where, key, reason))


class CheckpointMismatchError(ValueError):
    def __init__(self, diffs):
        # diffs: list of (name, expected shape or None, found shape or None)
        self.diffs = list(diffs)
        lines = ["  %s: expected %s, found %s" % (name, _shape(want), _shape(got)) for name, want, got in self.diffs]
        super().__init__("checkpoint does not match the configured architecture:\n" + "\n".join(lines))


class NonFiniteLossError(RuntimeError):
    def __init__(self, epoch, batch_index, breakdown):
        self.epoch = epoch
        self.batch_index = batch_index
        self.breakdown = breakdown
        super().__init__("non-finite loss at epoch %d, batch %d: %s" % (epoch, batch_index, breakdown))


def _shape(shape):
    if shape is None:
        return "missing"
    return "x".join(str(s) for s in shape) or "scalar"
