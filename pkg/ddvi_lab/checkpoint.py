# -*- coding: utf-8 -*-
"""Weight checkpoint serializer.

Layout: a text header, one ``name shape`` line per tensor (shape as ``4x3``,
``scalar`` for 0-d), terminated by an ``end`` line, followed by the values of
every tensor in header order as one little-endian float64 stream.
"""
from collections import OrderedDict

import numpy as np

from .exceptions import CheckpointMismatchError, ContractViolation

MAGIC = "ddvi-checkpoint 1"
END = "end"


def _format_shape(shape):
    return "x".join(str(s) for s in shape) or "scalar"


def _parse_shape(text):
    if text == "scalar":
        return ()
    return tuple(int(s) for s in text.split("x"))


def dumps(state):
    lines = [MAGIC]
    for name, value in state.items():
        if " " in name:
            raise ContractViolation("tensor name %r contains a space" % name)
        lines.append("%s %s" % (name, _format_shape(np.shape(value))))
    lines.append(END)
    header = ("\n".join(lines) + "\n").encode("utf-8")
    payload = b"".join(np.ascontiguousarray(v, dtype="<f8").tobytes() for v in state.values())
    return header + payload


def loads(s):
    state = OrderedDict()
    shapes = []
    pos = 0
    first = True
    while True:
        end = s.find(b"\n", pos)
        if end < 0:
            raise ContractViolation("checkpoint header is not terminated")
        line = s[pos:end].decode("utf-8")
        pos = end + 1
        if first:
            if line != MAGIC:
                raise ContractViolation("not a checkpoint (header %r)" % line)
            first = False
            continue
        if line == END:
            break
        name, shape = line.rsplit(" ", 1)
        shapes.append((name, _parse_shape(shape)))
    for name, shape in shapes:
        count = int(np.prod(shape)) if shape else 1
        nbytes = 8 * count
        if pos + nbytes > len(s):
            raise ContractViolation("checkpoint payload truncated at tensor %r" % name)
        state[name] = np.frombuffer(s[pos:pos + nbytes], dtype="<f8").astype(np.float64).reshape(shape)
        pos += nbytes
    if pos != len(s):
        raise ContractViolation("checkpoint has %d trailing bytes" % (len(s) - pos))
    return state


def save(path, state):
    with open(path, "wb") as f:
        f.write(dumps(state))


def load(path):
    with open(path, "rb") as f:
        return loads(f.read())


def shape_diffs(expected, found):
    """``(name, expected shape, found shape)`` for every tensor that differs."""
    diffs = []
    for name, value in expected.items():
        if name not in found:
            diffs.append((name, np.shape(value), None))
        elif np.shape(found[name]) != np.shape(value):
            diffs.append((name, np.shape(value), np.shape(found[name])))
    for name, value in found.items():
        if name not in expected:
            diffs.append((name, None, np.shape(value)))
    return diffs


def check_compatible(expected, found):
    diffs = shape_diffs(expected, found)
    if diffs:
        raise CheckpointMismatchError(diffs)
