# coding=utf-8
from __future__ import absolute_import


class DetectionCoreError(Exception):
    """Base class of every error raised by this package."""


class MalformedInputError(DetectionCoreError):
    """Input bytes, text or CSV content does not follow the expected layout."""


class ParameterError(DetectionCoreError):
    """An argument is out of range or shapes do not fit together."""


class DegenerateGeometryError(DetectionCoreError):
    """Geometry that has no well defined result (collinear corners, zero-length vectors)."""


class ConfigError(ParameterError):
    pass


def lineError(lineNumber, message):
    return "[line " + str(lineNumber) + "] " + message
