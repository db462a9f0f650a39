# coding=utf-8
import logging
from logging import StreamHandler

WARNINGS_LOGGER_NAME = "py.warnings"


# re-emits numpy / sklearn warnings on the package logger at DEBUG
class WrappedLoggingHandler(StreamHandler):
    def __init__(self, wrappedLogger):
        StreamHandler.__init__(self)
        self.wrappedLogger = wrappedLogger
        self.setFormatter(logging.Formatter("%(message)s"))

    def emit(self, record):
        msg = " ".join(self.format(record).split())
        self.wrappedLogger.debug("[" + record.name + "] " + msg)


def captureWarnings(wrappedLogger):
    """
    routes warnings.warn() output into wrappedLogger instead of standard error; returns the
    installed handler so callers can detach it again
    """
    logging.captureWarnings(True)
    warningsLogger = logging.getLogger(WARNINGS_LOGGER_NAME)
    for handler in list(warningsLogger.handlers):
        if isinstance(handler, WrappedLoggingHandler):
            warningsLogger.removeHandler(handler)
    handler = WrappedLoggingHandler(wrappedLogger)
    warningsLogger.addHandler(handler)
    warningsLogger.propagate = False
    return handler


def releaseWarnings(handler):
    warningsLogger = logging.getLogger(WARNINGS_LOGGER_NAME)
    warningsLogger.removeHandler(handler)
    warningsLogger.propagate = True
    logging.captureWarnings(False)
