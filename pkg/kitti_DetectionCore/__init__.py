# coding=utf-8
from __future__ import absolute_import

import logging

__version__ = "0.1.0"

# handlers are configured by the command line entry point only
logging.getLogger(__name__).addHandler(logging.NullHandler())
