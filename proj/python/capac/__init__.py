"""Python bindings for the capac emulator."""

from capac._core import *  # noqa: F401,F403
from capac._core import __doc__  # noqa: F401
