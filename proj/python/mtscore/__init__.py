"""Zero-shot multi-trait essay scoring: deterministic core operations.

The heavy lifting lives in the compiled extension; this package re-exports it.
"""

from ._mtscore import *  # noqa: F401,F403
from ._mtscore import __version__  # noqa: F401
