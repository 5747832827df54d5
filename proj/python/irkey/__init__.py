"""Infrared keystroke inference lab: simulation, inference, correction and defenses."""

import os
from pathlib import Path

_bundled = Path(__file__).with_name("words.tsv")
if _bundled.exists():
    os.environ.setdefault("IRKEY_DICTIONARY", str(_bundled))

from ._irkey import *  # noqa: E402,F401,F403
from ._irkey import __doc__  # noqa: E402,F401
