"""Incidence-rate estimation from retrospective cross-sectional cohorts."""

from retroinc._core import *  # noqa: F401,F403
from retroinc._core import __doc__  # noqa: F401
