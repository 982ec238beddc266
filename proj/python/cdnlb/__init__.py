"""Load management for two-layer anycast CDNs."""

from ._cdnlb import *  # noqa: F401,F403
from ._cdnlb import CdnlbError

__all__ = [name for name in dir() if not name.startswith("_")]
