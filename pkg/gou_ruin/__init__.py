"""
Cramér-type ruin asymptotics for generalised Ornstein-Uhlenbeck processes.
"""

from gou_ruin.core.config import settings

__version__ = settings.project_version
