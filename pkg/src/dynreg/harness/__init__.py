"""Experiment configuration, batch runs, reports and timing studies."""

from .config import *  # noqa: F401,F403
from .io import *  # noqa: F401,F403
from .metrics import *  # noqa: F401,F403
from .runner import *  # noqa: F401,F403
from .timing import *  # noqa: F401,F403
