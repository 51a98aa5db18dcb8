"""Linearized dynamic electrical impedance tomography test problem."""

from .fem import *  # noqa: F401,F403
from .forward import *  # noqa: F401,F403
from .mesh import *  # noqa: F401,F403
