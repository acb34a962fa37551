"""Deterministic textured 3D morphing sandbox."""

try:
    from ._interp3d import *  # noqa: F401,F403
    from ._interp3d import __version__  # noqa: F401
except ImportError:  # in-tree builds keep the extension next to this package
    from _interp3d import *  # noqa: F401,F403
    from _interp3d import __version__  # noqa: F401
