"""Adaptive front-end source separation toolkit.

The heavy lifting lives in the compiled extension module; this package just
re-exports it. When running from a CMake build tree, put both the directory
holding the built ``_core`` module and this ``python`` directory on
``PYTHONPATH``.
"""

try:
    from ._core import *  # noqa: F401,F403  (installed layout)
    from ._core import __version__  # noqa: F401
except ImportError:  # build-tree layout: _core sits on sys.path as a top-level module
    from _core import *  # noqa: F401,F403
    from _core import __version__  # noqa: F401
