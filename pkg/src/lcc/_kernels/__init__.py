"""Closed-loop tracking kernel with a compiled fast path.

`simulate_period` integrates the vehicle over one control period against a
piecewise-polynomial reference.  The Cython build is used when available
unless LCC_PURE_PYTHON is set; the pure-Python reference implementation is
the fallback and the ground truth for equivalence tests.
"""

import os

from ._reference import simulate_period as _simulate_period_py

IMPLEMENTATION = "python"
simulate_period = _simulate_period_py

if not os.environ.get("LCC_PURE_PYTHON"):
    try:
        from ._fast import simulate_period as _simulate_period_c

        simulate_period = _simulate_period_c
        IMPLEMENTATION = "cython"
    except ImportError:
        pass

simulate_period_py = _simulate_period_py

__all__ = ["simulate_period", "simulate_period_py", "IMPLEMENTATION"]
