"""Kernel selection: compiled extension when built, numpy fallback otherwise.

Set ``NETPARTIAL_NO_EXT=1`` to force the fallback (used by the benchmark and
by tests that cross-check the two paths).
"""

import os

from . import _ref

if os.environ.get("NETPARTIAL_NO_EXT"):
    impl = _ref
    HAVE_EXT = False
else:
    try:
        from . import _fast as impl

        HAVE_EXT = True
    except ImportError:
        impl = _ref
        HAVE_EXT = False

dyad_u01 = impl.dyad_u01
dyad_uniforms = impl.dyad_uniforms
sample_block_graph = impl.sample_block_graph
sample_product_graph = impl.sample_product_graph
threshold_cascade = impl.threshold_cascade
hearing_exposure = impl.hearing_exposure
adjacency_matvec = impl.adjacency_matvec
