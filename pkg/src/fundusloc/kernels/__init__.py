"""Hot pixel kernels with two interchangeable backends.

The numba backend (JIT-compiled) is used by default. Setting the
environment variable ``FUNDUSLOC_NO_NUMBA=1`` before import selects the
pure-numpy fallback; it is also selected automatically when numba is not
installed. Both backends implement the same contracts bit-for-bit, and
``benchmarks/bench_kernels.py`` compares their throughput.

Kernel surface:
    resize_bilinear(src_hwc_u8, out_h, out_w) -> out_hwc_u8
    erode(mask_bool, offsets_i64) -> mask_bool
    dilate(mask_bool, offsets_i64) -> mask_bool
    label_components(mask_bool) -> (labels_i32, count)
    component_stats(labels_i32, count, reference_u8)
        -> (area, sum_x, sum_y, sum_val, x0, y0, x1, y1) int64 arrays,
           indexed by label (entry 0 unused)
"""

import os

_FLAG = os.environ.get("FUNDUSLOC_NO_NUMBA", "")
_numba_disabled = _FLAG not in ("", "0")

if not _numba_disabled:
    try:
        from . import numba_backend as active
        BACKEND = "numba"
    except ImportError:
        from . import numpy_backend as active
        BACKEND = "numpy"
else:
    from . import numpy_backend as active
    BACKEND = "numpy"

resize_bilinear = active.resize_bilinear
erode = active.erode
dilate = active.dilate
label_components = active.label_components
component_stats = active.component_stats

__all__ = [
    "BACKEND",
    "resize_bilinear",
    "erode",
    "dilate",
    "label_components",
    "component_stats",
]
