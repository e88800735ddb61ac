#!/usr/bin/env python3
"""Compare the numba and pure-numpy kernel backends on pipeline-shaped
workloads.

Run:  python benchmarks/bench_kernels.py [--quick]

The same workloads run on both backends in one process (the env flag
FUNDUSLOC_NO_NUMBA only picks the default backend for the library; here
both are imported directly), and outputs are cross-checked for equality
before timing.
"""

import argparse
import time

import numpy as np

from fundusloc.imaging import StructuringElement
from fundusloc.kernels import numpy_backend

try:
    from fundusloc.kernels import numba_backend
except ImportError:
    numba_backend = None


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def make_workloads(side):
    rng = np.random.default_rng(12)
    img = rng.integers(0, 256, size=(side * 8 // 5, side * 8 // 5, 3), dtype=np.uint8)

    # sparse bright-core mask (like the adaptively binarized working frame)
    sparse = np.zeros((side, side), dtype=bool)
    ys, xs = np.ogrid[:side, :side]
    for _ in range(6):
        cy, cx = rng.integers(100, side - 100, 2)
        r = int(rng.integers(20, 60))
        sparse |= (xs - cx) ** 2 + (ys - cy) ** 2 <= r * r
    sparse |= rng.random((side, side)) < 0.001

    # dense fundus mask (like the global-threshold retina segmentation)
    dense = (xs - side // 2) ** 2 + (ys - side // 2) ** 2 <= (side // 2 - 20) ** 2

    erode_offs = StructuringElement("disk", 5).offsets()
    dilate_offs = StructuringElement("disk", 15).offsets()
    ref = rng.integers(0, 256, size=(side, side), dtype=np.uint8)

    def label_and_stats(backend):
        labels, count = backend.label_components(dense)
        return backend.component_stats(labels, count, ref)

    return [
        ("resize %dx%d -> %dx%d" % (img.shape[1], img.shape[0], side, side),
         lambda b: b.resize_bilinear(img, side, side)),
        ("erode disk r=5, sparse mask", lambda b: b.erode(sparse, erode_offs)),
        ("dilate disk r=15, sparse mask", lambda b: b.dilate(sparse, dilate_offs)),
        ("label components, dense mask", lambda b: b.label_components(dense)),
        ("label + stats, dense mask", label_and_stats),
    ]


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true", help="300px frames, 1 repeat")
    args = parser.parse_args()
    side = 300 if args.quick else 1500
    repeats = 1 if args.quick else 3

    workloads = make_workloads(side)
    backends = [("numpy", numpy_backend)]
    if numba_backend is not None:
        # trigger JIT outside the timed region
        for _, fn in workloads:
            fn(numba_backend)
        backends.insert(0, ("numba", numba_backend))
    else:
        print("numba not importable; timing the numpy backend only")

    print(f"{'workload':<36} " + " ".join(f"{n:>12}" for n, _ in backends)
          + ("      speedup" if len(backends) == 2 else ""))
    for name, fn in workloads:
        times = {}
        outputs = {}
        for bname, backend in backends:
            times[bname] = timeit(lambda: fn(backend), repeats)
            outputs[bname] = fn(backend)
        if len(backends) == 2:
            a, b = outputs["numba"], outputs["numpy"]
            same = all(np.array_equal(x, y) for x, y in zip(a, b)) \
                if isinstance(a, tuple) else np.array_equal(a, b)
            assert same, f"backend outputs differ for {name}"
            ratio = times["numpy"] / times["numba"]
            print(f"{name:<36} " + " ".join(f"{times[n] * 1e3:>10.1f}ms"
                                            for n, _ in backends)
                  + f"   {ratio:>8.1f}x")
        else:
            print(f"{name:<36} {times['numpy'] * 1e3:>10.1f}ms")


if __name__ == "__main__":
    main()
