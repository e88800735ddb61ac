"""Pure-numpy reference backend.

Slower than the numba backend but dependency-free beyond numpy; every
function computes the exact same values (identical float expression
order, identical integer accumulations).
"""

import numpy as np


def resize_bilinear(src: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    in_h, in_w, ch = src.shape
    scale_y = in_h / out_h
    scale_x = in_w / out_w

    sy = (np.arange(out_h, dtype=np.float64) + 0.5) * scale_y - 0.5
    sx = (np.arange(out_w, dtype=np.float64) + 0.5) * scale_x - 0.5
    np.clip(sy, 0.0, in_h - 1.0, out=sy)
    np.clip(sx, 0.0, in_w - 1.0, out=sx)

    y0 = np.floor(sy).astype(np.int64)
    x0 = np.floor(sx).astype(np.int64)
    fy = (sy - y0)[:, None, None]
    fx = (sx - x0)[None, :, None]
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)

    p00 = src[y0[:, None], x0[None, :], :].astype(np.float64)
    p01 = src[y0[:, None], x1[None, :], :].astype(np.float64)
    p10 = src[y1[:, None], x0[None, :], :].astype(np.float64)
    p11 = src[y1[:, None], x1[None, :], :].astype(np.float64)

    top = (1.0 - fx) * p00 + fx * p01
    bot = (1.0 - fx) * p10 + fx * p11
    val = (1.0 - fy) * top + fy * bot
    return np.floor(val + 0.5).astype(np.uint8)


def _shifted(mask: np.ndarray, dy: int, dx: int) -> np.ndarray:
    # out[y, x] = mask[y + dy, x + dx], False where that falls outside.
    h, w = mask.shape
    out = np.zeros_like(mask)
    ys0, ys1 = max(0, -dy), min(h, h - dy)
    xs0, xs1 = max(0, -dx), min(w, w - dx)
    if ys0 < ys1 and xs0 < xs1:
        out[ys0:ys1, xs0:xs1] = mask[ys0 + dy:ys1 + dy, xs0 + dx:xs1 + dx]
    return out


def erode(mask: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    out = np.ones_like(mask)
    for dy, dx in offsets:
        out &= _shifted(mask, int(dy), int(dx))
    return out


def dilate(mask: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    out = np.zeros_like(mask)
    for dy, dx in offsets:
        out |= _shifted(mask, int(dy), int(dx))
    return out


def label_components(mask: np.ndarray):
    """8-connected labeling by explicit-stack flood fill, row-major scan."""
    h, w = mask.shape
    labels = np.zeros((h, w), np.int32)
    flat_mask = mask.ravel()
    flat_labels = labels.ravel()
    count = 0
    for start in np.flatnonzero(flat_mask):
        if flat_labels[start]:
            continue
        count += 1
        flat_labels[start] = count
        stack = [int(start)]
        while stack:
            p = stack.pop()
            py, px = divmod(p, w)
            for ny in range(max(0, py - 1), min(h, py + 2)):
                base = ny * w
                for nx in range(max(0, px - 1), min(w, px + 2)):
                    q = base + nx
                    if flat_mask[q] and not flat_labels[q]:
                        flat_labels[q] = count
                        stack.append(q)
    return labels, count


def component_stats(labels: np.ndarray, count: int, reference: np.ndarray):
    n = count + 1
    ys, xs = np.nonzero(labels)
    lab = labels[ys, xs].astype(np.int64)
    area = np.bincount(lab, minlength=n)
    sum_x = np.bincount(lab, weights=xs, minlength=n).astype(np.int64)
    sum_y = np.bincount(lab, weights=ys, minlength=n).astype(np.int64)
    sum_val = np.bincount(lab, weights=reference[ys, xs], minlength=n).astype(np.int64)

    big = np.int64(1) << 62
    x0 = np.full(n, big, np.int64)
    y0 = np.full(n, big, np.int64)
    x1 = np.zeros(n, np.int64)
    y1 = np.zeros(n, np.int64)
    np.minimum.at(x0, lab, xs)
    np.minimum.at(y0, lab, ys)
    np.maximum.at(x1, lab, xs)
    np.maximum.at(y1, lab, ys)
    return area.astype(np.int64), sum_x, sum_y, sum_val, x0, y0, x1, y1
