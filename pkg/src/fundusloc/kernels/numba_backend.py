"""JIT backend. Same contracts and bit-identical outputs as numpy_backend."""

import math

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def resize_bilinear(src, out_h, out_w):
    in_h, in_w, ch = src.shape
    out = np.empty((out_h, out_w, ch), np.uint8)
    scale_y = in_h / out_h
    scale_x = in_w / out_w
    for oy in range(out_h):
        sy = (oy + 0.5) * scale_y - 0.5
        if sy < 0.0:
            sy = 0.0
        elif sy > in_h - 1.0:
            sy = in_h - 1.0
        y0 = int(math.floor(sy))
        fy = sy - y0
        y1 = y0 + 1 if y0 + 1 < in_h else in_h - 1
        for ox in range(out_w):
            sx = (ox + 0.5) * scale_x - 0.5
            if sx < 0.0:
                sx = 0.0
            elif sx > in_w - 1.0:
                sx = in_w - 1.0
            x0 = int(math.floor(sx))
            fx = sx - x0
            x1 = x0 + 1 if x0 + 1 < in_w else in_w - 1
            for c in range(ch):
                p00 = src[y0, x0, c]
                p01 = src[y0, x1, c]
                p10 = src[y1, x0, c]
                p11 = src[y1, x1, c]
                top = (1.0 - fx) * p00 + fx * p01
                bot = (1.0 - fx) * p10 + fx * p11
                val = (1.0 - fy) * top + fy * bot
                out[oy, ox, c] = np.uint8(math.floor(val + 0.5))
    return out


@njit(cache=True, nogil=True)
def erode(mask, offsets):
    h, w = mask.shape
    out = np.zeros_like(mask)
    n = offsets.shape[0]
    for y in range(h):
        for x in range(w):
            if not mask[y, x]:
                continue
            keep = True
            for k in range(n):
                ny = y + offsets[k, 0]
                nx = x + offsets[k, 1]
                if ny < 0 or ny >= h or nx < 0 or nx >= w or not mask[ny, nx]:
                    keep = False
                    break
            out[y, x] = keep
    return out


@njit(cache=True, nogil=True)
def dilate(mask, offsets):
    # Stamp the reflected element from each foreground pixel; cheaper than
    # probing every output pixel when the foreground is sparse.
    h, w = mask.shape
    out = np.zeros_like(mask)
    n = offsets.shape[0]
    for y in range(h):
        for x in range(w):
            if not mask[y, x]:
                continue
            for k in range(n):
                py = y - offsets[k, 0]
                px = x - offsets[k, 1]
                if 0 <= py < h and 0 <= px < w:
                    out[py, px] = True
    return out


@njit(cache=True, nogil=True)
def label_components(mask):
    h, w = mask.shape
    labels = np.zeros((h, w), np.int32)
    stack = np.empty(h * w, np.int64)
    count = 0
    for y0 in range(h):
        for x0 in range(w):
            if not mask[y0, x0] or labels[y0, x0] != 0:
                continue
            count += 1
            labels[y0, x0] = count
            stack[0] = y0 * w + x0
            top = 1
            while top > 0:
                top -= 1
                p = stack[top]
                py = p // w
                px = p % w
                ylo = py - 1 if py > 0 else 0
                yhi = py + 2 if py + 2 <= h else h
                xlo = px - 1 if px > 0 else 0
                xhi = px + 2 if px + 2 <= w else w
                for ny in range(ylo, yhi):
                    for nx in range(xlo, xhi):
                        if mask[ny, nx] and labels[ny, nx] == 0:
                            labels[ny, nx] = count
                            stack[top] = ny * w + nx
                            top += 1
    return labels, count


@njit(cache=True, nogil=True)
def component_stats(labels, count, reference):
    h, w = labels.shape
    n = count + 1
    area = np.zeros(n, np.int64)
    sum_x = np.zeros(n, np.int64)
    sum_y = np.zeros(n, np.int64)
    sum_val = np.zeros(n, np.int64)
    big = np.int64(1) << 62
    x0 = np.full(n, big, np.int64)
    y0 = np.full(n, big, np.int64)
    x1 = np.zeros(n, np.int64)
    y1 = np.zeros(n, np.int64)
    for y in range(h):
        for x in range(w):
            lab = labels[y, x]
            if lab == 0:
                continue
            area[lab] += 1
            sum_x[lab] += x
            sum_y[lab] += y
            sum_val[lab] += reference[y, x]
            if x < x0[lab]:
                x0[lab] = x
            if y < y0[lab]:
                y0[lab] = y
            if x > x1[lab]:
                x1[lab] = x
            if y > y1[lab]:
                y1[lab] = y
    return area, sum_x, sum_y, sum_val, x0, y0, x1, y1
