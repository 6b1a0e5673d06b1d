"""Greedy agglomeration of single-pixel regions by color-mean difference.

Numba kernel used by the color leaf segmenter.  The merge loop is fully
deterministic: candidate merges are ordered by (cost, min_id, max_id) where
ids are raster-order leaf ids 0..N-1 and merge products take ids N, N+1, ...
The same inputs therefore yield bit-identical label maps in any process,
which is what makes the color partition reproducible at the decoder.
"""

from __future__ import annotations

import numpy as np
from numba import njit
from numba.typed import List as TypedList


@njit(cache=True)
def _heap_push(hc, ha, hb, hn, cost, a, b):
    i = hn
    hc[i] = cost
    ha[i] = a
    hb[i] = b
    while i > 0:
        p = (i - 1) >> 1
        if (hc[i] < hc[p]
                or (hc[i] == hc[p]
                    and (ha[i] < ha[p] or (ha[i] == ha[p] and hb[i] < hb[p])))):
            hc[i], hc[p] = hc[p], hc[i]
            ha[i], ha[p] = ha[p], ha[i]
            hb[i], hb[p] = hb[p], hb[i]
            i = p
        else:
            break
    return hn + 1


@njit(cache=True)
def _heap_pop(hc, ha, hb, hn):
    cost = hc[0]
    a = ha[0]
    b = hb[0]
    hn -= 1
    hc[0] = hc[hn]
    ha[0] = ha[hn]
    hb[0] = hb[hn]
    i = 0
    while True:
        l = 2 * i + 1
        r = l + 1
        m = i
        if l < hn and (hc[l] < hc[m]
                       or (hc[l] == hc[m]
                           and (ha[l] < ha[m] or (ha[l] == ha[m] and hb[l] < hb[m])))):
            m = l
        if r < hn and (hc[r] < hc[m]
                       or (hc[r] == hc[m]
                           and (ha[r] < ha[m] or (ha[r] == ha[m] and hb[r] < hb[m])))):
            m = r
        if m == i:
            break
        hc[i], hc[m] = hc[m], hc[i]
        ha[i], ha[m] = ha[m], ha[i]
        hb[i], hb[m] = hb[m], hb[i]
        i = m
    return cost, a, b, hn


@njit(cache=True)
def _resolve(absorbed, x):
    root = x
    while absorbed[root] >= 0:
        root = absorbed[root]
    while absorbed[x] >= 0:
        nxt = absorbed[x]
        absorbed[x] = root
        x = nxt
    return root


@njit(cache=True)
def _mean_cost(csum, cnt, a, b):
    cost = 0.0
    for k in range(3):
        d = csum[a, k] / cnt[a] - csum[b, k] / cnt[b]
        cost += d * d
    return cost


@njit(cache=True)
def _merge_pixels(colors, height, width, n_target):
    n = height * width
    max_ids = 2 * n
    csum = np.zeros((max_ids, 3), np.float64)
    cnt = np.zeros(max_ids, np.int64)
    alive = np.zeros(max_ids, np.uint8)
    absorbed = np.full(max_ids, -1, np.int64)
    stamp = np.full(max_ids, -1, np.int64)

    for i in range(n):
        for k in range(3):
            csum[i, k] = colors[i, k]
        cnt[i] = 1
        alive[i] = 1

    nbrs = TypedList()
    for i in range(n):
        y = i // width
        x = i - y * width
        deg = 0
        buf = np.empty(4, np.int64)
        if x > 0:
            buf[deg] = i - 1
            deg += 1
        if x < width - 1:
            buf[deg] = i + 1
            deg += 1
        if y > 0:
            buf[deg] = i - width
            deg += 1
        if y < height - 1:
            buf[deg] = i + width
            deg += 1
        nbrs.append(buf[:deg].copy())

    cap = 4 * n + 64
    hc = np.empty(cap, np.float64)
    ha = np.empty(cap, np.int64)
    hb = np.empty(cap, np.int64)
    hn = 0
    for i in range(n):
        y = i // width
        x = i - y * width
        if x < width - 1:
            hn = _heap_push(hc, ha, hb, hn, _mean_cost(csum, cnt, i, i + 1), i, i + 1)
        if y < height - 1:
            hn = _heap_push(hc, ha, hb, hn, _mean_cost(csum, cnt, i, i + width), i, i + width)

    next_id = n
    alive_cnt = n
    while alive_cnt > n_target and hn > 0:
        cost, a, b, hn = _heap_pop(hc, ha, hb, hn)
        if alive[a] == 0 or alive[b] == 0:
            continue
        c = next_id
        next_id += 1
        for k in range(3):
            csum[c, k] = csum[a, k] + csum[b, k]
        cnt[c] = cnt[a] + cnt[b]
        alive[a] = 0
        alive[b] = 0
        alive[c] = 1
        absorbed[a] = c
        absorbed[b] = c
        alive_cnt -= 1

        deg = 0
        buf = np.empty(len(nbrs[a]) + len(nbrs[b]), np.int64)
        for src in range(2):
            lst = nbrs[a] if src == 0 else nbrs[b]
            for j in range(len(lst)):
                r = lst[j]
                if alive[r] == 0:
                    r = _resolve(absorbed, r)
                if r == c or alive[r] == 0 or stamp[r] == c:
                    continue
                stamp[r] = c
                buf[deg] = r
                deg += 1
        new_nb = buf[:deg].copy()
        nbrs.append(new_nb)

        for j in range(deg):
            r = new_nb[j]
            if hn + 1 > cap:
                cap = 2 * cap
                hc2 = np.empty(cap, np.float64)
                ha2 = np.empty(cap, np.int64)
                hb2 = np.empty(cap, np.int64)
                hc2[:hn] = hc[:hn]
                ha2[:hn] = ha[:hn]
                hb2[:hn] = hb[:hn]
                hc, ha, hb = hc2, ha2, hb2
            lo = r if r < c else c
            hi = c if r < c else r
            hn = _heap_push(hc, ha, hb, hn, _mean_cost(csum, cnt, lo, hi), lo, hi)

    out = np.empty(n, np.int64)
    for i in range(n):
        out[i] = _resolve(absorbed, i)
    return out


def greedy_color_labels(image: np.ndarray, n_target: int) -> np.ndarray:
    """Per-pixel region ids (non-canonical) after merging down to n_target."""
    h, w = image.shape[:2]
    colors = np.ascontiguousarray(image.reshape(-1, 3), dtype=np.float64)
    return _merge_pixels(colors, h, w, min(n_target, h * w)).reshape(h, w)
