"""Minimal depth-image-based rendering for virtual-view evaluation:
forward warp with a z-buffer, nearest-valid scanline hole filling."""

from __future__ import annotations

import numpy as np

from .geometry import Camera, project_points
from ._merging import ViewGeometry
from .scene_io import ColorImage, DepthMap


def render_virtual_view(color: ColorImage, depth: DepthMap, cam_src: Camera,
                        cam_dst: Camera) -> ColorImage:
    """Warp a color view to a new viewpoint using its depth map."""
    h, w = depth.values.shape
    geo = ViewGeometry.for_view(depth, cam_src)
    points = geo.center + geo.rays * geo.depth_flat[:, None]
    uv, z, in_front = project_points(points, cam_dst)
    with np.errstate(invalid="ignore"):
        ui = np.rint(uv[:, 0]).astype(np.int64)
        vi = np.rint(uv[:, 1]).astype(np.int64)
    valid = in_front & (ui >= 0) & (ui < w) & (vi >= 0) & (vi < h)
    sel = np.nonzero(valid)[0]
    dst_flat = vi[sel] * w + ui[sel]
    order = np.lexsort((sel, z[sel], dst_flat))
    dst_sorted = dst_flat[order]
    first = np.ones(dst_sorted.size, bool)
    first[1:] = dst_sorted[1:] != dst_sorted[:-1]

    out = np.zeros((h * w, 3), np.uint8)
    filled = np.zeros(h * w, bool)
    src_colors = color.values.reshape(-1, 3)
    out[dst_sorted[first]] = src_colors[sel[order[first]]]
    filled[dst_sorted[first]] = True

    out = out.reshape(h, w, 3)
    filled = filled.reshape(h, w)
    _fill_holes(out, filled)
    return ColorImage(out)


def _fill_holes(img: np.ndarray, filled: np.ndarray) -> None:
    """Nearest valid pixel along the scanline (ties to the left); rows with
    no valid pixel copy the nearest filled row."""
    h, w = filled.shape
    cols = np.arange(w)
    row_has = filled.any(axis=1)
    for y in range(h):
        if not row_has[y]:
            continue
        ok = np.nonzero(filled[y])[0]
        if ok.size == w:
            continue
        pos = np.searchsorted(ok, cols)
        left = ok[np.clip(pos - 1, 0, ok.size - 1)]
        right = ok[np.clip(pos, 0, ok.size - 1)]
        dl = np.abs(cols - left)
        dr = np.abs(right - cols)
        nearest = np.where(dl <= dr, left, right)
        img[y] = img[y, nearest]
    if not row_has.all():
        good = np.nonzero(row_has)[0]
        if good.size == 0:
            return
        pos = np.searchsorted(good, np.arange(h))
        up = good[np.clip(pos - 1, 0, good.size - 1)]
        down = good[np.clip(pos, 0, good.size - 1)]
        du = np.abs(np.arange(h) - up)
        dd = np.abs(down - np.arange(h))
        nearest = np.where(du <= dd, up, down)
        for y in range(h):
            if not row_has[y]:
                img[y] = img[nearest[y]]
