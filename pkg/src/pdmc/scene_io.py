"""View I/O and synthetic multi-view scene generation.

File formats: PPM (P6, 8-bit) for color, PFM (little-endian, scale -1.0) for
continuous depth, PGM (P5, 16-bit big-endian) for label maps and for the
optional quantized inverse-depth mode, plus a plain-text camera format::

    fx fy cx cy
    r00 r01 r02
    r10 r11 r12
    r20 r21 r22
    tx ty tz
    minz maxz
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import Camera

__all__ = [
    "DepthMap",
    "ColorImage",
    "SceneSpec",
    "ViewBundle",
    "SceneIOError",
    "load_view",
    "write_view",
    "generate_scene",
    "read_pfm",
    "write_pfm",
    "read_ppm",
    "write_ppm",
    "read_pgm16",
    "write_pgm16",
    "load_camera",
    "write_camera",
]


class SceneIOError(ValueError):
    """Malformed file, inconsistent dimensions, or invalid raster data."""


@dataclass(frozen=True)
class DepthMap:
    """Continuous per-pixel depth with the valid range of the view."""

    values: np.ndarray  # (H, W) float32
    min_z: float
    max_z: float

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float32)
        if vals.ndim != 2 or vals.size == 0:
            raise SceneIOError("depth map must be a non-empty 2D array")
        if not (self.min_z > 0 and self.max_z > self.min_z):
            raise SceneIOError("depth range must satisfy 0 < min_z < max_z")
        if np.any(vals < self.min_z) or np.any(vals > self.max_z):
            raise SceneIOError("depth values outside [min_z, max_z]")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class ColorImage:
    """8-bit RGB raster."""

    values: np.ndarray  # (H, W, 3) uint8

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.uint8)
        if vals.ndim != 3 or vals.shape[2] != 3 or vals.size == 0:
            raise SceneIOError("color image must be a non-empty (H, W, 3) array")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class ViewBundle:
    color: ColorImage
    depth: DepthMap
    camera: Camera
    view_id: int

    def __post_init__(self):
        if (self.color.height, self.color.width) != (self.depth.height, self.depth.width):
            raise SceneIOError("color and depth dimensions do not match")


@dataclass(frozen=True)
class SceneSpec:
    """Deterministic synthetic scene: textured planar patches seen from a
    horizontal camera rig (middle camera is the reference view)."""

    n_views: int = 3
    width: int = 320
    height: int = 240
    baseline: float = 0.2
    plane_count: int = 5
    rng_seed: int = 0
    noise_sigma: float = 0.0

    def __post_init__(self):
        if self.n_views < 1:
            raise SceneIOError("n_views must be >= 1")
        if self.plane_count < 1:
            raise SceneIOError("plane_count must be >= 1")
        if self.width < 1 or self.height < 1:
            raise SceneIOError("image size must be positive")
        if self.noise_sigma < 0:
            raise SceneIOError("noise_sigma must be >= 0")

    @staticmethod
    def from_json(path) -> "SceneSpec":
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        return SceneSpec(**data)

    @property
    def reference_index(self) -> int:
        return self.n_views // 2


# ---------------------------------------------------------------------------
# raster formats


def write_pfm(path, values: np.ndarray) -> None:
    """Little-endian single-channel PFM (scale -1.0), rows stored bottom-up."""
    vals = np.asarray(values, dtype="<f4")
    if vals.ndim != 2 or vals.size == 0:
        raise SceneIOError("PFM payload must be a non-empty 2D array")
    h, w = vals.shape
    with open(path, "wb") as fh:
        fh.write(b"Pf\n")
        fh.write(f"{w} {h}\n".encode("ascii"))
        fh.write(b"-1.0\n")
        fh.write(vals[::-1].tobytes())


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic != b"Pf":
            raise SceneIOError("not a grayscale PFM file")
        dims = fh.readline().split()
        if len(dims) != 2:
            raise SceneIOError("malformed PFM dimension line")
        w, h = int(dims[0]), int(dims[1])
        scale = float(fh.readline().strip())
        endian = "<" if scale < 0 else ">"
        data = np.frombuffer(fh.read(w * h * 4), dtype=endian + "f4")
        if data.size != w * h:
            raise SceneIOError("truncated PFM payload")
    return data.reshape(h, w)[::-1].astype(np.float32)


def write_ppm(path, values: np.ndarray) -> None:
    vals = np.asarray(values, dtype=np.uint8)
    if vals.ndim != 3 or vals.shape[2] != 3 or vals.size == 0:
        raise SceneIOError("PPM payload must be a non-empty (H, W, 3) array")
    h, w = vals.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(vals.tobytes())


def read_ppm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    fields, offset = _pnm_header(data, b"P6", 3)
    w, h, maxval = fields
    if maxval != 255:
        raise SceneIOError("only 8-bit PPM is supported")
    payload = data[offset : offset + w * h * 3]
    if len(payload) != w * h * 3:
        raise SceneIOError("truncated PPM payload")
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w, 3).copy()


def write_pgm16(path, values: np.ndarray) -> None:
    """16-bit big-endian PGM, used for label maps and quantized depth."""
    vals = np.asarray(values)
    if vals.ndim != 2 or vals.size == 0:
        raise SceneIOError("PGM payload must be a non-empty 2D array")
    if np.any(vals < 0) or np.any(vals > 65535):
        raise SceneIOError("PGM16 values must fit in [0, 65535]")
    h, w = vals.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(vals.astype(">u2").tobytes())


def read_pgm16(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    fields, offset = _pnm_header(data, b"P5", 3)
    w, h, maxval = fields
    if maxval != 65535:
        raise SceneIOError("only 16-bit PGM is supported")
    payload = data[offset : offset + w * h * 2]
    if len(payload) != w * h * 2:
        raise SceneIOError("truncated PGM payload")
    return np.frombuffer(payload, dtype=">u2").reshape(h, w).astype(np.uint16)


def _pnm_header(data: bytes, magic: bytes, n_fields: int):
    """Parse a PNM header (magic + n_fields integers, '#' comments allowed)."""
    if not data.startswith(magic):
        raise SceneIOError(f"bad magic, expected {magic.decode()}")
    pos = len(magic)
    fields = []
    while len(fields) < n_fields:
        if pos >= len(data):
            raise SceneIOError("truncated PNM header")
        c = data[pos : pos + 1]
        if c.isspace():
            pos += 1
        elif c == b"#":
            pos = data.index(b"\n", pos) + 1
        elif c.isdigit():
            end = pos
            while end < len(data) and data[end : end + 1].isdigit():
                end += 1
            fields.append(int(data[pos:end]))
            pos = end
        else:
            raise SceneIOError("malformed PNM header")
    if not data[pos : pos + 1].isspace():
        raise SceneIOError("malformed PNM header")
    return fields, pos + 1


# ---------------------------------------------------------------------------
# camera text format


def write_camera(path, camera: Camera, min_z: float, max_z: float) -> None:
    rot = camera.rotation
    lines = [
        " ".join(repr(float(x)) for x in (camera.fx, camera.fy, camera.cx, camera.cy)),
        *(" ".join(repr(float(x)) for x in rot[i]) for i in range(3)),
        " ".join(repr(float(x)) for x in camera.translation),
        f"{float(min_z)!r} {float(max_z)!r}",
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def load_camera(path):
    """Returns (Camera, min_z, max_z)."""
    try:
        rows = [
            [float(tok) for tok in line.split()]
            for line in Path(path).read_text(encoding="ascii").splitlines()
            if line.strip()
        ]
    except (OSError, ValueError) as exc:
        raise SceneIOError(f"malformed camera file {path}: {exc}") from exc
    if len(rows) != 6 or [len(r) for r in rows] != [4, 3, 3, 3, 3, 2]:
        raise SceneIOError(f"malformed camera file {path}")
    fx, fy, cx, cy = rows[0]
    camera = Camera(fx, fy, cx, cy, np.array(rows[1:4]), np.array(rows[4]))
    min_z, max_z = rows[5]
    if not (min_z > 0 and max_z > min_z):
        raise SceneIOError("camera file depth range must satisfy 0 < min_z < max_z")
    return camera, min_z, max_z


# ---------------------------------------------------------------------------
# view bundles


def inverse_depth_codes(values: np.ndarray, min_z: float, max_z: float,
                        levels: int = 65535) -> np.ndarray:
    """Quantize depth to integer codes uniform in inverse depth."""
    inv = 1.0 / np.asarray(values, dtype=np.float64)
    t = (inv - 1.0 / max_z) / (1.0 / min_z - 1.0 / max_z)
    return np.clip(np.round(t * levels), 0, levels).astype(np.uint16)


def depth_from_inverse_codes(codes: np.ndarray, min_z: float, max_z: float,
                             levels: int = 65535) -> np.ndarray:
    inv = codes.astype(np.float64) / levels * (1.0 / min_z - 1.0 / max_z) + 1.0 / max_z
    return (1.0 / inv).astype(np.float32)


def write_view(bundle: ViewBundle, color_path, depth_path, camera_path,
               depth_format: str = "pfm") -> None:
    """Write a view to disk; depth is lossless in the default PFM mode."""
    write_ppm(color_path, bundle.color.values)
    if depth_format == "pfm":
        write_pfm(depth_path, bundle.depth.values)
    elif depth_format == "pgm16":
        codes = inverse_depth_codes(bundle.depth.values, bundle.depth.min_z,
                                    bundle.depth.max_z)
        write_pgm16(depth_path, codes)
    else:
        raise SceneIOError(f"unknown depth format {depth_format!r}")
    write_camera(camera_path, bundle.camera, bundle.depth.min_z, bundle.depth.max_z)


def load_view(color_path, depth_path, camera_path, view_id: int = 0) -> ViewBundle:
    """Load and validate one view; raises SceneIOError on any inconsistency."""
    color = ColorImage(read_ppm(color_path))
    camera, min_z, max_z = load_camera(camera_path)
    depth_path = str(depth_path)
    if depth_path.endswith(".pgm"):
        codes = read_pgm16(depth_path)
        values = depth_from_inverse_codes(codes, min_z, max_z)
        # guard against rounding leaking outside the declared range
        values = np.clip(values, min_z, max_z)
    else:
        values = read_pfm(depth_path)
    depth = DepthMap(values, min_z, max_z)
    return ViewBundle(color, depth, camera, view_id)


# ---------------------------------------------------------------------------
# synthetic scenes


def _scene_patches(spec: SceneSpec, rng: np.random.Generator):
    """Background plane plus randomly tilted rectangular patches.

    Each patch is (center, unit normal, in-plane axes, half-extents, color).
    """
    patches = []
    palette = rng.integers(40, 256, size=(spec.plane_count, 3)).astype(np.uint8)
    # ensure visually distinct colors per patch
    for i in range(1, spec.plane_count):
        while np.array_equal(palette[i], palette[i - 1]):
            palette[i] = rng.integers(40, 256, size=3).astype(np.uint8)

    # patch 0: fronto-parallel background at a far depth, spanning every ray
    back_z = 8.0 + rng.uniform(0.0, 2.0)
    patches.append(
        dict(
            center=np.array([0.0, 0.0, back_z]),
            normal=np.array([0.0, 0.0, 1.0]),
            axes=(np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])),
            half=(np.inf, np.inf),
            color=palette[0],
        )
    )
    for i in range(1, spec.plane_count):
        z = rng.uniform(2.0, 0.9 * back_z)
        center = np.array([rng.uniform(-1.2, 1.2), rng.uniform(-0.9, 0.9), z])
        tilt = rng.uniform(-0.45, 0.45, size=2)
        normal = np.array([tilt[0], tilt[1], 1.0])
        normal /= np.linalg.norm(normal)
        a = np.cross(normal, np.array([0.0, 1.0, 0.0]))
        a /= np.linalg.norm(a)
        b = np.cross(normal, a)
        half = (rng.uniform(0.35, 1.0), rng.uniform(0.3, 0.8))
        patches.append(dict(center=center, normal=normal, axes=(a, b),
                            half=half, color=palette[i]))
    return patches


def _raycast(patches, camera: Camera, width: int, height: int):
    """Nearest patch intersection per pixel: returns (depth, patch index)."""
    from .geometry import pixel_rays

    rays = pixel_rays(camera, width, height)
    center = camera.center
    n_pix = rays.shape[0]
    best_z = np.full(n_pix, np.inf)
    best_idx = np.full(n_pix, -1, dtype=np.int32)
    for idx, patch in enumerate(patches):
        denom = rays @ patch["normal"]
        num = (patch["center"] - center) @ patch["normal"]
        with np.errstate(divide="ignore", invalid="ignore"):
            s = num / denom
        hit = (np.abs(denom) > 1e-12) & (s > 0)
        pts = center + rays * s[:, None]
        rel = pts - patch["center"]
        a, b = patch["axes"]
        ha, hb = patch["half"]
        if np.isfinite(ha):
            hit &= (np.abs(rel @ a) <= ha) & (np.abs(rel @ b) <= hb)
        closer = hit & (s < best_z)
        best_z[closer] = s[closer]
        best_idx[closer] = idx
    return best_z, best_idx


def generate_scene(spec: SceneSpec) -> list[ViewBundle]:
    """Deterministic synthetic multi-view scene (pure function of the spec)."""
    rng = np.random.default_rng(spec.rng_seed)
    patches = _scene_patches(spec, rng)

    f = 0.9 * spec.width
    cx = (spec.width - 1) / 2.0
    cy = (spec.height - 1) / 2.0
    centers = [
        np.array([(i - (spec.n_views - 1) / 2.0) * spec.baseline, 0.0, 0.0])
        for i in range(spec.n_views)
    ]
    cameras = [
        Camera(f, f, cx, cy, np.eye(3), -c) for c in centers
    ]

    # depth range shared by all views, padded for noise
    pad = 4.0 * spec.noise_sigma
    all_z = []
    casts = []
    for cam in cameras:
        z, idx = _raycast(patches, cam, spec.width, spec.height)
        if np.any(idx < 0):
            raise SceneIOError("synthetic scene has uncovered rays")
        casts.append((z, idx))
        all_z.append(z)
    lo = float(min(z.min() for z in all_z))
    hi = float(max(z.max() for z in all_z))
    min_z = max(1e-3, 0.9 * lo - pad)
    max_z = 1.1 * hi + pad

    colors = np.array([p["color"] for p in patches], dtype=np.uint8)
    bundles = []
    for view_id, (cam, (z, idx)) in enumerate(zip(cameras, casts)):
        if spec.noise_sigma > 0:
            z = z + rng.normal(0.0, spec.noise_sigma, size=z.shape)
        z = np.clip(z, min_z, max_z)
        depth = DepthMap(z.reshape(spec.height, spec.width).astype(np.float32),
                         min_z, max_z)
        img = colors[idx].reshape(spec.height, spec.width, 3)
        bundles.append(ViewBundle(ColorImage(img), depth, cam, view_id))
    return bundles
