"""Bit-exact multi-view depth codec.

Encoder pipeline: per-view fused color/depth optimization, projection and
accumulation in the reference view, a joint hierarchy optimized over all
views, back-projection into per-view coding partitions, then serialization:
chain-coded added depth boundaries, active color-boundary bits, a region to
reference-label table, and quantized plane coefficients with INTRA/SKIP
inter-view reuse.

The encoder always simulates the decoder's partition reconstruction and
codes textures against that reconstruction, so decoder output matches the
encoder's internal reconstruction bit for bit.

Container (little-endian): magic "PDMC", u8 version, u8 n_views, u8 ref
index, u8 flags (bit0: color partition in use), u16 n_regs_color, u8 theta /
phi / dist bit widths, u16 width, u16 height, f64 min_z/max_z per view, then
per view four u32-length-prefixed sections (chains, active bits, label
table, texture), each bit-packed MSB-first and byte-aligned.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from enum import IntEnum

import numpy as np

from ._merging import FitPolicy, RegionData, ViewGeometry, fit_region_data
from .bitio import BitReader, BitWriter, DecodeError
from .contours import (
    added_boundaries,
    decode_active_boundaries,
    decode_depth_contours,
    encode_active_boundaries,
    encode_boundary_chains,
    reconstruct_partition,
)
from .geometry import Camera, Plane3D, plane_depths, plane_to_spherical, spherical_to_plane
from .hierarchy import Hierarchy, build_bpt, cut_to_partition, merging_sequence_cut
from .multiview import (
    CodingTarget,
    accumulate,
    backproject_coding_partitions,
    group_label_maps,
    identity_projection,
    multiview_records,
    project_partition,
)
from .partition import (
    Partition,
    adjacent_pairs,
    intersect,
    leaf_color_partition,
    leaf_depth_partition,
    single_region_partition,
)
from .rdopt import (
    RateModel,
    build_records,
    cut_distortion,
    cut_rate,
    opt_lambda,
    tagged_pair_counts,
)
from .scene_io import ColorImage, DepthMap, ViewBundle

MAGIC = b"PDMC"
VERSION = 1
_HEADER = struct.Struct("<4sBBBBHBBBHH")

FLAG_COLOR_PARTITION = 0x01


class CodecError(ValueError):
    pass


class Mode(IntEnum):
    INTRA = 0
    SKIP = 1


@dataclass(frozen=True)
class QuantConfig:
    bits_theta: int = 8
    bits_phi: int = 8
    n_dist: int = 12

    def __post_init__(self):
        if min(self.bits_theta, self.bits_phi, self.n_dist) < 1:
            raise CodecError("quantizer bit widths must be >= 1")
        if max(self.bits_theta, self.bits_phi, self.n_dist) > 30:
            raise CodecError("quantizer bit widths must be <= 30")

    @property
    def plane_bits(self) -> int:
        return self.bits_theta + self.bits_phi + self.n_dist


@dataclass(frozen=True)
class PlaneCode:
    theta_code: int
    phi_code: int
    dist_code: int
    mode: Mode = Mode.INTRA


def quantize_plane(plane: Plane3D, camera: Camera, min_z: float, max_z: float,
                   cfg: QuantConfig) -> PlaneCode:
    """Uniform angular codes plus an inverse-depth code of the camera-plane
    distance; midpoint reconstruction levels throughout."""
    theta, phi, dist = plane_to_spherical(plane, camera)
    tstep = (np.pi / 2) / (1 << cfg.bits_theta)
    pstep = (2 * np.pi) / (1 << cfg.bits_phi)
    tcode = int(np.clip(np.floor(theta / tstep), 0, (1 << cfg.bits_theta) - 1))
    pcode = int(np.clip(np.floor(phi / pstep), 0, (1 << cfg.bits_phi) - 1))
    levels = (1 << cfg.n_dist) - 1
    with np.errstate(divide="ignore"):
        t = (1.0 / dist - 1.0 / max_z) / (1.0 / min_z - 1.0 / max_z)
    if np.isnan(t):
        t = 0.0
    dcode = int(np.clip(np.round(t * levels), 0, levels))
    return PlaneCode(tcode, pcode, dcode, Mode.INTRA)


def dequantize_plane(code: PlaneCode, camera: Camera, min_z: float, max_z: float,
                     cfg: QuantConfig) -> Plane3D:
    """Reconstruction: the distance code feeds the published inverse-depth
    conversion verbatim; angles take their quantizer midpoints."""
    for val, bits in ((code.theta_code, cfg.bits_theta),
                      (code.phi_code, cfg.bits_phi),
                      (code.dist_code, cfg.n_dist)):
        if not 0 <= val < (1 << bits):
            raise CodecError("plane code out of range")
    theta = (code.theta_code + 0.5) * (np.pi / 2) / (1 << cfg.bits_theta)
    phi = (code.phi_code + 0.5) * (2 * np.pi) / (1 << cfg.bits_phi)
    levels = (1 << cfg.n_dist) - 1
    dist = 1.0 / (
        code.dist_code / levels * (1.0 / min_z - 1.0 / max_z) + 1.0 / max_z
    )
    return spherical_to_plane(theta, phi, dist, camera)


def region_fill(plane: Plane3D, flat_idx: np.ndarray, geo: ViewGeometry) -> np.ndarray:
    """Decoded depth of a region: plane projected along the pixel rays,
    misses pinned at max_z, everything clamped into the declared range."""
    vals = plane_depths(plane, geo.rays[flat_idx], geo.center, missing=geo.max_z)
    return np.clip(vals, geo.min_z, geo.max_z)


def reconstruction_sse(plane: Plane3D, flat_idx: np.ndarray, geo: ViewGeometry) -> float:
    diff = region_fill(plane, flat_idx, geo) - geo.depth_flat[flat_idx]
    return float(diff @ diff)


def _best_intra_plane(flat_idx: np.ndarray, geo: ViewGeometry,
                      policy: FitPolicy, cfg: QuantConfig) -> Plane3D:
    """Encoder-side INTRA candidate: the policy fit, unless the plain
    fronto-parallel fallback codes better after quantization (near-degenerate
    sliver fits tend to land on planes the quantizer cannot represent)."""
    from ._merging import fallback_plane

    data = RegionData.for_pixels(flat_idx, geo)
    fit = fit_region_data(data, policy, geo.camera)
    fallback = fallback_plane(geo.camera, data.depths)
    best = None
    best_sse = np.inf
    for cand in (fit, fallback):
        code = quantize_plane(cand, geo.camera, geo.min_z, geo.max_z, cfg)
        rec = dequantize_plane(code, geo.camera, geo.min_z, geo.max_z, cfg)
        sse = reconstruction_sse(rec, flat_idx, geo)
        if sse < best_sse:
            best, best_sse = cand, sse
    return best


def choose_mode(flat_idx: np.ndarray, geo: ViewGeometry, intra_plane: Plane3D,
                predicted_plane: Plane3D | None, camera: Camera,
                cfg: QuantConfig):
    """INTRA vs SKIP for one region: compare reconstruction errors of the
    dequantized intra plane and the predicted plane; ties take the cheaper
    SKIP.  Returns (mode, code or None, effective plane)."""
    code = quantize_plane(intra_plane, camera, geo.min_z, geo.max_z, cfg)
    intra_rec = dequantize_plane(code, camera, geo.min_z, geo.max_z, cfg)
    if predicted_plane is None:
        return Mode.INTRA, code, intra_rec
    sse_intra = reconstruction_sse(intra_rec, flat_idx, geo)
    sse_pred = reconstruction_sse(predicted_plane, flat_idx, geo)
    if sse_pred <= sse_intra:
        return Mode.SKIP, None, predicted_plane
    return Mode.INTRA, code, intra_rec


# ---------------------------------------------------------------------------
# configuration and pipeline state


@dataclass(frozen=True)
class EncoderConfig:
    n_regs_color: int = 300
    n_regs_depth: int = 300
    depth_seed_cell: int = 8
    quant: QuantConfig = field(default_factory=QuantConfig)
    rate_model: RateModel | None = None
    rng_seed: int = 0
    ransac_min_px: int = 200
    refit_iterations: int = 16
    ransac_score_cap: int = 1024
    partition_mode: str = "color_plus_depth"

    def __post_init__(self):
        if self.partition_mode not in ("color_plus_depth", "color_only", "depth_only"):
            raise CodecError(f"unknown partition mode {self.partition_mode!r}")

    @property
    def uses_color(self) -> bool:
        return self.partition_mode != "depth_only"

    def model(self) -> RateModel:
        if self.rate_model is not None:
            return self.rate_model
        return RateModel(c_a=1.2, c_a_color=0.0, r_t=float(self.quant.plane_bits + 1))

    def policy(self, min_z: float, max_z: float) -> FitPolicy:
        return FitPolicy.default(
            min_z, max_z,
            rng_seed=self.rng_seed,
            refit_iterations=self.refit_iterations,
            ransac_min_px=self.ransac_min_px,
            score_cap=self.ransac_score_cap,
        )


@dataclass
class ViewContext:
    """Lambda-independent per-view preparation (cache it across sweeps)."""

    bundle: ViewBundle
    geo: ViewGeometry
    lp_color: Partition   # partition the codec signals against
    p_cd: Partition
    h_cd: Hierarchy
    records_cd: object


def prepare_view(bundle: ViewBundle, cfg: EncoderConfig,
                 lp_depth_override: Partition | None = None) -> ViewContext:
    geo = ViewGeometry.for_view(bundle.depth, bundle.camera)
    policy = cfg.policy(bundle.depth.min_z, bundle.depth.max_z)
    if cfg.uses_color:
        lp_color = leaf_color_partition(bundle.color, cfg.n_regs_color)
    else:
        lp_color = single_region_partition(bundle.depth.height, bundle.depth.width)
    if cfg.partition_mode == "color_only":
        p_cd = lp_color
    else:
        if lp_depth_override is not None:
            lp_depth = lp_depth_override
        else:
            lp_depth = leaf_depth_partition(bundle.depth, bundle.camera,
                                            cfg.n_regs_depth,
                                            cell=cfg.depth_seed_cell)
        p_cd = lp_depth if cfg.partition_mode == "depth_only" else intersect(lp_color, lp_depth)
    h_cd = build_bpt(p_cd, bundle.depth, bundle.camera, policy=policy)
    color_labels = lp_color.labels if cfg.uses_color else None
    counts = tagged_pair_counts(p_cd.labels, color_labels)
    records = build_records(h_cd, [counts], cfg.model())
    return ViewContext(bundle=bundle, geo=geo, lp_color=lp_color,
                       p_cd=p_cd, h_cd=h_cd, records_cd=records)


# ---------------------------------------------------------------------------
# encoding


@dataclass
class ViewCoding:
    """Everything the encoder committed for one view (equals decoder state)."""

    partition: Partition
    region_ref_label: np.ndarray
    region_occluded: np.ndarray
    region_modes: np.ndarray
    region_planes: list
    depth: DepthMap
    sections: dict
    texture_bits: int
    chain_elements: int


@dataclass
class EncodeResult:
    data: bytes
    views: list
    lam: float
    cut: np.ndarray
    p_ref: Partition
    model_rate: float
    model_distortion: float
    header_bytes: int

    @property
    def total_bits(self) -> int:
        return 8 * len(self.data)


def _majority_codes(part: Partition, ideal_codes: np.ndarray) -> np.ndarray:
    """Per reconstructed region, the most frequent ideal code (ties to the
    smallest code) -- regions the reconstruction merged or split still get a
    single well-defined reference identity."""
    flat_part = part.labels.ravel()
    flat_codes = ideal_codes.ravel()
    out = np.empty(part.n_regions, np.int64)
    order = np.argsort(flat_part, kind="stable")
    bounds = np.searchsorted(flat_part[order], np.arange(part.n_regions + 1))
    for r in range(part.n_regions):
        codes = flat_codes[order[bounds[r]:bounds[r + 1]]]
        out[r] = np.bincount(codes).argmax()
    return out


def _texture_order(ref_labels: np.ndarray, occluded: np.ndarray) -> list:
    """Texture section region order: reference label ascending, occluded
    regions after, region id breaking ties."""
    keys = [
        (1, 0, int(r)) if occluded[r] else (0, int(ref_labels[r]), int(r))
        for r in range(len(ref_labels))
    ]
    return sorted(range(len(ref_labels)), key=lambda r: keys[r])


def _encode_view_payload(ctx: ViewContext, target: CodingTarget, n_ref: int,
                         plane_dict: dict, cfg: EncoderConfig):
    """Partition + texture payload of one view; returns (sections, ViewCoding)."""
    geo = ctx.geo
    active_writer = BitWriter()
    active_writer.write_bits(len(adjacent_pairs(ctx.lp_color)), 32)
    encode_active_boundaries(target.partition, ctx.lp_color, active_writer)
    active_bytes = active_writer.getvalue()
    reader = BitReader(active_bytes)
    reader.read_bits(32)
    group = decode_active_boundaries(reader, ctx.lp_color)

    # Chain-code every coding boundary the merged color map would bridge.
    # This is a superset of "boundaries absent from the color partition":
    # color boundaries whose own pair was merged elsewhere must be resent,
    # or the reconstruction would leak across them.
    merged = group[ctx.lp_color.labels]
    pl = target.partition.labels
    from .partition import BoundarySet

    chains = BoundarySet(
        (pl[:, :-1] != pl[:, 1:]) & (merged[:, :-1] == merged[:, 1:]),
        (pl[:-1, :] != pl[1:, :]) & (merged[:-1, :] == merged[1:, :]),
    )
    chain_bytes = encode_boundary_chains(chains)

    # simulate the decoder: merge inactive color pairs, add chains, split
    recon = reconstruct_partition(ctx.lp_color, group, chains)

    codes = _majority_codes(recon, target.ideal_codes)
    occluded = codes >= n_ref
    ref_labels = np.where(occluded, -1, codes)

    table_writer = BitWriter()
    table_writer.write_varint(recon.n_regions)
    for r in range(recon.n_regions):
        table_writer.write_bit(1 if occluded[r] else 0)
        if not occluded[r]:
            table_writer.write_varint(int(ref_labels[r]))
    table_bytes = table_writer.getvalue()

    policy = cfg.policy(geo.min_z, geo.max_z)
    order = _texture_order(ref_labels, occluded)
    pixel_lists = recon.region_pixel_lists()
    tex_writer = BitWriter()
    modes = np.zeros(recon.n_regions, np.int8)
    planes: list = [None] * recon.n_regions
    commits = {}
    for r in order:
        idx = pixel_lists[r]
        intra_plane = _best_intra_plane(idx, geo, policy, cfg.quant)
        predicted = None
        if not occluded[r]:
            predicted = plane_dict.get(int(ref_labels[r]))
        mode, code, plane = choose_mode(idx, geo, intra_plane, predicted,
                                        geo.camera, cfg.quant)
        modes[r] = int(mode)
        planes[r] = plane
        tex_writer.write_bit(int(mode))
        if mode == Mode.INTRA:
            tex_writer.write_bits(code.theta_code, cfg.quant.bits_theta)
            tex_writer.write_bits(code.phi_code, cfg.quant.bits_phi)
            tex_writer.write_bits(code.dist_code, cfg.quant.n_dist)
        if not occluded[r]:
            commits.setdefault(int(ref_labels[r]), plane)
    texture_bits = tex_writer.bit_length
    tex_bytes = tex_writer.getvalue()
    for label, plane in commits.items():
        plane_dict.setdefault(label, plane)

    values = np.empty(geo.height * geo.width, np.float64)
    for r in range(recon.n_regions):
        idx = pixel_lists[r]
        values[idx] = region_fill(planes[r], idx, geo)
    depth = DepthMap(values.reshape(geo.height, geo.width).astype(np.float32),
                     geo.min_z, geo.max_z)

    sections = {
        "partition": len(chain_bytes),
        "active": len(active_bytes),
        "table": len(table_bytes),
        "texture": len(tex_bytes),
    }
    coding = ViewCoding(
        partition=recon,
        region_ref_label=ref_labels,
        region_occluded=occluded,
        region_modes=modes,
        region_planes=planes,
        depth=depth,
        sections=sections,
        texture_bits=texture_bits,
        chain_elements=chains.count,
    )
    return (chain_bytes, active_bytes, table_bytes, tex_bytes), coding


def encode(views: list[ViewBundle], lam: float | None = None,
           budget_bits: float | None = None,
           cfg: EncoderConfig | None = None,
           ref_index: int | None = None,
           ref_bundle: ViewBundle | None = None,
           k_regions: int | None = None,
           single_view_path: bool = False,
           contexts: list[ViewContext] | None = None) -> EncodeResult:
    """Encode depth maps of all views into one bitstream.

    Exactly one of `lam`, `budget_bits`, `k_regions` selects the operating
    point.  `ref_bundle` (or `ref_index`, default the middle view) fixes the
    reference viewpoint; it does not have to be among the coded views.
    `single_view_path` replaces the projection stage by the identity and is
    only valid for one view.  `contexts` may carry cached `prepare_view`
    results for the same bundles.
    """
    cfg = cfg or EncoderConfig()
    if not views:
        raise CodecError("need at least one view")
    dims = {(v.depth.height, v.depth.width) for v in views}
    if len(dims) != 1:
        raise CodecError("views disagree on raster dimensions")
    if single_view_path and len(views) != 1:
        raise CodecError("single-view path takes exactly one view")
    if sum(x is not None for x in (lam, budget_bits, k_regions)) != 1:
        raise CodecError("pass exactly one of lam, budget_bits, k_regions")

    if ref_bundle is None:
        ref_bundle = views[ref_index if ref_index is not None else len(views) // 2]
    if budget_bits is not None:
        return _encode_budget(views, budget_bits, cfg, ref_bundle, contexts,
                              single_view_path)

    if contexts is None:
        contexts = [prepare_view(v, cfg) for v in views]
    return _encode_at(views, contexts, lam, cfg, ref_bundle, k_regions,
                      single_view_path)


def _encode_at(views, contexts, lam, cfg, ref_bundle, k_regions,
               single_view_path) -> EncodeResult:
    stage1_lam = lam if lam is not None else 0.0
    cuts = [opt_lambda(ctx.h_cd, ctx.records_cd, stage1_lam) for ctx in contexts]
    partitions = [cut_to_partition(ctx.h_cd, cut) for ctx, cut in zip(contexts, cuts)]

    if single_view_path:
        projected = [identity_projection(partitions[0])]
    else:
        projected = [
            project_partition(part, ctx.bundle.depth, ctx.bundle.camera,
                              ref_bundle.camera)
            for part, ctx in zip(partitions, contexts)
        ]
    p_ref_ini = accumulate(projected)

    ref_policy = cfg.policy(ref_bundle.depth.min_z, ref_bundle.depth.max_z)
    h_ref = build_bpt(p_ref_ini, ref_bundle.depth, ref_bundle.camera,
                      policy=ref_policy)
    group_maps = group_label_maps(p_ref_ini, projected)
    color_labels = [
        ctx.lp_color.labels if cfg.uses_color else None for ctx in contexts
    ]
    mv_records, _ = multiview_records(
        h_ref, [ctx.geo for ctx in contexts], group_maps, color_labels,
        cfg.model(), ref_policy, ref_camera=ref_bundle.camera,
    )

    if k_regions is not None:
        cut = merging_sequence_cut(h_ref, min(k_regions, h_ref.n_leaves))
        used_lam = 0.0
    else:
        cut = opt_lambda(h_ref, mv_records, lam)
        used_lam = lam
    p_ref = cut_to_partition(h_ref, cut)
    targets = backproject_coding_partitions(p_ref, projected)

    plane_dict: dict = {}
    codings = []
    payloads = []
    for ctx, target in zip(contexts, targets):
        view_commits: dict = dict(plane_dict)
        sections, coding = _encode_view_payload(ctx, target, p_ref.n_regions,
                                                view_commits, cfg)
        plane_dict = view_commits
        codings.append(coding)
        payloads.append(sections)

    header = _HEADER.pack(
        MAGIC, VERSION, len(views),
        next((i for i, v in enumerate(views) if v is ref_bundle), 0xFF),
        FLAG_COLOR_PARTITION if cfg.uses_color else 0,
        cfg.n_regs_color,
        cfg.quant.bits_theta, cfg.quant.bits_phi, cfg.quant.n_dist,
        views[0].depth.width, views[0].depth.height,
    )
    blob = bytearray(header)
    for v in views:
        blob += struct.pack("<dd", v.depth.min_z, v.depth.max_z)
    header_bytes = len(blob)
    for sections in payloads:
        for part in sections:
            blob += struct.pack("<I", len(part))
            blob += part

    return EncodeResult(
        data=bytes(blob),
        views=codings,
        lam=used_lam,
        cut=cut,
        p_ref=p_ref,
        model_rate=cut_rate(mv_records, cut),
        model_distortion=cut_distortion(mv_records, cut),
        header_bytes=header_bytes,
    )


def _encode_budget(views, budget_bits, cfg, ref_bundle, contexts,
                   single_view_path) -> EncodeResult:
    """Outer bisection on lambda against the optimizer's model rate."""
    if contexts is None:
        contexts = [prepare_view(v, cfg) for v in views]

    def run(lam):
        return _encode_at(views, contexts, lam, cfg, ref_bundle, None,
                          single_view_path)

    res0 = run(0.0)
    if res0.model_rate <= budget_bits:
        return res0
    lo, hi = 0.0, 1.0
    res_hi = run(hi)
    steps = 0
    while res_hi.model_rate > budget_bits:
        lo, hi = hi, hi * 2.0
        res_hi = run(hi)
        steps += 1
        if steps >= 16:
            raise CodecError("budget below the reachable model rate")
    for _ in range(8):
        mid = 0.5 * (lo + hi)
        res_mid = run(mid)
        if res_mid.model_rate <= budget_bits:
            hi, res_hi = mid, res_mid
        else:
            lo = mid
    return res_hi


def encode_single_view(view: ViewBundle, lam: float | None = None,
                       budget_bits: float | None = None,
                       cfg: EncoderConfig | None = None,
                       k_regions: int | None = None,
                       contexts: list[ViewContext] | None = None) -> EncodeResult:
    """Independent coding of one view (no camera projection involved)."""
    return encode([view], lam=lam, budget_bits=budget_bits, cfg=cfg,
                  k_regions=k_regions, single_view_path=True,
                  contexts=contexts)


# ---------------------------------------------------------------------------
# decoding


@dataclass
class StreamHeader:
    n_views: int
    ref_index: int
    flags: int
    n_regs_color: int
    quant: QuantConfig
    width: int
    height: int
    depth_ranges: list
    header_bytes: int


def parse_header(data: bytes) -> StreamHeader:
    if len(data) < _HEADER.size:
        raise DecodeError("stream shorter than the fixed header")
    magic, version, n_views, ref_idx, flags, n_regs, bt, bp, nd, w, h = \
        _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise DecodeError("bad magic")
    if version != VERSION:
        raise DecodeError(f"unsupported version {version}")
    if n_views < 1 or w < 1 or h < 1:
        raise DecodeError("malformed header")
    pos = _HEADER.size
    ranges = []
    for _ in range(n_views):
        if pos + 16 > len(data):
            raise DecodeError("truncated depth-range table")
        min_z, max_z = struct.unpack_from("<dd", data, pos)
        if not (min_z > 0 and max_z > min_z):
            raise DecodeError("invalid depth range in header")
        ranges.append((min_z, max_z))
        pos += 16
    return StreamHeader(n_views=n_views, ref_index=ref_idx, flags=flags,
                        n_regs_color=n_regs,
                        quant=QuantConfig(bt, bp, nd), width=w, height=h,
                        depth_ranges=ranges, header_bytes=pos)


def split_sections(data: bytes):
    """Header plus the per-view list of (chains, active, table, texture)."""
    header = parse_header(data)
    pos = header.header_bytes
    sections = []
    for _ in range(header.n_views):
        view_sections = []
        for _ in range(4):
            if pos + 4 > len(data):
                raise DecodeError("truncated section table")
            (length,) = struct.unpack_from("<I", data, pos)
            pos += 4
            if pos + length > len(data):
                raise DecodeError("truncated section payload")
            view_sections.append(data[pos:pos + length])
            pos += length
        sections.append(tuple(view_sections))
    if pos != len(data):
        raise DecodeError("trailing bytes after the last section")
    return header, sections


@dataclass
class DecodeResult:
    depths: list
    partitions: list
    region_ref_label: list
    region_occluded: list
    region_modes: list
    region_planes: list
    header: StreamHeader


def decode_full(data: bytes, colors: list[ColorImage],
                cameras: list[Camera]) -> DecodeResult:
    header, sections = split_sections(data)
    if len(colors) != header.n_views or len(cameras) != header.n_views:
        raise DecodeError("stream expects a different number of views")

    plane_dict: dict = {}
    depths = []
    parts = []
    ref_labels_all = []
    occluded_all = []
    modes_all = []
    planes_all = []
    for v in range(header.n_views):
        chain_bytes, active_bytes, table_bytes, tex_bytes = sections[v]
        color = colors[v]
        if (color.height, color.width) != (header.height, header.width):
            raise DecodeError("color image does not match the stream raster")
        if header.flags & FLAG_COLOR_PARTITION:
            lp_color = leaf_color_partition(color, header.n_regs_color)
        else:
            lp_color = single_region_partition(header.height, header.width)

        chains = decode_depth_contours(chain_bytes, header.height, header.width)
        reader = BitReader(active_bytes)
        n_pairs = reader.read_bits(32)
        if n_pairs != len(adjacent_pairs(lp_color)):
            raise DecodeError("color partition disagrees with the stream")
        group = decode_active_boundaries(reader, lp_color)
        recon = reconstruct_partition(lp_color, group, chains)

        treader = BitReader(table_bytes)
        n_regions = treader.read_varint()
        if n_regions != recon.n_regions:
            raise DecodeError("region count disagrees with the partition")
        occluded = np.zeros(n_regions, bool)
        ref_labels = np.full(n_regions, -1, np.int64)
        for r in range(n_regions):
            occluded[r] = bool(treader.read_bit())
            if not occluded[r]:
                ref_labels[r] = treader.read_varint()

        min_z, max_z = header.depth_ranges[v]
        geo = _decode_geometry(cameras[v], header.width, header.height, min_z, max_z)
        xreader = BitReader(tex_bytes)
        modes = np.zeros(n_regions, np.int8)
        planes: list = [None] * n_regions
        commits: dict = {}
        for r in _texture_order(ref_labels, occluded):
            mode = Mode(xreader.read_bit())
            modes[r] = int(mode)
            if mode == Mode.INTRA:
                code = PlaneCode(
                    xreader.read_bits(header.quant.bits_theta),
                    xreader.read_bits(header.quant.bits_phi),
                    xreader.read_bits(header.quant.n_dist),
                )
                plane = dequantize_plane(code, cameras[v], min_z, max_z,
                                         header.quant)
            else:
                if occluded[r] or int(ref_labels[r]) not in plane_dict:
                    raise DecodeError("SKIP without a previously coded plane")
                plane = plane_dict[int(ref_labels[r])]
            planes[r] = plane
            if not occluded[r]:
                commits.setdefault(int(ref_labels[r]), plane)
        for label, plane in commits.items():
            plane_dict.setdefault(label, plane)

        values = np.empty(header.height * header.width, np.float64)
        pixel_lists = recon.region_pixel_lists()
        for r in range(n_regions):
            idx = pixel_lists[r]
            values[idx] = region_fill(planes[r], idx, geo)
        depths.append(DepthMap(
            values.reshape(header.height, header.width).astype(np.float32),
            min_z, max_z,
        ))
        parts.append(recon)
        ref_labels_all.append(ref_labels)
        occluded_all.append(occluded)
        modes_all.append(modes)
        planes_all.append(planes)

    return DecodeResult(depths=depths, partitions=parts,
                        region_ref_label=ref_labels_all,
                        region_occluded=occluded_all, region_modes=modes_all,
                        region_planes=planes_all, header=header)


def _decode_geometry(camera: Camera, width: int, height: int,
                     min_z: float, max_z: float) -> ViewGeometry:
    from .geometry import pixel_rays

    return ViewGeometry(
        rays=pixel_rays(camera, width, height),
        center=camera.center,
        depth_flat=np.zeros(width * height),
        min_z=min_z,
        max_z=max_z,
        camera=camera,
        width=width,
        height=height,
    )


def decode(data: bytes, colors: list[ColorImage],
           cameras: list[Camera]) -> list[DepthMap]:
    """Decode the depth maps of all views from a bitstream."""
    return decode_full(data, colors, cameras).depths
