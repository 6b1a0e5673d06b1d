"""Rate-distortion sweep harness: encode/decode at a grid of operating
points, measure true stream rates and depth PSNR, emit CSV and SVG charts.

Sweep modes:
  single_view            each view coded independently (no projection)
  color_only / depth_only / color_plus_depth
                         single-view coding with the given leaf partitions
  mv_1view / mv_2views / mv_3views
                         joint coding of {ref}, {left, right}, {all three}
                         with the optimization anchored in the middle view
  merging_sequence_baseline
                         multiview path, cuts taken along the merging
                         sequence instead of the Lagrangian optimum
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

from .codec import (
    EncodeResult,
    EncoderConfig,
    encode,
    encode_single_view,
    prepare_view,
    split_sections,
)
from .metrics import RdCurve, RdPoint, psnr

SWEEP_MODES = (
    "single_view",
    "color_only",
    "depth_only",
    "color_plus_depth",
    "mv_1view",
    "mv_2views",
    "mv_3views",
    "merging_sequence_baseline",
)


class SweepError(ValueError):
    pass


def rate_breakdown(data: bytes) -> dict:
    """Byte counts per stream section; they add up to the stream length.

    The per-region reference-label table travels with the texture metadata,
    so the three-way report folds it into 'texture' and also lists it apart.
    """
    header, sections = split_sections(data)
    views = []
    for chains, active, table, texture in sections:
        views.append({
            "partition": len(chains) + 4,
            "active": len(active) + 4,
            "table": len(table) + 4,
            "texture": len(texture) + 4,
        })
    report = {
        "header": header.header_bytes,
        "views": views,
        "total": len(data),
    }
    assert report["header"] + sum(sum(v.values()) for v in views) == len(data)
    return report


def _point_from_result(res: EncodeResult, originals, mode: str) -> RdPoint:
    vals = [psnr(o.depth, vc.depth) for o, vc in zip(originals, res.views)]
    finite = [v for v in vals if math.isfinite(v)]
    avg = sum(finite) / len(finite) if finite else math.inf
    sections = {"partition": 0, "active": 0, "table": 0, "texture": 0}
    for vc in res.views:
        for key in sections:
            sections[key] += vc.sections[key]
    err = 0.0
    n = 0
    for o, vc in zip(originals, res.views):
        diff = (o.depth.values.astype(float) - vc.depth.values.astype(float)).ravel()
        err += float(diff @ diff)
        n += diff.size
    return RdPoint(
        rate_bits=8 * len(res.data),
        psnr_db=avg,
        lam=res.lam,
        n_regions=res.p_ref.n_regions,
        sections=sections,
        mse=err / n,
    )


def _combine_single_view(results, originals) -> RdPoint:
    rate = sum(8 * len(r.data) for r in results)
    vals = [psnr(o.depth, r.views[0].depth) for o, r in zip(originals, results)]
    finite = [v for v in vals if math.isfinite(v)]
    sections = {"partition": 0, "active": 0, "table": 0, "texture": 0}
    err = 0.0
    n = 0
    for o, r in zip(originals, results):
        for key in sections:
            sections[key] += r.views[0].sections[key]
        diff = (o.depth.values.astype(float)
                - r.views[0].depth.values.astype(float)).ravel()
        err += float(diff @ diff)
        n += diff.size
    return RdPoint(
        rate_bits=rate,
        psnr_db=sum(finite) / len(finite) if finite else math.inf,
        lam=results[0].lam,
        n_regions=sum(r.p_ref.n_regions for r in results),
        sections=sections,
        mse=err / n,
    )


def rd_sweep(views, lambdas=None, budgets=None, mode: str = "mv_3views",
             cfg: EncoderConfig | None = None, ref_index: int | None = None,
             k_grid=None, threads: int = 1) -> RdCurve:
    """Sweep operating points and return the measured RD curve."""
    if mode not in SWEEP_MODES:
        raise SweepError(f"unknown sweep mode {mode!r}")
    cfg = cfg or EncoderConfig()
    if mode in ("color_only", "depth_only", "color_plus_depth"):
        cfg = replace(cfg, partition_mode=mode)
    ref_index = ref_index if ref_index is not None else len(views) // 2

    if mode == "mv_1view":
        coded = [views[ref_index]]
    elif mode == "mv_2views":
        if len(views) < 3:
            raise SweepError("mv_2views needs three views")
        coded = [v for i, v in enumerate(views) if i != ref_index]
    else:
        coded = list(views)
    ref_bundle = views[ref_index]

    single = mode in ("single_view", "color_only", "depth_only", "color_plus_depth")
    contexts = [prepare_view(v, cfg) for v in coded]

    if mode == "merging_sequence_baseline":
        if k_grid is None:
            raise SweepError("merging_sequence_baseline needs k_grid")
        jobs = [("k", k) for k in k_grid]
    elif budgets is not None:
        jobs = [("budget", b) for b in budgets]
    elif lambdas is not None:
        jobs = [("lam", lam) for lam in lambdas]
    else:
        raise SweepError("provide lambdas, budgets, or k_grid")

    def run(job) -> RdPoint:
        kind, value = job
        kw = {kind if kind != "k" else "k_regions": value}
        if kind == "lam":
            kw = {"lam": value}
        elif kind == "budget":
            kw = {"budget_bits": value}
        if single:
            results = [
                encode_single_view(v, cfg=cfg, contexts=[ctx], **kw)
                for v, ctx in zip(coded, contexts)
            ]
            return _combine_single_view(results, coded)
        res = encode(coded, cfg=cfg, ref_bundle=ref_bundle,
                     contexts=contexts, **kw)
        return _point_from_result(res, coded, mode)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            points = list(pool.map(run, jobs))
    else:
        points = [run(job) for job in jobs]
    return RdCurve.from_points(points)


# ---------------------------------------------------------------------------
# CSV / SVG emission


CSV_HEADER = ("mode,lambda,rate_bits,psnr_db,n_regions,"
              "section_partition,section_active,section_texture")


def curve_to_csv(curve: RdCurve, mode: str) -> str:
    """CSV rows per the published schema; the reference-label table bytes
    count toward the texture section."""
    lines = [CSV_HEADER]
    for p in curve.points:
        texture = p.sections.get("texture", 0) + p.sections.get("table", 0)
        lines.append(
            f"{mode},{p.lam:g},{p.rate_bits:g},{p.psnr_db:.6f},{p.n_regions},"
            f"{p.sections.get('partition', 0)},{p.sections.get('active', 0)},"
            f"{texture}"
        )
    return "\n".join(lines) + "\n"


def write_csv(path, curves: dict) -> None:
    lines = [CSV_HEADER]
    for mode, curve in curves.items():
        lines.extend(curve_to_csv(curve, mode).splitlines()[1:])
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv_curve(path, mode: str | None = None) -> RdCurve:
    points = []
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip().split(",")
        idx = {name: i for i, name in enumerate(header)}
        for line in fh:
            cells = line.strip().split(",")
            if not line.strip():
                continue
            if mode is not None and cells[idx["mode"]] != mode:
                continue
            points.append(RdPoint(
                rate_bits=float(cells[idx["rate_bits"]]),
                psnr_db=float(cells[idx["psnr_db"]]),
                lam=float(cells[idx["lambda"]]),
                n_regions=int(cells[idx["n_regions"]]),
            ))
    if not points:
        raise SweepError(f"no RD points found in {path}")
    return RdCurve.from_points(points)


_SVG_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
               "#8c564b", "#e377c2")


def write_svg(path, curves: dict, width: int = 640, height: int = 440) -> None:
    """Static line chart of PSNR (dB) over rate (bits)."""
    pts = [
        (p.rate_bits, p.psnr_db)
        for curve in curves.values()
        for p in curve.points
        if math.isfinite(p.psnr_db)
    ]
    if not pts:
        raise SweepError("nothing to plot")
    x0 = min(p[0] for p in pts)
    x1 = max(p[0] for p in pts)
    y0 = min(p[1] for p in pts)
    y1 = max(p[1] for p in pts)
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1
    mx, my, mt = 64, 40, 24

    def sx(x):
        return mx + (x - x0) / (x1 - x0) * (width - mx - 20)

    def sy(y):
        return height - my - (y - y0) / (y1 - y0) * (height - my - mt)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{mx}" y1="{height - my}" x2="{width - 20}" y2="{height - my}" stroke="black"/>',
        f'<line x1="{mx}" y1="{mt}" x2="{mx}" y2="{height - my}" stroke="black"/>',
        f'<text x="{(mx + width) / 2}" y="{height - 8}" font-size="12" text-anchor="middle">rate [bits]</text>',
        f'<text x="14" y="{height / 2}" font-size="12" transform="rotate(-90 14 {height / 2})" text-anchor="middle">PSNR [dB]</text>',
    ]
    for i, (xv, yv) in enumerate(((x0, y0), (x1, y1))):
        parts.append(f'<text x="{sx(xv):.1f}" y="{height - my + 14}" font-size="10" text-anchor="middle">{xv:.0f}</text>')
        parts.append(f'<text x="{mx - 6}" y="{sy(yv):.1f}" font-size="10" text-anchor="end">{yv:.1f}</text>')
    for k, (mode, curve) in enumerate(curves.items()):
        color = _SVG_COLORS[k % len(_SVG_COLORS)]
        coords = " ".join(
            f"{sx(p.rate_bits):.1f},{sy(p.psnr_db):.1f}"
            for p in curve.points if math.isfinite(p.psnr_db)
        )
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for p in curve.points:
            if math.isfinite(p.psnr_db):
                parts.append(f'<circle cx="{sx(p.rate_bits):.1f}" cy="{sy(p.psnr_db):.1f}" r="2.5" fill="{color}"/>')
        parts.append(f'<text x="{width - 24}" y="{mt + 14 * k}" font-size="11" text-anchor="end" fill="{color}">{mode}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(parts) + "\n")
