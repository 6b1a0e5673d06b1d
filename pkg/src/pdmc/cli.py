"""Command-line entry points: scene generation, encoding, decoding, RD
sweeps, Bjontegaard comparison, stream breakdown, and view rendering.

View descriptor files (YAML or JSON) list the raster/camera paths of one
view:  color: v0.ppm / depth: v0.pfm / camera: v0_cam.txt
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import codec, metrics, render, scene_io, sweep
from .partition import load_label_map


def _load_view_list(spec: str, base: Path | None = None):
    import yaml

    bundles = []
    for i, name in enumerate(spec.split(",")):
        path = Path(name)
        with open(path, "r", encoding="utf-8") as fh:
            desc = yaml.safe_load(fh)
        root = path.parent
        bundles.append(scene_io.load_view(
            root / desc["color"], root / desc["depth"], root / desc["camera"],
            view_id=i,
        ))
    return bundles


def _encoder_config(args) -> codec.EncoderConfig:
    cfg = codec.EncoderConfig()
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            overrides = json.load(fh)
        quant = overrides.pop("quant", None)
        cfg = replace(cfg, **overrides)
        if quant:
            cfg = replace(cfg, quant=codec.QuantConfig(**quant))
    for key in ("n_regs_color", "n_regs_depth"):
        val = getattr(args, key.replace("_", "-").replace("-", "_"), None)
        if val is not None:
            cfg = replace(cfg, **{key: val})
    if getattr(args, "partition_mode", None):
        cfg = replace(cfg, partition_mode=args.partition_mode)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, rng_seed=args.seed)
    return cfg


def _cmd_gen_scene(args) -> int:
    if args.spec:
        spec = scene_io.SceneSpec.from_json(args.spec)
    else:
        spec = scene_io.SceneSpec(
            n_views=args.views, width=args.width, height=args.height,
            baseline=args.baseline, plane_count=args.planes,
            rng_seed=args.seed if args.seed is not None else 0,
            noise_sigma=args.noise,
        )
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    bundles = scene_io.generate_scene(spec)
    for i, b in enumerate(bundles):
        scene_io.write_view(b, out / f"v{i}.ppm", out / f"v{i}.pfm",
                            out / f"v{i}_cam.txt")
        with open(out / f"v{i}.yaml", "w", encoding="utf-8") as fh:
            fh.write(f"color: v{i}.ppm\ndepth: v{i}.pfm\ncamera: v{i}_cam.txt\n")
    print(f"wrote {len(bundles)} views to {out} (reference view "
          f"{spec.reference_index})")
    return 0


def _cmd_encode(args) -> int:
    views = _load_view_list(args.views)
    cfg = _encoder_config(args)
    contexts = None
    if args.leaf_partition:
        overrides = [load_label_map(p) for p in args.leaf_partition.split(",")]
        if len(overrides) != len(views):
            print("need one leaf partition per view", file=sys.stderr)
            return 2
        contexts = [
            codec.prepare_view(v, cfg, lp_depth_override=lp)
            for v, lp in zip(views, overrides)
        ]
    kw = {}
    if args.budget_bits is not None:
        kw["budget_bits"] = args.budget_bits
    else:
        kw["lam"] = args.lambda_ if args.lambda_ is not None else 200.0
    res = codec.encode(views, cfg=cfg, ref_index=args.ref, contexts=contexts,
                       **kw)
    Path(args.output).write_bytes(res.data)
    report = sweep.rate_breakdown(res.data)
    print(f"encoded {len(views)} views: {len(res.data)} bytes "
          f"(lambda={res.lam:g}, {res.p_ref.n_regions} reference regions)")
    print(f"  header {report['header']} B + " + " + ".join(
        f"view{i} {sum(v.values())} B" for i, v in enumerate(report["views"])))
    return 0


def _cmd_decode(args) -> int:
    data = Path(args.stream).read_bytes()
    colors = [scene_io.ColorImage(scene_io.read_ppm(p))
              for p in args.colors.split(",")]
    cameras = [scene_io.load_camera(p)[0] for p in args.cameras.split(",")]
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    depths = codec.decode(data, colors, cameras)
    for i, d in enumerate(depths):
        scene_io.write_pfm(out / f"decoded_v{i}.pfm", d.values)
    print(f"decoded {len(depths)} depth maps into {out}")
    return 0


def _cmd_sweep(args) -> int:
    views = _load_view_list(args.views)
    cfg = _encoder_config(args)
    lambdas = [float(x) for x in args.lambdas.split(",")] if args.lambdas else None
    budgets = [float(x) for x in args.budgets.split(",")] if args.budgets else None
    k_grid = [int(x) for x in args.k_grid.split(",")] if args.k_grid else None
    curves = {}
    for mode in args.modes.split(","):
        curves[mode] = sweep.rd_sweep(
            views, lambdas=lambdas, budgets=budgets, mode=mode, cfg=cfg,
            ref_index=args.ref, k_grid=k_grid, threads=args.threads,
        )
    sweep.write_csv(args.csv, curves)
    print(f"wrote {args.csv}")
    if args.svg:
        sweep.write_svg(args.svg, curves)
        print(f"wrote {args.svg}")
    for mode, curve in curves.items():
        for p in curve.points:
            print(f"  {mode}: lambda={p.lam:g} rate={p.rate_bits:g} bits "
                  f"psnr={p.psnr_db:.2f} dB (peak = depth range)")
    return 0


def _cmd_bd(args) -> int:
    test = sweep.read_csv_curve(args.test, args.test_mode)
    ref = sweep.read_csv_curve(args.reference, args.reference_mode)
    bd_rate, bd_snr = metrics.bd_metrics(test, ref)
    print(f"BD-RATE: {bd_rate:+.2f} %")
    print(f"BD-SNR:  {bd_snr:+.3f} dB")
    return 0


def _cmd_breakdown(args) -> int:
    data = Path(args.stream).read_bytes()
    report = sweep.rate_breakdown(data)
    print(f"total {report['total']} B, header {report['header']} B")
    for i, v in enumerate(report["views"]):
        texture = v["texture"] + v["table"]
        print(f"  view {i}: partition {v['partition']} B, active {v['active']} B, "
              f"texture {texture} B (incl. label table {v['table']} B)")
    return 0


def _cmd_render(args) -> int:
    color = scene_io.ColorImage(scene_io.read_ppm(args.color))
    camera, min_z, max_z = scene_io.load_camera(args.camera)
    depth = scene_io.DepthMap(scene_io.read_pfm(args.depth), min_z, max_z)
    target, _, _ = scene_io.load_camera(args.target)
    img = render.render_virtual_view(color, depth, camera, target)
    scene_io.write_ppm(args.output, img.values)
    print(f"rendered {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pdmc",
                                 description="plane-based multi-view depth codec")
    ap.add_argument("--seed", type=int, default=None, help="global RNG seed")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--config", help="JSON file with encoder config overrides")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-scene", help="generate a synthetic multi-view scene")
    g.add_argument("--spec", help="SceneSpec JSON file")
    g.add_argument("--views", type=int, default=3)
    g.add_argument("--width", type=int, default=320)
    g.add_argument("--height", type=int, default=240)
    g.add_argument("--planes", type=int, default=5)
    g.add_argument("--baseline", type=float, default=0.2)
    g.add_argument("--noise", type=float, default=0.0)
    g.add_argument("-o", "--output", required=True)
    g.set_defaults(func=_cmd_gen_scene)

    e = sub.add_parser("encode", help="encode depth maps of all views")
    e.add_argument("--views", required=True, help="comma list of view YAMLs")
    e.add_argument("--ref", type=int, default=None, help="reference view index")
    e.add_argument("--lambda", dest="lambda_", type=float, default=None)
    e.add_argument("--budget-bits", type=float, default=None)
    e.add_argument("--n-regs-color", dest="n_regs_color", type=int)
    e.add_argument("--n-regs-depth", dest="n_regs_depth", type=int)
    e.add_argument("--partition-mode", dest="partition_mode",
                   choices=("color_plus_depth", "color_only", "depth_only"))
    e.add_argument("--leaf-partition",
                   help="comma list of 16-bit PGM label maps overriding the "
                        "depth leaf partition, one per view")
    e.add_argument("-o", "--output", required=True)
    e.set_defaults(func=_cmd_encode)

    d = sub.add_parser("decode", help="decode a bitstream")
    d.add_argument("stream")
    d.add_argument("--colors", required=True, help="comma list of PPM files")
    d.add_argument("--cameras", required=True, help="comma list of camera files")
    d.add_argument("-o", "--output", required=True)
    d.set_defaults(func=_cmd_decode)

    s = sub.add_parser("sweep", help="rate-distortion sweep")
    s.add_argument("--views", required=True)
    s.add_argument("--ref", type=int, default=None)
    s.add_argument("--lambdas")
    s.add_argument("--budgets")
    s.add_argument("--k-grid", dest="k_grid")
    s.add_argument("--modes", default="mv_3views")
    s.add_argument("--n-regs-color", dest="n_regs_color", type=int)
    s.add_argument("--n-regs-depth", dest="n_regs_depth", type=int)
    s.add_argument("--csv", required=True)
    s.add_argument("--svg")
    s.set_defaults(func=_cmd_sweep)

    b = sub.add_parser("bd", help="Bjontegaard deltas between two CSV curves")
    b.add_argument("--test", required=True)
    b.add_argument("--reference", required=True)
    b.add_argument("--test-mode", dest="test_mode")
    b.add_argument("--reference-mode", dest="reference_mode")
    b.set_defaults(func=_cmd_bd)

    k = sub.add_parser("breakdown", help="per-section byte report of a stream")
    k.add_argument("stream")
    k.set_defaults(func=_cmd_breakdown)

    r = sub.add_parser("render", help="forward-warp a view to a new camera")
    r.add_argument("--color", required=True)
    r.add_argument("--depth", required=True)
    r.add_argument("--camera", required=True)
    r.add_argument("--target", required=True)
    r.add_argument("-o", "--output", required=True)
    r.set_defaults(func=_cmd_render)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
