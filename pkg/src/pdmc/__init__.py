"""pdmc: region-based multi-view depth map codec.

Depth maps of several calibrated views are segmented, fused into one
plane-based hierarchical scene representation, pruned by Lagrangian
rate-distortion optimization, and serialized into a bit-exact stream of
chain-coded contours and quantized plane coefficients.
"""

from .codec import (
    EncodeResult,
    EncoderConfig,
    Mode,
    PlaneCode,
    QuantConfig,
    decode,
    decode_full,
    encode,
    encode_single_view,
)
from .geometry import Camera, Plane3D, RansacConfig
from .hierarchy import Hierarchy, build_bpt, cut_at, cut_to_partition
from .metrics import RdCurve, RdPoint, bd_metrics, psnr
from .multiview import accumulate, backproject_coding_partitions, project_partition
from .partition import (
    Partition,
    connected_components,
    intersect,
    leaf_color_partition,
    leaf_depth_partition,
)
from .rdopt import (
    RateModel,
    RdRecords,
    brute_force_opt,
    build_qsap,
    lambda_search,
    opt_lambda,
)
from .render import render_virtual_view
from .scene_io import (
    ColorImage,
    DepthMap,
    SceneSpec,
    ViewBundle,
    generate_scene,
    load_view,
    write_view,
)
from .sweep import rate_breakdown, rd_sweep

__version__ = "0.1.0"
