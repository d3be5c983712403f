"""Two-stream egocentric action recognition pipeline.

Thin python surface over the C++ core: dense optical flow, homography-based
ego-motion compensation, flow color rendering, .flo and .ppm IO, synthetic
dataset generation, and the staged pipeline runner.
"""

from egoact._core import (
    compensate,
    compute_flow,
    flow_to_color,
    generate_dataset,
    read_flo,
    read_ppm,
    run_stage,
    write_flo,
)

__all__ = [
    "compensate",
    "compute_flow",
    "flow_to_color",
    "generate_dataset",
    "read_flo",
    "read_ppm",
    "run_stage",
    "write_flo",
]
