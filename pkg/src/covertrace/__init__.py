"""covertrace: differentiable rendering and calibration through curved
translucent covers.

Subpackages map onto the pipeline stages: analytic cover geometry and
refraction (:mod:`geometry`), the differentiable camera model
(:mod:`camera`), the learnable per-ray cover surrogate (:mod:`field`), the
voxel radiance scene (:mod:`radiance`), losses and training
(:mod:`optimization`), synthetic capture generation (:mod:`simulator`),
and metrics plus experiment orchestration (:mod:`metrics`, :mod:`harness`).
"""

__version__ = "0.1.0"

from .kernels import BACKEND as KERNEL_BACKEND  # noqa: F401
