"""autocal: multi-sensor calibration engine for autonomous-driving rigs.

Subpackages cover rigid/projective geometry, point clouds, OpenCV-free
imaging, calibration-target detection, target-based and targetless
calibration, online calibration, a ground-truth synthetic-scene generator,
and the `autocal` CLI with its manual-calibration serve mode.
"""

__version__ = "0.1.0"

from .geom import CameraModel, Homography, Pose, Rotation  # noqa: F401
from .result import CalibResult  # noqa: F401
