"""Monocular SLAM mapping with semantic feature refinement and ground-plane
scale-drift correction, driven by replayed localization."""

from .config import PipelineConfig
from .geometry import CameraIntrinsics, Pose
from .pipeline import RunReport, run, run_wallclock, write_report
from .semantic_labels import LabelClass, LabelRaster

__version__ = "0.1.0"

__all__ = ["CameraIntrinsics", "LabelClass", "LabelRaster", "PipelineConfig", "Pose", "RunReport",
           "run", "run_wallclock", "write_report"]
