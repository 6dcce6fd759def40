"""Nighttime light-artifact detection, localization, and tracking.

Detects the light artifacts oncoming vehicles cast at night (headlamp
glare and its reflections on guardrails, road surface, and foliage),
estimates their 3-D position from a single calibrated camera, and tracks
them over time so an oncoming vehicle can be reported before it is in
direct sight.
"""

__version__ = "0.1.0"

from .boxes import BBox, Keypoint, iou
from .image import GrayImage
from .proposer import ProposerParams, propose

__all__ = ["BBox", "GrayImage", "Keypoint", "ProposerParams", "iou", "propose", "__version__"]
