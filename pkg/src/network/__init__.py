"""
Detector network bundle and region assembly from synthetic images.
"""

from .network import DetectorNetwork, image_regions, detection_regions, raw_region_batches

__all__ = ['DetectorNetwork', 'image_regions', 'detection_regions', 'raw_region_batches']
