"""Thermal foot analysis toolkit: radiometric calibration, foot
segmentation, contralateral alignment and hotspot reporting, with a
synthetic phantom generator and an acquisition simulator for testing."""

__version__ = "0.1.0"
