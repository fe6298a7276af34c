"""chargecast: zone-level EV charging demand estimation and segmentation."""

__version__ = "0.1.0"
