"""wifield: 2D electromagnetic inverse scattering for WiFi-band sensing.

Simulates multi-target scattering with a method-of-moments field model,
inverts amplitude-only (phaseless) measurements into permittivity-contrast
maps, and generates labeled synthetic datasets for material segmentation.
"""

__version__ = "0.1.0"
