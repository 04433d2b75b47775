"""mmtl-net – 1D MobileNetV3-style multi-task network for activity recognition and resistance estimation."""
__version__ = "0.1.0"
