"""Detection of faint moving objects in event-camera streams by stacking simil-frames."""

__version__ = "1.0.0"
