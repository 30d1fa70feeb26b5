"""Key-pose prediction in cyclic human motion."""

__version__ = "0.1.0"
