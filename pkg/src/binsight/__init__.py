"""binsight: classify binaries into families from their grayscale-image bytes."""

__version__ = "0.1.0"
