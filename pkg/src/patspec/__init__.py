"""Patent claim and drawing to specification dataset pipeline."""

__version__ = "0.1.0"
