"""hitforge: predicting Billboard Hot 100 hits from Spotify track features."""

__version__ = "0.1.0"


class HitforgeError(Exception):
    """Base class for domain errors (bad inputs, malformed data, solver failure)."""


__all__ = ["HitforgeError", "__version__"]
