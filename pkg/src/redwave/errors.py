"""Exception hierarchy shared across the package."""


class RedwaveError(Exception):
    """Base class for all package errors."""


class ConfigurationError(RedwaveError):
    """Invalid or inconsistent simulation parameters."""


class GeometryError(RedwaveError):
    """Point outside region, cell not in cover, degenerate grid, etc."""


class MobilityError(RedwaveError):
    """Sampling failure in a mobility step (should not happen for convex regions)."""
