"""Shared exception types."""


class GridError(ValueError):
    """Grid too coarse or otherwise unusable for the requested accuracy."""


class TailViolation(ValueError):
    """Mass near the domain edge exceeds tolerance: the truncation is invalid."""


class ResidualError(ValueError):
    """A defining equation is not satisfied to tolerance."""


class CertificationError(ValueError):
    """A sign or monotonicity certificate failed."""


class ConfigError(ValueError):
    """Malformed scenario configuration."""
