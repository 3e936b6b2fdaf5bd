"""Exception types raised across the package."""


class FloodsignError(Exception):
    """Base class for all package-specific errors."""


class GeometryError(FloodsignError):
    """Degenerate or inconsistent pixel geometry (bad bbox, non-positive ratio)."""


class CoordError(FloodsignError):
    """Latitude/longitude outside the WGS84 domain."""


class NoSignError(FloodsignError):
    """No stop-sign detection available after filtering."""


class NoPoleError(FloodsignError):
    """No pole detection available after filtering."""


class PhaseError(FloodsignError):
    """Photo phase does not match the operation (pre vs post flood)."""


class NoBaselineError(FloodsignError):
    """No pre-flood baseline within the pairing radius."""


class UnusableBaselineError(FloodsignError):
    """Baseline observation cannot anchor depth estimation (zero visible pole)."""


class FormatError(FloodsignError):
    """Malformed input file; the message carries the file path and line number."""


class ConfigError(FloodsignError):
    """Invalid configuration key, value, or range."""
