"""Exception types shared across the package."""


class EarlybeamError(Exception):
    """Base class for all errors raised by this package."""


class DataError(EarlybeamError):
    """Malformed or out-of-contract input: files, images, annotations, configs."""


class NoIntersectionError(EarlybeamError):
    """A camera ray does not hit the ground plane in front of the vehicle."""


class NoEstimateError(EarlybeamError):
    """No pixel of a box produced a usable distance estimate."""
