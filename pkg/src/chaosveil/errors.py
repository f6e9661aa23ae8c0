"""Exception hierarchy shared across the package."""


class ChaosVeilError(Exception):
    """Base class for all errors raised by chaosveil."""


class UnsupportedFormat(ChaosVeilError, ValueError):
    pass


class CorruptFile(ChaosVeilError, ValueError):
    pass


class InvalidDimensions(ChaosVeilError, ValueError):
    pass


class PositionOutOfRange(ChaosVeilError, ValueError):
    pass


class ImageTooSmall(ChaosVeilError, ValueError):
    pass


class WindowOutOfBounds(ChaosVeilError, ValueError):
    pass


class NoKeypointsFound(ChaosVeilError):
    """The cover yields no usable SIFT descriptor; pick another cover."""


class Diverged(ChaosVeilError, ArithmeticError):
    """CNN state left the finite/bounded region during integration."""


class LengthMismatch(ChaosVeilError, ValueError):
    pass


class DimensionMismatch(ChaosVeilError, ValueError):
    pass


class InsufficientCapacity(ChaosVeilError):
    def __init__(self, required: int, available: int):
        super().__init__(
            f"payload needs {required} bits but cover offers {available}")
        self.required = required
        self.available = available


class CoverTooSmall(ChaosVeilError, ValueError):
    pass


class BadMagic(ChaosVeilError):
    """Header magic/version does not match: not a chaosveil stego image."""


class TruncatedPayload(ChaosVeilError):
    pass


class ZeroVariance(ChaosVeilError, ValueError):
    pass


class DegenerateInput(ChaosVeilError, ValueError):
    pass
