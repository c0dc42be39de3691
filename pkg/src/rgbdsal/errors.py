"""Exception types shared across the package."""


class RgbdSalError(Exception):
    """Base class for all package-specific errors."""


class ShapeMismatch(RgbdSalError):
    """Arrays disagree with a declared shape contract."""

    def __init__(self, message="", *, level=None, expected=None, actual=None):
        self.level = level
        self.expected = expected
        self.actual = actual
        parts = [message] if message else []
        if level is not None:
            parts.append(f"level={level}")
        if expected is not None:
            parts.append(f"expected={expected}")
        if actual is not None:
            parts.append(f"actual={actual}")
        super().__init__(", ".join(parts) if parts else "shape mismatch")


class MissingLevel(RgbdSalError):
    """A feature pyramid does not carry the expected number of levels."""


class UnknownEncoder(RgbdSalError):
    """Encoder name not present in the registry."""

    def __init__(self, name):
        self.name = name
        super().__init__(f"unknown encoder: {name!r}")


class SpatialTooLarge(RgbdSalError):
    """Spatial extent exceeds the configured cap for a quadratic-cost op."""


class InputTooSmall(RgbdSalError):
    """Input spatial size below the minimum an op can handle."""


class OutOfRange(RgbdSalError):
    """Scalar argument or array values outside the documented range."""


class EmptyLabeledBatch(RgbdSalError):
    """Total loss requires at least one labeled term."""


class WrongLevelCount(RgbdSalError):
    """Paired per-level sequences differ in length."""


class EmptyDataset(RgbdSalError):
    """A training stage was handed a dataset with no samples."""


class MissingCheckpoint(RgbdSalError):
    """Checkpoint file absent or required initialization not supplied."""


class UnreadableImage(RgbdSalError):
    """Image file exists but cannot be decoded."""

    def __init__(self, path, reason=""):
        self.path = str(path)
        msg = f"unreadable image: {self.path}"
        if reason:
            msg += f" ({reason})"
        super().__init__(msg)


class UnsupportedBitDepth(RgbdSalError):
    """Image file uses a pixel format outside the supported set."""


class MissingSubdir(RgbdSalError):
    """Dataset root lacks a required subdirectory."""


class StemMismatch(RgbdSalError):
    """File stems do not line up across dataset subdirectories."""

    def __init__(self, orphans):
        self.orphans = list(orphans)
        super().__init__(f"unmatched stems: {self.orphans}")


class NoValidPixels(RgbdSalError):
    """Depth metric valid mask excludes every pixel."""


class EmptyGroundTruth(RgbdSalError):
    """Ground truth has no positive pixels; recall is undefined."""


class IoError(RgbdSalError):
    """Filesystem write failed while emitting dataset files."""
