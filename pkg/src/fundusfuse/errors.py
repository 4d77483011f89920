"""Exception hierarchy shared across the pipeline."""


class FundusFuseError(Exception):
    """Base class for every error raised by this package."""


# --- imaging ---

class DecodeError(FundusFuseError):
    """File exists but cannot be decoded as PNG or JPEG."""


class UnsupportedChannelCountError(FundusFuseError):
    """Decoded image has a channel layout outside gray / RGB."""


class EmptyImageError(FundusFuseError):
    """An operation received (or would produce) a zero-pixel image."""


# --- segmentation ---

class InvalidKernelError(FundusFuseError):
    """Blur kernel is even, < 1, or larger than the image."""


class InvalidSigmaError(FundusFuseError):
    """Gaussian sigma is not strictly positive."""


class InvalidBlockSizeError(FundusFuseError):
    """Adaptive-threshold block size is even or < 3."""


class InvalidRadiusError(FundusFuseError):
    """Morphology structuring-element radius is < 1."""


class EmptyRoiError(FundusFuseError):
    """Segmentation produced a mask with zero foreground pixels."""


# --- handcrafted features ---

class DegenerateRoiError(FundusFuseError):
    """ROI too small or ill-placed for the requested descriptor."""


class InvalidKError(FundusFuseError):
    """Neighbor / bit count parameter outside its legal range."""


class InvalidOrderError(FundusFuseError):
    """Negative moment order."""


class NotColorImageError(FundusFuseError):
    """Color descriptor applied to a non-3-channel image."""


# --- deep features ---

class InvalidDimError(FundusFuseError):
    """Requested embedding dimension is < 1."""


class ModelLoadError(FundusFuseError):
    """Model file is unreadable, malformed, or uses unsupported operators."""


class InputShapeUnsupportedError(FundusFuseError):
    """Model input is not a single 1x224x224x3 or 1x3x224x224 image."""


# --- fusion ---

class EmptyBlockListError(FundusFuseError):
    """concat called with no feature blocks."""


class BlockOrderViolationError(FundusFuseError):
    """Feature blocks supplied out of canonical order."""


class InsufficientSamplesError(FundusFuseError):
    """Standardizer needs at least two samples."""


class DimensionMismatchError(FundusFuseError):
    """Vector length disagrees with the fitted / declared dimension."""


# --- classifiers ---

class InvalidConfigError(FundusFuseError):
    """Training configuration value outside its legal range."""


class SingleClassTrainingSetError(FundusFuseError):
    """Margin-based training requires at least two classes."""


# --- evaluation ---

class LengthMismatchError(FundusFuseError):
    """Label sequences differ in length or are empty."""


class LabelOutOfRangeError(FundusFuseError):
    """A label falls outside 0..n_classes-1."""


class EmptyMatrixError(FundusFuseError):
    """Confusion matrix has no counted samples."""


class ClassTooSmallError(FundusFuseError):
    """Stratified split needs at least two records per class."""


# --- dataset I/O ---

class MissingClassDirectoryError(FundusFuseError):
    """Dataset root lacks one of the five class subdirectories."""


class EmptyDatasetError(FundusFuseError):
    """No decodable image found under the dataset root."""


class CacheCorruptError(FundusFuseError):
    """Feature cache fails magic, fingerprint, or dimension validation."""
