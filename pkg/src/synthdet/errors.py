"""Exception hierarchy and the process exit codes the CLI maps it to."""

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ASSET = 3
EXIT_RUNTIME = 4


class SynthdetError(Exception):
    """Base class for toolkit errors. CLI exit code 4 unless refined."""

    exit_code = EXIT_RUNTIME


class ConfigError(SynthdetError):
    """Invalid plan, flag, or parameter value. CLI exit code 2."""

    exit_code = EXIT_CONFIG


class AssetError(SynthdetError):
    """Missing or unreadable on-disk asset. CLI exit code 3."""

    exit_code = EXIT_ASSET


# --- mesh ingestion ---------------------------------------------------------

class MalformedVertex(AssetError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no


class MalformedFace(AssetError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no


class EmptyMesh(SynthdetError):
    pass


# --- rendering --------------------------------------------------------------

class EmptyRender(SynthdetError):
    """Mesh projected entirely outside the frame; no pixel was covered."""


class MissingPool(SynthdetError):
    """A background or texture image is required by the cue mode but absent."""


class EmptyMask(SynthdetError):
    pass


# --- dataset assembly -------------------------------------------------------

class MissingCategory(AssetError):
    def __init__(self, category: str):
        super().__init__(f"no models found for category {category!r}")
        self.category = category


class UnreadableAsset(AssetError):
    def __init__(self, path, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = path


class BadRow(AssetError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"row {line_no}: {reason}")
        self.line_no = line_no


class MissingImage(AssetError):
    pass


# --- features ---------------------------------------------------------------

class BadParams(ConfigError):
    pass


class BadMagic(AssetError):
    pass


class DimensionMismatch(AssetError):
    pass


class DuplicateId(AssetError):
    pass


# --- training / scoring -----------------------------------------------------

class DegenerateLabels(SynthdetError):
    """Training set contains a single class."""


class NonFiniteInput(SynthdetError):
    pass


class SpaceMismatch(SynthdetError):
    """Feature vector and model belong to different feature spaces."""


# --- evaluation -------------------------------------------------------------

class NoGroundTruth(SynthdetError):
    pass


class NoCategories(SynthdetError):
    pass
