"""Exception types shared across the toolkit."""


class LofkitError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(LofkitError):
    """An input value violates a documented precondition."""


class NoHullVisibleError(LofkitError):
    """The frame contains no hull pixels, so it cannot be rated."""


class CodecError(LofkitError):
    """A raster or prediction file does not match the registered format."""


class ManifestError(LofkitError):
    """A dataset manifest is missing, empty, or malformed."""


class SplitError(LofkitError):
    """A split cannot be built, or writing it would clobber an existing split file."""


class EndpointError(LofkitError):
    """A chat-completions endpoint failed to produce a usable response."""
