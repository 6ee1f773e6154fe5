"""Exception types shared across the workbench."""


class ShapeError(ValueError):
    """Array dimensions do not chain or do not match an operation's contract."""


class LabelError(ValueError):
    """A class index is outside [0, class_count)."""


class InputError(ValueError):
    """Input data is empty or otherwise unusable."""


class ParameterError(ValueError):
    """A numeric parameter is outside its allowed range."""


class FormatError(ValueError):
    """A file does not conform to its declared binary/text format."""


class ConfigError(ValueError):
    """An experiment configuration is invalid (unknown key, bad value, missing path)."""
