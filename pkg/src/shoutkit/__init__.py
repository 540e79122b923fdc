"""shoutkit: shouted-speech features, models, corpus tooling and experiments."""

__version__ = "0.1.0"

from . import audio_io, corpus, experiments, features, models, neural
from .errors import (ConfigError, DegenerateInputError, FormatError,
                     InsufficientRatingsError, ManifestError, NumericError,
                     RangeError, ShapeError, ShoutKitError, StateError,
                     UnsupportedError)

__all__ = [
    "audio_io", "corpus", "experiments", "features", "models", "neural",
    "ShoutKitError", "ConfigError", "DegenerateInputError", "FormatError",
    "InsufficientRatingsError", "ManifestError", "NumericError", "RangeError",
    "ShapeError", "StateError", "UnsupportedError", "__version__",
]
