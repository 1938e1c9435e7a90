"""Feature extraction adapter writing XEB1 files for the xmodal engine."""

__version__ = "0.1.0"

from .encoders import available_models, get_encoder, register  # noqa: F401
from .extract import ExtractorJob, extract, load_image, verify_roundtrip  # noqa: F401
