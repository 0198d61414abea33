"""Thin adapters that run audio/text encoders and serialize SEMB files.

The serialized format is the contract with the sonification pipeline; this
package only needs an input manifest, a model tag, and an output path.
"""

from .encoders import EncoderError, available_models, get_encoder
from .jobs import ExportError, ExportJob, export_audio_embeddings, export_text_embeddings

__version__ = "0.1.0"
