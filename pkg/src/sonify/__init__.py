"""Sonification pipeline: artificially pair images with retrieved audio.

Image captions name sounding concepts; each concept is matched to a chunk
of a standardized audio pool by embedding similarity, loudness-normalized
to a sampled target, and mixed into the image's audio counterpart. The
dataset manifest makes every rendered waveform reproducible from its seed.
"""

from .audio import AudioChunk, AudioClip, chunk, decode_audio, downmix_to_mono, resample
from .concepts import (
    DEFAULT_SILENT_KEYWORDS,
    ImageRecord,
    SoundingConcept,
    filter_silent_images,
    load_concepts,
    load_images,
)
from .embeddings import EmbeddingMatrix, ScoreVector, cosine_sim, load_embeddings, write_embeddings
from .errors import SonifyError
from .loudness import GainResult, LufsValue, measure_integrated_lufs, normalize_to_lufs
from .manifest import (
    ManifestEntry,
    PipelineConfig,
    load_config,
    read_manifest,
    replay_manifest,
    run_pipeline,
    write_manifest,
)
from .metrics import (
    GaussianStats,
    LoudnessStudyResult,
    ais,
    frechet_distance,
    gaussian_stats,
    iis,
    knn_loudness_study,
)
from .mixer import GainRange, MixRecipe, mix, render_pair, sample_gain
from .pool import ChunkStore, StandardizeConfig, standardize_pool
from .retrieval import (
    MatchResult,
    RetrievalConfig,
    batch_retrieve,
    dynamic_threshold,
    eligible_set,
    get_matched_audio,
    ssr,
)

__version__ = "0.1.0"
