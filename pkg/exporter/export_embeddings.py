#!/usr/bin/env python3
"""Entry script: export audio/text embeddings to the SEMB format.

Usage:
    export_embeddings.py --mode audio --in pool/pool_manifest.jsonl \
        --model spectral-v1 --out audio.semb
    export_embeddings.py --mode text --in concepts.jsonl \
        --model charngram-v1 --out text.semb
"""

import sys
from pathlib import Path

if __package__ is None:  # running from a checkout without installation
    sys.path.insert(0, str(Path(__file__).parent / "src"))

from embed_export.cli import main

if __name__ == "__main__":
    raise SystemExit(main())
