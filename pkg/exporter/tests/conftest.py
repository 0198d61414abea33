import struct
import sys
from pathlib import Path

import numpy as np

# Allow running the suite from a bare checkout: the exporter package lives in
# ./src and the pipeline (the format's reference reader) in ../src.
_HERE = Path(__file__).resolve().parent
for candidate in (_HERE.parent / "src", _HERE.parent.parent / "src"):
    if candidate.is_dir() and str(candidate) not in sys.path:
        sys.path.insert(0, str(candidate))


def write_float32_wav(path: Path, samples: np.ndarray, rate: int = 16000) -> None:
    payload = np.asarray(samples, dtype="<f4").tobytes()
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    header += b"fmt " + struct.pack("<IHHIIHH", 16, 3, 1, rate, rate * 4, 4, 32)
    header += b"data" + struct.pack("<I", len(payload))
    path.write_bytes(header + payload)
