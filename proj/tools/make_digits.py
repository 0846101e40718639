#!/usr/bin/env python3
"""Regenerate tests/data/digits-*-ubyte from the 8x8 digits bundled with scikit-learn."""
import struct
import sys
from pathlib import Path

import numpy as np
from sklearn.datasets import load_digits

out = Path(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "tests" / "data")
out.mkdir(parents=True, exist_ok=True)
d = load_digits()
img = np.clip(np.rint(d.images * 255 / 16), 0, 255).astype(np.uint8)
n = img.shape[0]
with open(out / "digits-images-idx3-ubyte", "wb") as f:
    f.write(struct.pack(">IIII", 0x803, n, 8, 8))
    f.write(img.tobytes())
with open(out / "digits-labels-idx1-ubyte", "wb") as f:
    f.write(struct.pack(">II", 0x801, n))
    f.write(d.target.astype(np.uint8).tobytes())
print(f"{n} images -> {out}")
