"""Writes the MNIST fixture used by the rotation test.

The images come from the 5000-image MNIST sample bundled with mlxtend
(500 per digit). Only the 1's and 8's are kept, in their original order,
and written in IDX format.

    pip install mlxtend
    python3 tools/make_mnist_subset.py tests/data
"""

import struct
import sys
from pathlib import Path

import numpy as np
from mlxtend.data import mnist_data

DIGITS = (1, 8)


def main(out_dir: str) -> None:
    images, labels = mnist_data()
    keep = np.isin(labels, DIGITS)
    images = images[keep].astype(np.uint8)
    labels = labels[keep].astype(np.uint8)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "mnist-1-8-images.idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(images), 28, 28))
        f.write(images.tobytes())
    with open(out / "mnist-1-8-labels.idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(labels.tobytes())
    print(f"wrote {len(images)} images ({', '.join(f'{d}: {(labels == d).sum()}' for d in DIGITS)})")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "tests/data")
