"""Shared plumbing: reproducible RNG streams, CSV emission, checksums."""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np


def make_rng(seed: int, stream: int = 0, replicate: int = 0) -> np.random.Generator:
    """Return a counter-based (Philox) generator for a derived stream.

    Philox is keyed by the full (seed, stream, replicate) triple, so every
    stage of a run draws from an independent, bit-reproducible stream and a
    recorded seed is enough to replay any experiment exactly.
    """
    return np.random.Generator(np.random.Philox(key=None, seed=[seed, stream, replicate]))


def fmt17(x: float) -> str:
    """Format a float with 17 significant digits (lossless round trip)."""
    return f"{float(x):.17g}"


def write_csv(path: str | Path, header: list[str], rows) -> None:
    """Write a CSV with one header row, %.17g floats, and a final newline.

    Values that are not floats (ints, strings) are written verbatim, so
    counts stay readable. Output bytes are deterministic for fixed rows.
    """
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, (float, np.floating)):
                cells.append(fmt17(v))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(65536), b""):
            h.update(block)
    return h.hexdigest()


def histogram_csv(path: str | Path, samples: np.ndarray, bins: int = 50) -> None:
    """Write a histogram as (bin_left, bin_right, count) rows over 50 uniform bins."""
    samples = np.asarray(samples, dtype=float)
    lo, hi = float(samples.min()), float(samples.max())
    if hi <= lo:
        lo, hi = lo - 0.5, hi + 0.5
    counts, edges = np.histogram(samples, bins=bins, range=(lo, hi))
    rows = [(edges[i], edges[i + 1], int(counts[i])) for i in range(bins)]
    write_csv(path, ["bin_left", "bin_right", "count"], rows)
