"""Inspection dumps of stacked images: PGM graymaps and exact CSV grids."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from stackcnn.schemas.stacking import StackedImage

PGM_MAXVAL = 65535


def scale_to_pgm(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    top = values.max() if values.size else 0.0
    if top <= 0:
        return np.zeros(values.shape, dtype=np.uint16)
    return np.floor(np.clip(values, 0, None) * PGM_MAXVAL / top + 0.5).astype(np.uint16)


def write_pgm(image: StackedImage, path: str | Path, binary: bool = True) -> Path:
    path = Path(path)
    scaled = scale_to_pgm(image.values)
    h, w = scaled.shape
    if binary:
        header = f"P5\n{w} {h}\n{PGM_MAXVAL}\n".encode("ascii")
        path.write_bytes(header + scaled.astype(">u2").tobytes())
    else:
        rows = "\n".join(" ".join(str(v) for v in row) for row in scaled.tolist())
        path.write_text(f"P2\n{w} {h}\n{PGM_MAXVAL}\n{rows}\n", encoding="ascii")
    return path


def write_csv_grid(image: StackedImage, path: str | Path) -> Path:
    path = Path(path)
    np.savetxt(path, np.asarray(image.values), fmt="%d", delimiter=",")
    return path


__all__ = ["write_pgm", "write_csv_grid", "scale_to_pgm", "PGM_MAXVAL"]
