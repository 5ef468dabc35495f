"""128x128 single-pixel-wide skeleton rasterization and dice similarity."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import CurveSet, Segment

GRID_SIZE = 128
SAMPLES_PER_PIXEL = 4  # quarter-pixel arc-length sampling
BINARIZE_THRESHOLD = 0.5  # midpoint of the sigmoid output range


@dataclass
class BitImage:
    """Binary skeleton raster; row 0 is the top of the box."""

    bits: np.ndarray  # (128, 128) uint8 in {0, 1}
    source_key: str | None = None
    empty_source: bool = False

    def __post_init__(self) -> None:
        if self.bits.shape != (GRID_SIZE, GRID_SIZE):
            raise ValueError(f"expected {GRID_SIZE}x{GRID_SIZE} bits, got {self.bits.shape}")
        if self.bits.dtype != np.uint8:
            self.bits = self.bits.astype(np.uint8)

    @property
    def popcount(self) -> int:
        return int(self.bits.sum())


def rasterize(curves: CurveSet, source_key: str | None = None) -> BitImage:
    """Rasterize a CurveSet into a single-pixel-wide binary skeleton.

    The box maps to the grid with a half-pixel inset, so boundary curves
    land on the centers of border pixels.  Each curve is sampled at
    quarter-pixel arc-length steps and each sample sets its nearest pixel
    (no anti-aliasing, no thickness).  Deterministic; an empty CurveSet
    yields an all-zero image flagged empty_source.
    """
    if not curves.side > 0.0:
        raise ValueError(f"bounding box side must be positive, got {curves.side}")
    bits = np.zeros((GRID_SIZE, GRID_SIZE), dtype=np.uint8)
    if curves.n_curves == 0:
        return BitImage(bits, source_key=source_key, empty_source=True)

    scale = (GRID_SIZE - 1) / curves.side
    step = curves.side / (GRID_SIZE - 1) / SAMPLES_PER_PIXEL
    for curve in curves.curves():
        n = max(2, int(math.ceil(curve.length / step)) + 1)
        t = np.linspace(0.0, 1.0, n)
        if isinstance(curve, Segment):
            xs = curve.x0 + t * (curve.x1 - curve.x0)
            ys = curve.y0 + t * (curve.y1 - curve.y0)
        else:
            a = curve.start_angle + t * curve.sweep
            xs = curve.cx + curve.radius * np.cos(a)
            ys = curve.cy + curve.radius * np.sin(a)
        cols = np.clip(np.floor(xs * scale + 0.5).astype(np.int64), 0, GRID_SIZE - 1)
        rows = (GRID_SIZE - 1) - np.clip(np.floor(ys * scale + 0.5).astype(np.int64), 0, GRID_SIZE - 1)
        bits[rows, cols] = 1
    return BitImage(bits, source_key=source_key)


def dsc(a: BitImage, b: BitImage) -> float:
    """Dice similarity coefficient 2|a&b| / (|a| + |b|); 1.0 when both are empty."""
    if a.bits.shape != b.bits.shape:
        raise ValueError(f"image shapes differ: {a.bits.shape} vs {b.bits.shape}")
    pa = int(a.bits.sum())
    pb = int(b.bits.sum())
    if pa + pb == 0:
        return 1.0
    overlap = int(np.logical_and(a.bits, b.bits).sum())
    return 2.0 * overlap / (pa + pb)


def binarize(values: np.ndarray, threshold: float = BINARIZE_THRESHOLD) -> BitImage:
    """Threshold a float image (e.g. a sigmoid reconstruction) into a BitImage."""
    grid = np.asarray(values, dtype=np.float64).reshape(GRID_SIZE, GRID_SIZE)
    return BitImage((grid >= threshold).astype(np.uint8))


# --- file formats -------------------------------------------------------------


def write_pgm(image: BitImage, path) -> None:
    """Binary PGM (P5, maxval 255); set pixels are 255."""
    header = f"P5\n{GRID_SIZE} {GRID_SIZE}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write((image.bits * np.uint8(255)).tobytes())


def read_pgm(path) -> BitImage:
    with open(path, "rb") as fh:
        data = fh.read()
    parts = data.split(b"\n", 3)
    if len(parts) != 4 or parts[0] != b"P5":
        raise ValueError(f"not a P5 PGM file: {path}")
    width, height = (int(v) for v in parts[1].split())
    maxval = int(parts[2])
    if (width, height, maxval) != (GRID_SIZE, GRID_SIZE, 255):
        raise ValueError(f"expected {GRID_SIZE}x{GRID_SIZE} maxval 255, got {width}x{height} maxval {maxval}")
    raster = np.frombuffer(parts[3][: GRID_SIZE * GRID_SIZE], dtype=np.uint8)
    if raster.size != GRID_SIZE * GRID_SIZE:
        raise ValueError("PGM raster payload truncated")
    return BitImage((raster.reshape(GRID_SIZE, GRID_SIZE) >= 128).astype(np.uint8))


def pack_image(image: BitImage) -> bytes:
    """Pack into 16 bytes per row (128 bits), MSB first; 2048 bytes total."""
    return np.packbits(image.bits, axis=1).tobytes()


def unpack_image(data: bytes, source_key: str | None = None) -> BitImage:
    if len(data) != GRID_SIZE * GRID_SIZE // 8:
        raise ValueError(f"packed image must be {GRID_SIZE * GRID_SIZE // 8} bytes, got {len(data)}")
    packed = np.frombuffer(data, dtype=np.uint8).reshape(GRID_SIZE, GRID_SIZE // 8)
    return BitImage(np.unpackbits(packed, axis=1), source_key=source_key)
