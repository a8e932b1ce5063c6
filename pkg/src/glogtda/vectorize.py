"""Persistence images for fibered barcodes and fixed-length feature assembly.

Every bar of a fibered barcode occupies the segment from (birth, birth+b) to
(death, death+b) in the grade plane. After normalizing the dataset-global box
to the unit square, each pixel accumulates

    persistence^p * exp(-dist(center, segment)^2 / (2 bandwidth^2)) * delta/diag

summed over all bars of all lines, where dist is Euclidean point-to-segment
distance, persistence is measured in line-parameter units and delta/diag
normalizes for line density. One image per homology degree; images are
concatenated in ascending degree order, pixels row-major.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .bifiltration import BiGradedField, Box, union_box
from .errors import FormatError, LengthError, ParameterError
from .fibered import (
    FiberedBarcode,
    LineGrid,
    compute_fibered_barcode,
    make_line_grid,
    widen_box,
)

MAGIC_FEATURES = b"GLF1"


@dataclass(frozen=True)
class MpiConfig:
    """Rendering parameters; the box is the dataset-global grade rectangle."""

    box: Box
    resolution: tuple[int, int] = (50, 50)
    bandwidth: float = 0.01
    weight_power: float = 2.0

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise ParameterError(f"bandwidth must be > 0, got {self.bandwidth}")
        if any(r < 1 for r in self.resolution):
            raise ParameterError(f"resolution must be >= 1, got {self.resolution}")
        object.__setattr__(self, "box", widen_box(self.box))


@dataclass(frozen=True)
class FeatureVector:
    """Concatenated per-degree images; layout records (degree, block length)."""

    values: np.ndarray
    layout: tuple[tuple[int, int], ...]

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)


_CUTOFF_BANDWIDTHS = 8.0  # kernel mass beyond this is ~exp(-32), below rounding


def render_segments(
    segments: np.ndarray, weights: np.ndarray, cfg: MpiConfig
) -> np.ndarray:
    """Accumulate weighted Gaussian masses of normalized segments onto pixels.

    segments is (m, 4) rows (x0, y0, x1, y1) in unit-square coordinates;
    weights already include every per-bar factor. Pixels farther than eight
    bandwidths from a segment are skipped.
    """
    r1, r2 = cfg.resolution
    xs = (np.arange(r1) + 0.5) / r1
    ys = (np.arange(r2) + 0.5) / r2
    img = np.zeros(cfg.resolution, dtype=np.float64)
    inv_two_bw2 = 1.0 / (2.0 * cfg.bandwidth**2)
    margin = _CUTOFF_BANDWIDTHS * cfg.bandwidth
    for (x0, y0, x1, y1), w in zip(np.atleast_2d(segments), np.ravel(weights)):
        i0 = np.searchsorted(xs, min(x0, x1) - margin)
        i1 = np.searchsorted(xs, max(x0, x1) + margin)
        j0 = np.searchsorted(ys, min(y0, y1) - margin)
        j1 = np.searchsorted(ys, max(y0, y1) + margin)
        if i0 == i1 or j0 == j1:
            continue
        px = xs[i0:i1, None]
        py = ys[None, j0:j1]
        dx, dy = x1 - x0, y1 - y0
        seg_len2 = dx * dx + dy * dy
        if seg_len2 == 0.0:
            d2 = (px - x0) ** 2 + (py - y0) ** 2
        else:
            t = ((px - x0) * dx + (py - y0) * dy) / seg_len2
            t = np.clip(t, 0.0, 1.0)
            d2 = (px - (x0 + t * dx)) ** 2 + (py - (y0 + t * dy)) ** 2
        img[i0:i1, j0:j1] += w * np.exp(-d2 * inv_two_bw2)
    return img


def render_mpi(fb: FiberedBarcode, degree: int, cfg: MpiConfig) -> np.ndarray:
    """Persistence image of one homology degree of a fibered barcode."""
    if degree not in fb.degrees_present:
        raise ParameterError(f"degree {degree} absent from barcode {fb.degrees_present}")
    min1, min2, max1, max2 = cfg.box
    span1, span2 = max1 - min1, max2 - min2
    diag = float(np.hypot(span1, span2))
    density = fb.grid.delta / diag
    segments, weights = [], []
    for offset, bars in zip(fb.grid.offsets.tolist(), fb.barcodes):
        # clamp to where this line crosses the global box (no-op when the
        # barcode was computed against the same box)
        t_enter = max(min1, min2 - offset)
        t_exit = min(max1, max2 - offset)
        for b in bars:
            if b.degree != degree:
                continue
            birth = max(b.birth, t_enter)
            death = min(b.death, t_exit + fb.grid.delta)
            if death <= birth:
                continue
            segments.append(
                (
                    (birth - min1) / span1,
                    (birth + offset - min2) / span2,
                    (death - min1) / span1,
                    (death + offset - min2) / span2,
                )
            )
            weights.append((death - birth) ** cfg.weight_power * density)
    if not segments:
        return np.zeros(cfg.resolution, dtype=np.float64)
    return render_segments(np.array(segments), np.array(weights), cfg)


def compute_global_box(fields: list[BiGradedField]) -> Box:
    """Tight grade box over a training split (errors when empty)."""
    if not fields:
        raise ParameterError("training split is empty; cannot fix a global box")
    return union_box(*(f.box for f in fields))


def build_features(
    fields: list[BiGradedField],
    cfg: MpiConfig,
    num_lines: int = 50,
    degrees: tuple[int, ...] | None = None,
    grid: LineGrid | None = None,
) -> list[FeatureVector]:
    """Fibered barcode -> per-degree images -> concatenated vector, per field.

    All fields share the grid built from the config's global box, so features
    are comparable across samples; grades outside the box are clipped to it.
    """
    if grid is None:
        grid = make_line_grid(cfg.box, num_lines)
    out = []
    for f in fields:
        if degrees is None:
            degrees = tuple(range(len(f.dims)))
        fb = compute_fibered_barcode(f, grid, degrees, allow_clip=True)
        blocks = [render_mpi(fb, d, cfg).ravel() for d in sorted(degrees)]
        layout = tuple((d, b.size) for d, b in zip(sorted(degrees), blocks))
        out.append(FeatureVector(np.concatenate(blocks), layout))
    return out


# --- feature persistence (CSV and binary) -----------------------------------


def features_to_csv(features: list[FeatureVector], labels) -> str:
    """One row per sample: label first, then the feature values."""
    labels = np.asarray(labels).reshape(-1)
    if len(labels) != len(features):
        raise ParameterError("labels and features must have equal length")
    rows = []
    for lab, fv in zip(labels, features):
        rows.append(",".join([str(int(lab))] + [repr(v) for v in fv.values.tolist()]))
    return "\n".join(rows) + "\n"


def write_feature_bin(path, features: list[FeatureVector], labels) -> None:
    """Binary feature table: magic GLF1, u32 count, u32 row width, float64 rows.

    Rows mirror the CSV layout (label first, then features) so the file is
    self-contained for reload.
    """
    labels = np.asarray(labels, dtype=np.float64).reshape(-1)
    if len(labels) != len(features):
        raise ParameterError("labels and features must have equal length")
    dim = 1 + (len(features[0]) if features else 0)
    matrix = np.empty((len(features), dim), dtype="<f8")
    matrix[:, 0] = labels
    for i, fv in enumerate(features):
        if 1 + len(fv) != dim:
            raise ParameterError("ragged feature lengths")
        matrix[i, 1:] = fv.values
    with open(path, "wb") as fh:
        fh.write(MAGIC_FEATURES)
        fh.write(struct.pack("<II", len(features), dim))
        fh.write(matrix.tobytes(order="C"))


def read_feature_bin(path) -> tuple[np.ndarray, np.ndarray]:
    """Load a GLF1 feature table -> (features (N, D), integer labels (N,))."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC_FEATURES:
        raise FormatError("bad feature file magic")
    count, dim = struct.unpack_from("<II", data, 4)
    expected = 12 + count * dim * 8
    if len(data) != expected:
        raise LengthError(f"feature file is {len(data)} bytes, expected {expected}")
    matrix = np.frombuffer(data, dtype="<f8", offset=12).reshape(count, dim)
    return matrix[:, 1:].copy(), matrix[:, 0].astype(np.int64)
