"""Assembly of the seven-column-group pixel matrix and headless rendering.

Column groups, left to right: raw series, raw histogram, activations,
activation histogram, attributions, attribution histogram, prediction
probabilities.  Raw and attribution scales are symmetric and stage-global
so rows stay visually comparable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GROUP_ORDER = ("raw", "raw_hist", "activations", "act_hist", "attributions", "attr_hist", "prediction")

DEFAULT_BINS = 32

# default anchor colors; scale *kinds* follow the per-data-type policy,
# exact palettes are implementation choices
BLUE = (0, 0, 255)
WHITE = (255, 255, 255)
RED = (255, 0, 0)
ORANGE = (230, 120, 0)
BLACK = (0, 0, 0)
PURPLE = (128, 0, 160)
GRAY = (150, 150, 150)
YELLOW = (255, 220, 0)


class VizError(ValueError):
    pass


@dataclass(frozen=True)
class ColorScaleSpec:
    kind: str  # "diverging" | "sequential"
    lo: float
    hi: float
    mid: float | None = None
    colors: tuple[tuple[int, int, int], ...] = ()

    def __post_init__(self):
        if not self.lo < self.hi:
            raise VizError(f"scale domain lo {self.lo} >= hi {self.hi}")
        if self.kind == "diverging":
            if self.mid is None or not self.lo <= self.mid <= self.hi:
                raise VizError("diverging scale needs lo <= mid <= hi")
            if len(self.colors) != 3:
                raise VizError("diverging scale needs 3 anchor colors")
        elif self.kind == "sequential":
            if len(self.colors) != 2:
                raise VizError("sequential scale needs 2 anchor colors")
        else:
            raise VizError(f"unknown scale kind {self.kind!r}")

    def normalize(self, values: np.ndarray) -> np.ndarray:
        """Map data units to [0, 1]: lo -> 0, hi -> 1 (mid -> 0.5 for
        diverging), monotone, out-of-domain values clamped."""
        v = np.asarray(values, dtype=np.float64)
        if self.kind == "sequential" or self.mid is None:
            out = (v - self.lo) / (self.hi - self.lo)
        else:
            lo_span = self.mid - self.lo
            hi_span = self.hi - self.mid
            below = 0.5 * (v - self.lo) / lo_span if lo_span > 0 else np.zeros_like(v)
            above = 0.5 + 0.5 * (v - self.mid) / hi_span if hi_span > 0 else np.full_like(v, 0.5)
            out = np.where(v <= self.mid, below, above)
        return np.clip(out, 0.0, 1.0)

    def color(self, t: float) -> tuple[int, int, int]:
        """RGB for a normalized value via linear interpolation between the
        anchors."""
        t = min(1.0, max(0.0, float(t)))
        if self.kind == "sequential":
            a, b, f = self.colors[0], self.colors[1], t
        elif t <= 0.5:
            a, b, f = self.colors[0], self.colors[1], 2.0 * t
        else:
            a, b, f = self.colors[1], self.colors[2], 2.0 * t - 1.0
        return tuple(int(round(a[c] + (b[c] - a[c]) * f)) for c in range(3))

    def to_doc(self) -> dict:
        return {
            "kind": self.kind,
            "lo": self.lo,
            "mid": self.mid,
            "hi": self.hi,
            "colors": [list(c) for c in self.colors],
        }

    @staticmethod
    def from_doc(doc: dict) -> "ColorScaleSpec":
        return ColorScaleSpec(
            kind=doc["kind"],
            lo=doc["lo"],
            hi=doc["hi"],
            mid=doc["mid"],
            colors=tuple(tuple(c) for c in doc["colors"]),
        )


def histogram(values, bins: int, lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
    """Equal-width counts over [lo, hi] with clamping into the edge bins.

    Returns (raw counts, counts normalized by the max bin)."""
    if bins < 1:
        raise VizError("need at least one bin")
    if not lo < hi:
        raise VizError(f"bad histogram range ({lo}, {hi})")
    v = np.asarray(values, dtype=np.float64).ravel()
    counts = np.zeros(bins, dtype=np.int64)
    if v.size:
        idx = np.floor((v - lo) / (hi - lo) * bins).astype(np.int64)
        idx = np.clip(idx, 0, bins - 1)
        np.add.at(counts, idx, 1)
    peak = counts.max()
    normalized = counts / peak if peak > 0 else np.zeros(bins, dtype=np.float64)
    return counts, normalized


@dataclass
class DatasetStats:
    raw_absmax: float
    act_max: float
    attr_absmax: float


def default_scales(stats: DatasetStats, activation_kind: str = "relu") -> dict[str, ColorScaleSpec]:
    """Per-group color scales: diverging around zero for raw values and
    attributions, sequential from white for ReLU activations (diverging
    for sigmoid), sequential from white for histograms, and a non-white
    diverging midpoint for prediction probabilities."""
    a = stats.raw_absmax if stats.raw_absmax > 0 else 1.0
    b = stats.attr_absmax if stats.attr_absmax > 0 else 1.0
    raw = ColorScaleSpec("diverging", lo=-a, mid=0.0, hi=a, colors=(BLUE, WHITE, RED))
    if activation_kind == "relu":
        act_hi = stats.act_max if stats.act_max > 0 else 1.0
        act = ColorScaleSpec("sequential", lo=0.0, hi=act_hi, colors=(WHITE, ORANGE))
    elif activation_kind == "sigmoid":
        act = ColorScaleSpec("diverging", lo=0.0, mid=0.5, hi=1.0, colors=(BLUE, WHITE, RED))
    else:
        raise VizError(f"unknown activation kind {activation_kind!r}")
    hist = ColorScaleSpec("sequential", lo=0.0, hi=1.0, colors=(WHITE, BLACK))
    return {
        "raw": raw,
        "raw_hist": hist,
        "activations": act,
        "act_hist": hist,
        "attributions": ColorScaleSpec("diverging", lo=-b, mid=0.0, hi=b, colors=(BLUE, WHITE, RED)),
        "attr_hist": hist,
        "prediction": ColorScaleSpec("diverging", lo=0.0, mid=0.5, hi=1.0, colors=(PURPLE, GRAY, YELLOW)),
    }


@dataclass
class PixelMatrixSlice:
    """Normalized values for a row window of the ordered pixel matrix."""

    ordering_source: dict
    offset: int
    count: int
    sample_indices: list[int]
    labels: list[int]
    groups: dict[str, np.ndarray]  # group name -> (count, width) floats in [0, 1]
    scales: dict[str, ColorScaleSpec] = field(default_factory=dict)

    def group_widths(self) -> dict[str, int]:
        return {name: self.groups[name].shape[1] for name in GROUP_ORDER}


def stddev_series(rows, ordering_permutation) -> np.ndarray:
    """Population standard deviation per sample, in ordering order."""
    X = np.asarray(rows, dtype=np.float64)
    perm = np.asarray(ordering_permutation, dtype=np.int64)
    if X.shape[0] != perm.size:
        raise VizError(f"{X.shape[0]} rows vs permutation of {perm.size}")
    return X[perm].std(axis=1)


def assemble_slice(
    raw: np.ndarray,
    activations: np.ndarray,
    attributions: np.ndarray,
    probabilities: np.ndarray,
    labels: np.ndarray,
    ordering_permutation,
    scales: dict[str, ColorScaleSpec],
    offset: int,
    count: int,
    ordering_source: dict | None = None,
    bins: int = DEFAULT_BINS,
) -> PixelMatrixSlice:
    perm = np.asarray(ordering_permutation, dtype=np.int64)
    m = perm.size
    if raw.shape[0] != m or activations.shape[0] != m or attributions.shape[0] != m:
        raise VizError("row count mismatch across data groups")
    if offset < 0 or count < 1 or offset + count > m:
        raise VizError(f"row range ({offset}, {count}) outside 0..{m}")
    rows = perm[offset : offset + count]

    def hist_block(data: np.ndarray, scale: ColorScaleSpec) -> np.ndarray:
        out = np.empty((count, bins), dtype=np.float64)
        for r, row in enumerate(data):
            _, out[r] = histogram(row, bins, scale.lo, scale.hi)
        return out

    raw_rows = raw[rows]
    act_rows = activations[rows]
    attr_rows = attributions[rows]
    groups = {
        "raw": scales["raw"].normalize(raw_rows),
        "raw_hist": hist_block(raw_rows, scales["raw"]),
        "activations": scales["activations"].normalize(act_rows),
        "act_hist": hist_block(act_rows, scales["activations"]),
        "attributions": scales["attributions"].normalize(attr_rows),
        "attr_hist": hist_block(attr_rows, scales["attributions"]),
        "prediction": scales["prediction"].normalize(probabilities[rows]),
    }
    # quantize to the float32 wire precision so a client colorizing the
    # served values reproduces server-rendered pixels exactly
    groups = {
        name: block.astype(np.float32).astype(np.float64) for name, block in groups.items()
    }
    return PixelMatrixSlice(
        ordering_source=dict(ordering_source or {}),
        offset=offset,
        count=count,
        sample_indices=[int(i) for i in rows],
        labels=[int(l) for l in labels[rows]],
        groups=groups,
        scales=dict(scales),
    )


def render_image(slc: PixelMatrixSlice, cell: tuple[int, int] = (1, 1)) -> bytes:
    """Binary PPM (P6, maxval 255): one cell block per matrix value with
    1-pixel white gutters between column groups."""
    w_px, h_px = cell
    if w_px < 1 or h_px < 1:
        raise VizError("cell size must be positive")
    widths = [slc.groups[g].shape[1] for g in GROUP_ORDER]
    total_w = sum(w * w_px for w in widths) + (len(GROUP_ORDER) - 1)
    total_h = slc.count * h_px
    img = np.full((total_h, total_w, 3), 255, dtype=np.uint8)

    x0 = 0
    for g, width in zip(GROUP_ORDER, widths):
        scale = slc.scales[g]
        block = slc.groups[g]
        for r in range(slc.count):
            y0 = r * h_px
            for c in range(width):
                img[y0 : y0 + h_px, x0 + c * w_px : x0 + (c + 1) * w_px] = scale.color(block[r, c])
        x0 += width * w_px + 1  # gutter

    header = f"P6\n{total_w} {total_h}\n255\n".encode()
    return header + img.tobytes()
