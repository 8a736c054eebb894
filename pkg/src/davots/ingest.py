"""Loading, validation and normalization of UCR-style time-series datasets.

A dataset is a set of equal-length labeled univariate series partitioned
into stages (at minimum "train" and "test").  Labels are remapped to
contiguous 0-based integers by sorted original value so the model's output
layer can index classes directly.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

STD_FLOOR = 1e-12

_SPLIT = re.compile(r"[\t,]|\s+")


class IngestError(ValueError):
    """Raised for malformed dataset files or inconsistent samples."""


@dataclass(frozen=True)
class Sample:
    """One labeled series; ``index`` is stable across reorderings."""

    index: int
    values: np.ndarray
    label: int


@dataclass
class Dataset:
    id: str
    series_length: int
    class_count: int
    stages: dict[str, list[Sample]] = field(default_factory=dict)
    label_values: tuple[float, ...] = ()  # original labels, sorted

    def stage(self, name: str) -> list[Sample]:
        if name not in self.stages:
            raise KeyError(f"unknown stage {name!r}")
        return self.stages[name]

    def stage_matrix(self, name: str) -> np.ndarray:
        """All series of a stage stacked into an (m, n) float64 array."""
        return np.stack([s.values for s in self.stage(name)])

    def stage_labels(self, name: str) -> np.ndarray:
        return np.array([s.label for s in self.stage(name)], dtype=np.int64)

    def content_hash(self) -> str:
        """SHA-256 over a canonical serialization of all stages."""
        h = hashlib.sha256()
        for name in sorted(self.stages):
            h.update(name.encode())
            for s in self.stages[name]:
                h.update(np.int64(s.label).tobytes())
                h.update(np.ascontiguousarray(s.values, dtype=np.float64).tobytes())
        return h.hexdigest()

    def validate(self) -> None:
        if not self.stages:
            raise IngestError("dataset has no stages")
        for name, samples in self.stages.items():
            if not name:
                raise IngestError("empty stage name")
            for i, s in enumerate(samples):
                if s.index != i:
                    raise IngestError(f"stage {name!r}: sample indices not contiguous")
                if s.values.shape != (self.series_length,):
                    raise IngestError(
                        f"stage {name!r} sample {i}: length {s.values.shape} != {self.series_length}"
                    )
                if not np.all(np.isfinite(s.values)):
                    raise IngestError(f"stage {name!r} sample {i}: non-finite value")
                if not 0 <= s.label < self.class_count:
                    raise IngestError(f"stage {name!r} sample {i}: label {s.label} out of range")


def _parse_rows(path: Path) -> tuple[np.ndarray, np.ndarray]:
    """Parse one UCR file into (labels, values).  Tab, comma or whitespace
    separated; first token of each row is the label."""
    labels: list[float] = []
    rows: list[list[float]] = []
    n = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            tokens = [t for t in _SPLIT.split(line) if t]
            try:
                numbers = [float(t) for t in tokens]
            except ValueError as exc:
                raise IngestError(f"{path}:{lineno}: non-numeric token ({exc})") from None
            if len(numbers) < 2:
                raise IngestError(f"{path}:{lineno}: row has no values")
            if n is None:
                n = len(numbers) - 1
            elif len(numbers) - 1 != n:
                raise IngestError(
                    f"{path}:{lineno}: ragged row (length {len(numbers) - 1}, expected {n})"
                )
            labels.append(numbers[0])
            rows.append(numbers[1:])
    if not rows:
        raise IngestError(f"{path}: no samples")
    values = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise IngestError(f"{path}: non-finite value")
    return np.array(labels, dtype=np.float64), values


def _find_stage_file(path: Path, suffix: str) -> Path:
    matches = sorted(path.glob(f"*_{suffix}.tsv")) + sorted(path.glob(f"*_{suffix}.txt"))
    if not matches:
        raise IngestError(f"no *_{suffix}.tsv file under {path}")
    if len(matches) > 1:
        raise IngestError(f"multiple *_{suffix} files under {path}: {matches}")
    return matches[0]


def load_ucr(path: str | Path, id: str) -> Dataset:
    """Load `<NAME>_TRAIN.tsv` / `<NAME>_TEST.tsv` from a directory.

    Labels are remapped to 0-based integers by sorted original value
    (e.g. {-1, 1} becomes {-1: 0, 1: 1}).
    """
    path = Path(path)
    if not path.is_dir():
        raise IngestError(f"not a directory: {path}")
    parts = {}
    for stage, suffix in (("train", "TRAIN"), ("test", "TEST")):
        parts[stage] = _parse_rows(_find_stage_file(path, suffix))

    n = parts["train"][1].shape[1]
    for stage, (_, values) in parts.items():
        if values.shape[1] != n:
            raise IngestError(f"stage {stage!r}: series length {values.shape[1]} != {n}")

    original = np.unique(np.concatenate([labels for labels, _ in parts.values()]))
    remap = {v: k for k, v in enumerate(original)}

    stages: dict[str, list[Sample]] = {}
    for stage, (labels, values) in parts.items():
        stages[stage] = [
            Sample(index=i, values=values[i].copy(), label=remap[labels[i]])
            for i in range(values.shape[0])
        ]
    ds = Dataset(
        id=id,
        series_length=n,
        class_count=len(original),
        stages=stages,
        label_values=tuple(float(v) for v in original),
    )
    ds.validate()
    return ds


def znormalize(d: Dataset) -> Dataset:
    """Per-sample z-normalization with the population (1/n) standard
    deviation.  Near-constant samples (std < 1e-12) become all-zero."""
    if d.series_length < 2:
        raise IngestError("series too short to normalize")
    stages: dict[str, list[Sample]] = {}
    for name, samples in d.stages.items():
        out = []
        for s in samples:
            mu = float(np.mean(s.values))
            sigma = float(np.std(s.values))
            if sigma < STD_FLOOR:
                values = np.zeros_like(s.values)
            else:
                values = (s.values - mu) / sigma
            out.append(Sample(index=s.index, values=values, label=s.label))
        stages[name] = out
    return Dataset(
        id=d.id,
        series_length=d.series_length,
        class_count=d.class_count,
        stages=stages,
        label_values=d.label_values,
    )


def export_stage_tsv(d: Dataset, stage: str, path: str | Path) -> None:
    """Write one stage back out in the UCR tab-separated format.

    Values are printed with 17 significant digits so a reload is
    elementwise-exact.
    """
    samples = d.stage(stage)
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            fields = [repr(int(s.label))] + [f"{v:.17g}" for v in s.values]
            fh.write("\t".join(fields) + "\n")
