"""Decision-window construction and the train/validation/test partition.

Each triple pairs a 5 s EEG window with the matched feature segment (same
start frame) and a mismatched segment starting one second after the matched
segment ends. Windows hop by 10 % of their length; a triple is emitted only
when its full 11 s footprint fits. Validation and test are cut from the
middle of each recording and windowing runs inside each partition, so no
triple straddles a boundary.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, InvalidSpecError, SampleRateMismatchError
from .tensors import TimeSeriesTensor, read_tensor, write_tensor

PARTITIONS = ("train", "val", "test")


@dataclass(frozen=True)
class WindowingSpec:
    window_s: float = 5.0
    overlap_frac: float = 0.9
    gap_s: float = 1.0
    fs: float = 64.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.overlap_frac < 1.0):
            raise InvalidSpecError(f"overlap_frac must be in [0, 1), got {self.overlap_frac}")
        if self.window_s <= 0 or self.gap_s <= 0:
            raise InvalidSpecError("window_s and gap_s must be positive")

    @property
    def window_frames(self) -> int:
        return int(round(self.window_s * self.fs))

    @property
    def hop_frames(self) -> int:
        return max(1, int(round(self.window_frames * (1.0 - self.overlap_frac))))

    @property
    def gap_frames(self) -> int:
        return int(round(self.gap_s * self.fs))

    @property
    def span_frames(self) -> int:
        """Full footprint of one triple: window + gap + mismatch window."""
        return 2 * self.window_frames + self.gap_frames


@dataclass(frozen=True)
class SplitSpec:
    train_frac: float = 0.8
    val_frac: float = 0.1
    test_frac: float = 0.1

    def __post_init__(self) -> None:
        if abs(self.train_frac + self.val_frac + self.test_frac - 1.0) > 1e-9:
            raise InvalidSpecError("partition fractions must sum to 1")


def window_starts(length: int, spec: WindowingSpec) -> np.ndarray:
    """Start frames of all triples fitting in ``length`` frames."""
    if length < spec.span_frames:
        return np.empty(0, dtype=np.int64)
    n = (length - spec.span_frames) // spec.hop_frames + 1
    return np.arange(n, dtype=np.int64) * spec.hop_frames


def split_recording(
    length: int, spec: SplitSpec = SplitSpec(), win: WindowingSpec = WindowingSpec()
) -> tuple[list[tuple[int, int]], tuple[int, int], tuple[int, int]]:
    """Frame ranges (train pieces, val, test); val and test sit mid-recording."""
    a = int(np.floor(length * spec.train_frac / 2.0))
    b = a + int(np.floor(length * spec.val_frac))
    c = b + int(np.floor(length * spec.test_frac))
    val, test = (a, b), (b, c)
    train = [(0, a), (c, length)]
    span = win.span_frames
    if b - a < span or c - b < span or max(a, length - c) < span:
        raise InvalidInputError(
            f"recording of {length} frames too short to window every partition"
        )
    return train, val, test


@dataclass
class RecordingData:
    """A recording's aligned EEG and feature arrays at the window rate."""

    subject_id: str
    recording_id: str
    eeg: np.ndarray      # (C, L)
    feature: np.ndarray  # (F, L)


@dataclass
class DecisionWindowSet:
    """Triples referenced lazily into their recordings.

    ``start_frame[i]`` is both the EEG and matched-feature start of triple
    ``i``; the mismatch segment starts ``window + gap`` frames later. Each
    triple yields two order-balanced samples: sample ``2i`` presents
    (match, mismatch) with label 1, sample ``2i + 1`` the swap with label 0.
    """

    spec: WindowingSpec
    recordings: list[RecordingData]
    rec_index: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    start_frame: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    partition: str = ""

    def __post_init__(self) -> None:
        self.rec_index = np.asarray(self.rec_index, dtype=np.int64)
        self.start_frame = np.asarray(self.start_frame, dtype=np.int64)
        if self.rec_index.shape != self.start_frame.shape:
            raise InvalidInputError("rec_index and start_frame must have equal length")

    @property
    def n_triples(self) -> int:
        return int(self.rec_index.size)

    @property
    def n_samples(self) -> int:
        return 2 * self.n_triples

    @property
    def feature_dim(self) -> int:
        return self.recordings[0].feature.shape[0] if self.recordings else 0

    @property
    def eeg_channels(self) -> int:
        return self.recordings[0].eeg.shape[0] if self.recordings else 0

    def subject_of_triple(self, i: int) -> str:
        return self.recordings[self.rec_index[i]].subject_id

    def triple_subjects(self) -> list[str]:
        return [self.subject_of_triple(i) for i in range(self.n_triples)]

    def gather_triples(self, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Materialize (eeg, match, mismatch) stacks for triple indices."""
        w = self.spec.window_frames
        off = w + self.spec.gap_frames
        eeg = np.empty((len(idx), self.eeg_channels, w))
        match = np.empty((len(idx), self.feature_dim, w))
        mismatch = np.empty_like(match)
        for j, i in enumerate(np.asarray(idx, dtype=np.int64)):
            rec = self.recordings[self.rec_index[i]]
            s = int(self.start_frame[i])
            eeg[j] = rec.eeg[:, s : s + w]
            match[j] = rec.feature[:, s : s + w]
            mismatch[j] = rec.feature[:, s + off : s + off + w]
        return eeg, match, mismatch

    def gather_samples(
        self, sample_idx: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Materialize (eeg, speech_a, speech_b, labels) for sample indices."""
        sample_idx = np.asarray(sample_idx, dtype=np.int64)
        triples = sample_idx // 2
        swapped = (sample_idx % 2).astype(bool)
        eeg, match, mismatch = self.gather_triples(triples)
        a = np.where(swapped[:, None, None], mismatch, match)
        b = np.where(swapped[:, None, None], match, mismatch)
        labels = (~swapped).astype(np.float64)
        return eeg, a, b, labels

    def subject_of_sample(self, s: int) -> str:
        return self.subject_of_triple(int(s) // 2)


def make_windows(
    eeg: TimeSeriesTensor,
    feat: TimeSeriesTensor,
    spec: WindowingSpec = WindowingSpec(),
    subject_id: str = "",
    recording_id: str = "",
) -> DecisionWindowSet:
    """All decision-window triples of one recording (no partitioning)."""
    if eeg.fs != spec.fs or feat.fs != spec.fs:
        raise SampleRateMismatchError(
            f"windowing expects {spec.fs} Hz streams, got eeg={eeg.fs}, feat={feat.fs}"
        )
    length = min(eeg.n_samples, feat.n_samples)
    rec = RecordingData(subject_id, recording_id, eeg.data[:, :length], feat.data[:, :length])
    starts = window_starts(length, spec)
    return DecisionWindowSet(
        spec=spec,
        recordings=[rec],
        rec_index=np.zeros(starts.size, dtype=np.int64),
        start_frame=starts,
    )


def assemble_dataset(
    recordings: list[RecordingData],
    win: WindowingSpec = WindowingSpec(),
    split: SplitSpec = SplitSpec(),
    seed: int = 0,
) -> dict[str, DecisionWindowSet]:
    """Pool per-partition triples across subjects; train order is shuffled.

    Windowing runs independently inside every partition range so no triple
    (including its mismatch segment) crosses a partition boundary.
    """
    if not recordings:
        raise InvalidInputError("no recordings to assemble")
    per_partition: dict[str, tuple[list[np.ndarray], list[np.ndarray]]] = {
        p: ([], []) for p in PARTITIONS
    }
    for r_i, rec in enumerate(recordings):
        if rec.eeg.shape[1] != rec.feature.shape[1]:
            length = min(rec.eeg.shape[1], rec.feature.shape[1])
            rec.eeg = rec.eeg[:, :length]
            rec.feature = rec.feature[:, :length]
        train_ranges, val_range, test_range = split_recording(rec.eeg.shape[1], split, win)
        ranges = {"train": train_ranges, "val": [val_range], "test": [test_range]}
        for part, rngs in ranges.items():
            for lo, hi in rngs:
                starts = window_starts(hi - lo, win) + lo
                per_partition[part][0].append(np.full(starts.size, r_i, dtype=np.int64))
                per_partition[part][1].append(starts)
    out = {}
    rng = np.random.default_rng(seed)
    for part in PARTITIONS:
        rec_idx = np.concatenate(per_partition[part][0]) if per_partition[part][0] else np.empty(0, dtype=np.int64)
        starts = np.concatenate(per_partition[part][1]) if per_partition[part][1] else np.empty(0, dtype=np.int64)
        if part == "train" and rec_idx.size:
            order = rng.permutation(rec_idx.size)
            rec_idx, starts = rec_idx[order], starts[order]
        out[part] = DecisionWindowSet(
            spec=win, recordings=recordings, rec_index=rec_idx,
            start_frame=starts, partition=part,
        )
    return out


def write_window_set(out_dir: str | Path, ws: DecisionWindowSet) -> None:
    """Serialize triples as tensor stacks plus a CSV index sidecar."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    eeg, match, mismatch = ws.gather_triples(np.arange(ws.n_triples))
    write_tensor(out_dir / "eeg.ndmm", eeg, ws.spec.fs)
    write_tensor(out_dir / "match.ndmm", match, ws.spec.fs)
    write_tensor(out_dir / "mismatch.ndmm", mismatch, ws.spec.fs)
    with open(out_dir / "index.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["triple_id", "subject", "recording", "start_frame", "partition"])
        for i in range(ws.n_triples):
            rec = ws.recordings[ws.rec_index[i]]
            writer.writerow(
                [i, rec.subject_id, rec.recording_id, int(ws.start_frame[i]), ws.partition]
            )


def read_window_set(out_dir: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray, list[dict]]:
    """Read back a serialized window set: (eeg, match, mismatch, index rows)."""
    out_dir = Path(out_dir)
    eeg, _ = read_tensor(out_dir / "eeg.ndmm")
    match, _ = read_tensor(out_dir / "match.ndmm")
    mismatch, _ = read_tensor(out_dir / "mismatch.ndmm")
    with open(out_dir / "index.csv", newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return eeg, match, mismatch, rows
