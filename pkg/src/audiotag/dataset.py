"""Chunk metadata and audio ingestion.

The corpus is a flat list of 4-second chunks. Each chunk carries a set of
tags drawn from the 7-class alphabet, an optional fold assignment (0-4 for
development folds, "evaluation" for the held-out set) and a refinement flag:
"refined" chunks have strong annotator agreement, "raw-only" chunks carry
majority-vote labels and are used for training only.

Chunk list CSV: ``chunk_id,labels[,fold[,refinement]]``, header optional.
The labels column is a concatenation such as ``"cmv"``; characters outside
the alphabet are ignored with a warning. Fold assignments may instead come
from a separate ``chunk_id,fold`` CSV.
"""

from __future__ import annotations

import csv
import warnings
import wave
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, FormatError, ParseError

TAGS = ("b", "c", "f", "m", "o", "p", "v")

SAMPLE_RATE = 16000
CHUNK_SAMPLES = 4 * SAMPLE_RATE

EVALUATION_FOLD = "evaluation"


@dataclass(frozen=True)
class TagSet:
    """Immutable set of active tags out of the 7-class alphabet."""

    labels: frozenset = frozenset()

    @classmethod
    def from_string(cls, text, context=""):
        """Parse a concatenated label string, dropping foreign characters."""
        known = set()
        foreign = []
        for ch in text.strip():
            if ch in TAGS:
                known.add(ch)
            else:
                foreign.append(ch)
        if foreign:
            warnings.warn(
                "ignoring unknown label characters %r%s"
                % ("".join(foreign), " in %s" % context if context else "")
            )
        return cls(frozenset(known))

    def to_vector(self):
        """Return the 7-dim binary membership vector ordered as TAGS."""
        return np.array([1.0 if t in self.labels else 0.0 for t in TAGS])

    def __contains__(self, tag):
        return tag in self.labels

    def __len__(self):
        return len(self.labels)

    def __iter__(self):
        return iter(sorted(self.labels))


@dataclass
class ChunkRecord:
    chunk_id: str
    audio_path: str
    tags: TagSet
    refinement: str = "refined"  # "refined" | "raw-only"
    fold: object = None  # int 0-4, "evaluation", or None


@dataclass
class AudioChunk:
    """PCM audio normalized to [-1, 1] at 16 kHz mono."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE
    chunk_id: str = ""

    @property
    def duration(self):
        return len(self.samples) / self.sample_rate


def _parse_fold(token, where):
    token = token.strip()
    if token == "":
        return None
    if token.lower() in ("evaluation", "eval"):
        return EVALUATION_FOLD
    try:
        fold = int(token)
    except ValueError:
        raise ConfigError("unknown fold id %r (%s)" % (token, where))
    if not 0 <= fold <= 4:
        raise ConfigError("fold index %d out of range [0, 4] (%s)" % (fold, where))
    return fold


def _read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            yield lineno, [cell.strip() for cell in row]


def load_fold_spec(fold_path):
    """Read a ``chunk_id,fold`` CSV into a dict."""
    folds = {}
    for lineno, row in _read_rows(fold_path):
        if row[0].lower() in ("chunk_id", "id"):
            continue
        if len(row) < 2:
            raise ParseError("%s line %d: expected chunk_id,fold" % (fold_path, lineno))
        folds[row[0]] = _parse_fold(row[1], "%s line %d" % (fold_path, lineno))
    return folds


def load_chunk_list(csv_path, fold_spec=None, audio_dir=None, wav_suffix=".wav"):
    """Load chunk records from a label CSV plus optional fold assignments.

    Args:
        csv_path: path of the ``chunk_id,labels[,fold[,refinement]]`` CSV.
        fold_spec: optional path of a ``chunk_id,fold`` CSV; overrides any
            inline fold column.
        audio_dir: directory holding the per-chunk WAV files; defaults to
            the CSV's directory.
        wav_suffix: filename suffix appended to the chunk id.

    Returns:
        List of ChunkRecord in file order.
    """
    csv_path = Path(csv_path)
    base = Path(audio_dir) if audio_dir is not None else csv_path.parent
    fold_map = load_fold_spec(fold_spec) if fold_spec is not None else None

    records = []
    for lineno, row in _read_rows(csv_path):
        where = "%s line %d" % (csv_path, lineno)
        if lineno == 1 and row[0].lower() in ("chunk_id", "id"):
            continue
        if len(row) < 2:
            raise ParseError("%s: expected at least chunk_id,labels" % where)
        chunk_id = row[0]
        if not chunk_id:
            raise ParseError("%s: empty chunk id" % where)
        tags = TagSet.from_string(row[1], context=where)
        fold = _parse_fold(row[2], where) if len(row) > 2 else None
        refinement = row[3] if len(row) > 3 and row[3] else "refined"
        if refinement not in ("refined", "raw-only"):
            raise ParseError("%s: unknown refinement %r" % (where, refinement))
        if fold_map is not None:
            fold = fold_map.get(chunk_id, fold)
        if not tags.labels and refinement != "raw-only":
            raise ParseError(
                "%s: chunk %r has no labels but is not marked raw-only"
                % (where, chunk_id)
            )
        records.append(
            ChunkRecord(
                chunk_id=chunk_id,
                audio_path=str(base / (chunk_id + wav_suffix)),
                tags=tags,
                refinement=refinement,
                fold=fold,
            )
        )
    return records


def fold_counts(records):
    """Map fold id -> number of records assigned to it."""
    counts = {}
    for rec in records:
        counts[rec.fold] = counts.get(rec.fold, 0) + 1
    return counts


def training_records(records, fold, include_raw=True):
    """Training set for a development fold.

    Development chunks of every other fold, plus (optionally) all raw-only
    chunks. Raw-only chunks never enter a test set.
    """
    if not (isinstance(fold, int) and 0 <= fold <= 4):
        raise ConfigError("training_records expects a development fold 0-4")
    out = []
    for rec in records:
        if rec.fold == EVALUATION_FOLD:
            continue
        if rec.refinement == "raw-only":
            if include_raw:
                out.append(rec)
            continue
        if rec.fold is not None and rec.fold != fold:
            out.append(rec)
    return out


def heldout_records(records, fold):
    """Test set: exactly the refined chunks assigned to ``fold``."""
    if fold == EVALUATION_FOLD:
        return [r for r in records if r.fold == EVALUATION_FOLD]
    if not (isinstance(fold, int) and 0 <= fold <= 4):
        raise ConfigError("heldout_records expects a development fold 0-4 or evaluation")
    return [r for r in records if r.fold == fold and r.refinement != "raw-only"]


def read_wav(path, chunk_id=""):
    """Read a mono 16 kHz 16-bit PCM WAV into an AudioChunk.

    Raises FormatError on any deviation; there is no silent resampling or
    channel mixing.
    """
    try:
        with wave.open(str(path), "rb") as wav:
            n_channels = wav.getnchannels()
            samp_width = wav.getsampwidth()
            rate = wav.getframerate()
            n_frames = wav.getnframes()
            payload = wav.readframes(n_frames)
    except FileNotFoundError:
        raise DataError("%s: audio file does not exist" % path)
    except (wave.Error, OSError) as exc:
        raise FormatError("%s: not a readable PCM WAV (%s)" % (path, exc))
    if n_channels != 1:
        raise FormatError("%s: expected mono, got %d channels" % (path, n_channels))
    if rate != SAMPLE_RATE:
        raise FormatError("%s: expected %d Hz, got %d Hz" % (path, SAMPLE_RATE, rate))
    if samp_width != 2:
        raise FormatError(
            "%s: expected 16-bit samples, got %d-bit" % (path, 8 * samp_width)
        )
    raw = np.frombuffer(payload, dtype="<i2")
    samples = raw.astype(np.float64) / 32768.0
    return AudioChunk(samples=samples, sample_rate=rate, chunk_id=chunk_id)


def pad_or_trim(chunk, length=CHUNK_SAMPLES):
    """Zero-pad at the end or truncate so the chunk has exactly ``length`` samples."""
    n = len(chunk.samples)
    if n == length:
        return chunk
    if n > length:
        samples = chunk.samples[:length]
    else:
        samples = np.concatenate([chunk.samples, np.zeros(length - n)])
    return replace(chunk, samples=samples)


def write_wav(path, samples, sample_rate=SAMPLE_RATE):
    """Write float samples in [-1, 1] as mono 16-bit PCM (test fixtures, demos)."""
    clipped = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    pcm = np.round(clipped * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(sample_rate)
        wav.writeframes(pcm.tobytes())
