"""Corpus manifests and test-utterance segmentation."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..audio_io import CANONICAL_RATE, Waveform
from ..errors import BadManifest, MissingFile, TooShort

MANIFEST_COLUMNS = ("language", "speaker", "path", "role")
ROLES = ("train", "test")


@dataclass(frozen=True)
class ManifestEntry:
    language: str
    speaker: str
    path: Path
    role: str


@dataclass(frozen=True)
class CorpusManifest:
    entries: tuple
    sample_rate: int = CANONICAL_RATE

    def __post_init__(self):
        paths = [e.path for e in self.entries]
        if len(set(paths)) != len(paths):
            dup = sorted({str(p) for p in paths if paths.count(p) > 1})
            raise BadManifest(f"duplicate paths: {dup}")
        for lang in self.languages:
            roles = {e.role for e in self.entries if e.language == lang}
            if not set(ROLES) <= roles:
                raise BadManifest(f"language {lang!r} needs at least one train and one test entry")

    @property
    def languages(self) -> list:
        return sorted({e.language for e in self.entries})

    def select(self, role: str, language: str | None = None) -> list:
        return [e for e in self.entries
                if e.role == role and (language is None or e.language == language)]

    def __len__(self):
        return len(self.entries)


def _assign_default_roles(rows: list) -> list:
    """Per language, in file order: the last utterance tests, the rest train."""
    last = {}
    for i, row in enumerate(rows):
        last[row["language"]] = i
    out = []
    for i, row in enumerate(rows):
        role = row.get("role") or ("test" if last[row["language"]] == i else "train")
        out.append({**row, "role": role})
    return out


def load_manifest(path, check_files: bool = True) -> CorpusManifest:
    """Read a ``language,speaker,path,role`` CSV; relative paths resolve against its directory."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise MissingFile(f"manifest {path}: {exc.strerror}") from exc
    reader = csv.DictReader(text.splitlines())
    header = [h.strip() for h in (reader.fieldnames or [])]
    missing = [c for c in MANIFEST_COLUMNS[:3] if c not in header]
    if missing:
        raise BadManifest(f"{path}: missing columns {missing}")
    rows = []
    for lineno, raw in enumerate(reader, start=2):
        row = {k.strip(): (v or "").strip() for k, v in raw.items() if k is not None}
        if not any(row.values()):
            continue
        if not row["language"] or not row["path"]:
            raise BadManifest(f"{path}:{lineno}: empty language or path")
        role = row.get("role", "")
        if role and role not in ROLES:
            raise BadManifest(f"{path}:{lineno}: unknown role {role!r}")
        rows.append(row)

    base = path.parent
    entries = []
    for row in _assign_default_roles(rows):
        p = Path(row["path"])
        p = p if p.is_absolute() else base / p
        if check_files and not p.is_file():
            raise MissingFile(f"{path}: audio file {p} does not exist")
        entries.append(ManifestEntry(row["language"], row["speaker"], p, row["role"]))
    return CorpusManifest(tuple(entries))


def write_manifest(manifest: CorpusManifest, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_COLUMNS)
        for e in manifest.entries:
            try:
                rel = e.path.relative_to(path.parent)
            except ValueError:
                rel = e.path
            w.writerow([e.language, e.speaker, rel.as_posix(), e.role])


def segment_test(utterance: Waveform, seconds: float) -> list:
    """Consecutive non-overlapping segments of exactly ``seconds``; the remainder is dropped."""
    if seconds <= 0:
        raise ValueError("segment length must be positive")
    n = int(round(seconds * utterance.sample_rate))
    count = len(utterance.samples) // n
    if count == 0:
        raise TooShort(f"{utterance.duration:.3f} s utterance has no complete {seconds} s segment")
    return [Waveform(np.array(utterance.samples[i * n:(i + 1) * n]), utterance.sample_rate)
            for i in range(count)]
