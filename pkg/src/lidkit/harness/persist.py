"""Model sets and their text file format.

Layout::

    LIDKIT/1 <backend> <feature_kind>
    [meta]
    key = value
    [language <label>]
    name[d1,d2] = v v v ...
    checksum=<crc32 hex of every preceding byte>

Floats are written with 17 significant digits, which round-trips IEEE
doubles exactly.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import BadModelFile
from ..gmm import GmmModel
from ..vq_dtw import Codebook

MAGIC = "LIDKIT/1"
BACKENDS = ("vq_dtw", "gmm")


@dataclass
class ModelSet:
    feature_kind: str
    backend: str
    models: dict  # language -> GmmModel | Codebook
    meta: dict = field(default_factory=dict)  # str -> str, insertion ordered
    train_files: tuple = ()

    @property
    def languages(self) -> list:
        return sorted(self.models)

    @property
    def size(self) -> int:
        """Mixture count (gmm) or codebook size (vq_dtw)."""
        m = next(iter(self.models.values()))
        return m.n_components if self.backend == "gmm" else m.size


def _fmt(values) -> str:
    return " ".join(format(float(v), ".17g") for v in np.ravel(values))


def _array_line(name: str, arr) -> str:
    arr = np.asarray(arr, dtype=np.float64)
    shape = ",".join(str(d) for d in arr.shape)
    return f"{name}[{shape}] = {_fmt(arr)}"


def dumps(ms: ModelSet) -> str:
    if ms.backend not in BACKENDS:
        raise ValueError(f"unknown backend {ms.backend!r}")
    lines = [f"{MAGIC} {ms.backend} {ms.feature_kind}", "[meta]"]
    lines += [f"{k} = {v}" for k, v in ms.meta.items()]
    lines += [f"train_file = {p}" for p in ms.train_files]
    for lang in ms.languages:
        m = ms.models[lang]
        lines.append(f"[language {lang}]")
        if ms.backend == "gmm":
            lines.append(_array_line("weights", m.weights))
            lines.append(_array_line("means", m.means))
            lines.append(_array_line("variances", m.variances))
            lines.append(_array_line("history", np.asarray(m.history)))
        else:
            lines.append(_array_line("centroids", m.centroids))
            lines.append(_array_line("distortion", [m.distortion]))
            lines.append(_array_line("history", np.asarray(m.history)))
    body = "\n".join(lines) + "\n"
    return body + f"checksum={zlib.crc32(body.encode()):08x}\n"


def save_model_set(ms: ModelSet, path) -> None:
    Path(path).write_text(dumps(ms))


def _parse_array(section: str, line: str):
    try:
        head, values = line.split("=", 1)
        name, shape = head.strip().rstrip("]").split("[")
        dims = tuple(int(d) for d in shape.split(",") if d)
        flat = np.array([float(v) for v in values.split()], dtype=np.float64)
    except ValueError as exc:
        raise BadModelFile(f"section [{section}]: unreadable array line ({exc})") from None
    if flat.size != int(np.prod(dims)):
        raise BadModelFile(f"section [{section}]: array {name} holds {flat.size} values, shape says {dims}")
    return name, flat.reshape(dims)


def _build(backend: str, lang: str, arrays: dict):
    need = ("weights", "means", "variances", "history") if backend == "gmm" else (
        "centroids", "distortion", "history")
    missing = [k for k in need if k not in arrays]
    if missing:
        raise BadModelFile(f"section [language {lang}]: missing arrays {missing}")
    if backend == "gmm":
        return GmmModel(arrays["weights"], arrays["means"], arrays["variances"], lang,
                        tuple(arrays["history"].tolist()))
    return Codebook(arrays["centroids"], float(arrays["distortion"][0]), tuple(arrays["history"].tolist()))


def loads(text: str) -> ModelSet:
    lines = text.split("\n")
    if not lines or not lines[0].startswith(MAGIC + " "):
        raise BadModelFile(f"bad magic: expected {MAGIC!r}")
    header = lines[0].split()
    if len(header) != 3 or header[1] not in BACKENDS:
        raise BadModelFile(f"malformed header line {lines[0]!r}")
    _, backend, kind = header

    if lines[-1] == "":
        lines = lines[:-1]
    sections = [ln[1:-1] for ln in lines if ln.startswith("[") and ln.endswith("]")]
    if not lines[-1].startswith("checksum="):
        where = sections[-1] if sections else "header"
        raise BadModelFile(f"file truncated in section [{where}] (no checksum line)")
    body = text[: text.rindex("checksum=")]
    try:
        stored = int(lines[-1].split("=", 1)[1], 16)
    except ValueError:
        raise BadModelFile("unreadable checksum") from None
    if zlib.crc32(body.encode()) != stored:
        raise BadModelFile("checksum mismatch")

    meta, train_files, models = {}, [], {}
    section, arrays = None, {}
    for ln in lines[1:-1]:
        if ln.startswith("[") and ln.endswith("]"):
            if section and section.startswith("language "):
                models[section[9:]] = _build(backend, section[9:], arrays)
            section, arrays = ln[1:-1], {}
        elif section == "meta":
            key, _, value = ln.partition(" = ")
            if key == "train_file":
                train_files.append(value)
            else:
                meta[key] = value
        elif section and section.startswith("language "):
            name, arr = _parse_array(section, ln)
            arrays[name] = arr
        elif ln.strip():
            raise BadModelFile(f"unexpected line outside any section: {ln[:40]!r}")
    if section and section.startswith("language "):
        models[section[9:]] = _build(backend, section[9:], arrays)
    if not models:
        raise BadModelFile("no language sections")
    return ModelSet(kind, backend, models, meta, tuple(train_files))


def load_model_set(path) -> ModelSet:
    try:
        text = Path(path).read_text()
    except UnicodeDecodeError:
        raise BadModelFile(f"{path}: not a text model file") from None
    return loads(text)
