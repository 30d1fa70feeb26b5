"""Reading and writing the on-disk formats of every stage.

JSON documents produced here carry a ``"config"`` object (and the seed
inside it) so each artifact records how it was made.  Where a format is a
bare JSON array, the array sits under a named key next to the config;
readers accept either form.  CSV files get a ``<name>.meta.json`` sidecar.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
from pathlib import Path

import numpy as np

from .activations import ActivationSeries, StrokeEstimate, goodness
from .errors import FormatError
from .features import GrayImage, PoseletFilter
from .geometry import JointConfiguration, KMeansResult
from .model import KeyPoseModel, OccurrencePrediction
from .pictorial import PoseletMixture
from .pipeline import VideoAnalysis


# --------------------------------------------------------------------------
# generic helpers
# --------------------------------------------------------------------------

def dump_json(path, payload) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=1, sort_keys=False) + "\n", encoding="utf-8")


def load_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise FormatError(f"{path}: no such file") from None
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: {exc}") from None


def _records(data, key: str, path) -> list:
    if isinstance(data, dict):
        if key not in data:
            raise FormatError(f"{path}: expected a {key!r} array")
        data = data[key]
    if not isinstance(data, list):
        raise FormatError(f"{path}: expected a JSON array")
    return data


def _wrap(key: str, records, config: dict | None, **extra) -> dict:
    out = {key: records}
    out.update(extra)
    if config is not None:
        out["config"] = config
    return out


def config_of(path) -> dict | None:
    """The config embedded in a JSON artifact or in a CSV sidecar, if any."""
    path = Path(path)
    src = sidecar_path(path) if path.suffix == ".csv" else path
    if not src.exists():
        return None
    data = load_json(src)
    return data.get("config") if isinstance(data, dict) else None


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def write_sidecar(path, config: dict | None, **extra) -> None:
    meta = dict(extra)
    if config is not None:
        meta["config"] = config
    dump_json(sidecar_path(path), meta)


# --------------------------------------------------------------------------
# images
# --------------------------------------------------------------------------

def write_pgm(path, img: GrayImage) -> None:
    """Binary 8-bit PGM; intensities in [0, 1] are scaled to 0..255."""
    px = np.clip(np.round(img.pixels * 255.0), 0, 255).astype(np.uint8)
    h, w = px.shape
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + px.tobytes())


def _pgm_tokens(data: bytes, count: int):
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise FormatError("truncated PGM header")
        tokens.append(data[start:pos])
    return tokens, pos + 1  # exactly one whitespace byte ends the header


def read_pgm(path) -> GrayImage:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"{path}: {exc}") from None
    try:
        (magic, w, h, maxval), start = _pgm_tokens(data, 4)
        w, h, maxval = int(w), int(h), int(maxval)
    except (ValueError, IndexError):
        raise FormatError(f"{path}: malformed PGM header") from None
    if magic != b"P5":
        raise FormatError(f"{path}: only binary PGM (P5) is supported")
    if not 0 < maxval < 256:
        raise FormatError(f"{path}: only 8-bit PGM is supported (maxval {maxval})")
    body = data[start:start + w * h]
    if len(body) != w * h:
        raise FormatError(f"{path}: expected {w * h} pixel bytes, found {len(body)}")
    px = np.frombuffer(body, dtype=np.uint8).reshape(h, w)
    return GrayImage(px.astype(float) / maxval)


def frame_paths(directory) -> list[Path]:
    paths = sorted(Path(directory).glob("*.pgm"))
    if not paths:
        raise FormatError(f"{directory}: no .pgm frames")
    return paths


# --------------------------------------------------------------------------
# joint configurations and clusters
# --------------------------------------------------------------------------

def write_configurations(path, configs, config: dict | None = None) -> None:
    records = [{"frame": int(c.frame_index), "joints": c.joints.tolist(),
                "video": c.video if c.video is not None else ""} for c in configs]
    dump_json(path, _wrap("configurations", records, config))


def read_configurations(path) -> list[JointConfiguration]:
    out = []
    for i, rec in enumerate(_records(load_json(path), "configurations", path)):
        try:
            out.append(JointConfiguration(np.asarray(rec["joints"], float), int(rec["frame"]),
                                          rec.get("video") or None))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{path}: configuration {i}: {exc}") from None
    return out


def write_clusters(path, result: KMeansResult, config: dict | None = None) -> None:
    records = [{"cluster": j, "members": [int(f) for f in c.frames],
                "centroid": c.centroid.joints.tolist()} for j, c in enumerate(result.clusters)]
    dump_json(path, _wrap("clusters", records, config, cost=result.cost))


def read_clusters(path) -> list[dict]:
    recs = _records(load_json(path), "clusters", path)
    out = []
    for rec in recs:
        try:
            out.append({"cluster": int(rec["cluster"]), "members": [int(m) for m in rec["members"]],
                        "centroid": np.asarray(rec["centroid"], float)})
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{path}: {exc}") from None
    return sorted(out, key=lambda r: r["cluster"])


# --------------------------------------------------------------------------
# filters and mixtures
# --------------------------------------------------------------------------

def write_filter(path, filt: PoseletFilter) -> None:
    dump_json(path, filt.to_dict())


def read_filter(path) -> PoseletFilter:
    try:
        return PoseletFilter.from_dict(load_json(path))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_mixture(path, mixture: PoseletMixture, config: dict | None = None, **extra) -> None:
    doc = mixture.to_dict()
    doc.update(extra)
    if config is not None:
        doc["config"] = config
    dump_json(path, doc)


def read_mixture(path) -> PoseletMixture:
    try:
        return PoseletMixture.from_dict(load_json(path))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: {exc}") from None


# --------------------------------------------------------------------------
# score matrices (descriptor CSV)
# --------------------------------------------------------------------------

def _fmt(v: float) -> str:
    return "" if not math.isfinite(v) else repr(float(v))


def write_scores(path, scores: np.ndarray, poselet_ids=None, start_frame: int = 0,
                 config: dict | None = None, **extra) -> None:
    """CSV with header ``frame,poselet_<id>,...``; non-finite scores become empty fields."""
    scores = np.asarray(scores, dtype=float)
    ids = list(poselet_ids) if poselet_ids is not None else list(range(1, scores.shape[1] + 1))
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["frame"] + [f"poselet_{i}" for i in ids])
    for t, row in enumerate(scores):
        w.writerow([start_frame + t] + [_fmt(v) for v in row])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue(), encoding="utf-8")
    write_sidecar(path, config, **extra)


def _poselet_id(name: str):
    tail = name[len("poselet_"):] if name.startswith("poselet_") else name
    try:
        return int(tail)
    except ValueError:
        return tail


def read_scores(path) -> tuple[np.ndarray, list, int]:
    """``(scores, poselet_ids, start_frame)``; empty fields are read as NaN."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"{path}: {exc}") from None
    rows = [r for r in csv.reader(_io.StringIO(text)) if r]
    if not rows or rows[0][0].strip() != "frame":
        raise FormatError(f"{path}: header must start with 'frame'")
    header = [h.strip() for h in rows[0]]
    ids = [_poselet_id(h) for h in header[1:]]
    frames, values = [], []
    for n, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise FormatError(f"{path}:{n}: expected {len(header)} fields, got {len(row)}")
        try:
            frames.append(int(row[0]))
            values.append([float(v) if v.strip() else np.nan for v in row[1:]])
        except ValueError as exc:
            raise FormatError(f"{path}:{n}: {exc}") from None
    if not frames:
        raise FormatError(f"{path}: no score rows")
    if np.any(np.diff(frames) != 1):
        raise FormatError(f"{path}: frames must be consecutive")
    return np.asarray(values, dtype=float).reshape(len(frames), len(ids)), ids, frames[0]


# --------------------------------------------------------------------------
# activations
# --------------------------------------------------------------------------

def _runs(mask: np.ndarray) -> list[list[int]]:
    if mask is None or not mask.any():
        return []
    padded = np.concatenate([[False], mask, [False]])
    edges = np.flatnonzero(np.diff(padded.astype(int)))
    return [[int(a), int(b)] for a, b in zip(edges[::2], edges[1::2])]


def write_activations(path, analysis, config: dict | None = None) -> None:
    """Pruned series with their goodness, the stroke estimate and missing-score runs."""
    series = []
    for j, s in enumerate(analysis.series):
        missing = analysis.missing[:, j] if analysis.missing is not None else None
        series.append({"poselet": s.poselet, "activations": s.frames.tolist(),
                       "goodness": _finite_or_none(goodness(s, analysis.f_stroke)),
                       "missing": _runs(missing)})
    mode = analysis.series[0].mode if analysis.series else None
    doc = {"series": series, "f_stroke": analysis.f_stroke, "mode": mode,
           "n_frames": analysis.n_frames}
    if config is not None:
        doc["config"] = config
    dump_json(path, doc)


def _finite_or_none(v: float):
    return float(v) if math.isfinite(v) else None


def read_activations(path):
    """A :class:`~keypose.pipeline.VideoAnalysis` rebuilt from an activations file."""
    data = load_json(path)
    if not isinstance(data, dict) or "series" not in data or "f_stroke" not in data:
        raise FormatError(f"{path}: expected an object with 'series' and 'f_stroke'")
    mode = data.get("mode") or "anti_symmetric"
    n_frames = data.get("n_frames")
    series, runs = [], []
    try:
        for rec in data["series"]:
            series.append(ActivationSeries(rec["poselet"], rec["activations"], mode, n_frames))
            runs.append(rec.get("missing") or [])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: {exc}") from None
    missing = None
    if n_frames is not None:
        missing = np.zeros((int(n_frames), len(series)), bool)
        for j, rr in enumerate(runs):
            for a, b in rr:
                missing[a:b, j] = True
    stroke = StrokeEstimate(float(data["f_stroke"]), np.empty(0), np.empty(0), 0.0)
    return VideoAnalysis(series, stroke, missing, n_frames)


# --------------------------------------------------------------------------
# key-pose model, predictions, ground truth
# --------------------------------------------------------------------------

def write_model(path, model: KeyPoseModel, config: dict | None = None) -> None:
    doc = model.to_dict()
    if config is not None:
        doc["config"] = config
    dump_json(path, doc)


def read_model(path) -> KeyPoseModel:
    try:
        return KeyPoseModel.from_dict(load_json(path))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: not a key-pose model ({exc})") from None


def write_predictions(path, preds, config: dict | None = None, **extra) -> None:
    dump_json(path, _wrap("predictions", [p.to_dict() for p in preds], config, **extra))


def read_predictions(path) -> list[OccurrencePrediction]:
    out = []
    for rec in _records(load_json(path), "predictions", path):
        try:
            out.append(OccurrencePrediction(int(rec["frame"]), int(rec.get("support", 0)),
                                            float(rec.get("logscore", 0.0))))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{path}: {exc}") from None
    return out


def write_ground_truth(path, frames_by_keypose, config: dict | None = None) -> None:
    records = [{"keypose": k, "frame": int(f)}
               for k, frames in enumerate(frames_by_keypose) for f in frames]
    dump_json(path, _wrap("annotations", records, config))


def read_ground_truth(path, keypose=None) -> np.ndarray:
    """Annotated frames (sorted), optionally only those of one key-pose id."""
    frames = []
    for rec in _records(load_json(path), "annotations", path):
        try:
            if keypose is None or rec["keypose"] == keypose or str(rec["keypose"]) == str(keypose):
                frames.append(int(rec["frame"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{path}: {exc}") from None
    return np.sort(np.asarray(frames, dtype=np.int64))


# --------------------------------------------------------------------------
# evaluation outputs
# --------------------------------------------------------------------------

def write_curve(path, curve, config: dict | None = None) -> None:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["deviation", "recall"])
    for x, r in curve.rows():
        w.writerow([repr(float(x)), repr(float(r))])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue(), encoding="utf-8")
    write_sidecar(path, config)


def read_curve(path) -> tuple[np.ndarray, np.ndarray]:
    try:
        rows = list(csv.reader(Path(path).read_text(encoding="utf-8").splitlines()))
    except OSError as exc:
        raise FormatError(f"{path}: {exc}") from None
    if not rows or [h.strip() for h in rows[0]] != ["deviation", "recall"]:
        raise FormatError(f"{path}: header must be 'deviation,recall'")
    data = np.asarray([[float(a), float(b)] for a, b in rows[1:]], dtype=float).reshape(-1, 2)
    return data[:, 0], data[:, 1]


def write_summary(path, summary: dict, config: dict | None = None) -> None:
    doc = dict(summary)
    if config is not None:
        doc["config"] = config
    dump_json(path, doc)
