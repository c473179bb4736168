"""Scene container and binary cloud files.

A container is a directory holding ``scene.json`` (cameras, roles, image
paths), one 8-bit image per view, and either ``gaussians.bin`` or, for
point-cloud-only inputs, ``points.bin``.

``gaussians.bin``: little-endian magic ``GSL2``, version u32, G u64, then
G x 59 float32. ``points.bin``: magic ``GSP2``, version u32, N u64, then
N x 6 float32 (xyz, rgb).
"""
from __future__ import annotations

import json
import logging
import pathlib
import struct
from typing import Any

import numpy as np

from core.errors import SceneParseError
from scene.camera import View
from scene.dataset import SceneDataset
from scene.gaussians import PARAM_COUNT, GaussianCloud
from scene.initialization import sfm_init
from utils.images import load_image, save_image

logger = logging.getLogger("L2S")

CLOUD_MAGIC = b"GSL2"
POINTS_MAGIC = b"GSP2"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIQ")
SCENE_FILE = "scene.json"
CLOUD_FILE = "gaussians.bin"
GROUND_TRUTH_FILE = "ground_truth.bin"
POINTS_FILE = "points.bin"


def _write_table(path: pathlib.Path, magic: bytes, table: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as handle:
        handle.write(_HEADER.pack(magic, FORMAT_VERSION, table.shape[0]))
        handle.write(np.ascontiguousarray(table, dtype="<f4").tobytes())


def _read_table(path: pathlib.Path, magic: bytes, columns: int) -> np.ndarray:
    try:
        payload = path.read_bytes()
    except OSError as exc:
        raise SceneParseError(f"Cannot read {path.name}: {exc}", path=str(path)) from exc
    if len(payload) < _HEADER.size:
        raise SceneParseError("Truncated header", path=str(path), offset=len(payload))
    found_magic, version, count = _HEADER.unpack_from(payload)
    if found_magic != magic:
        raise SceneParseError(f"Bad magic {found_magic!r}, expected {magic!r}", path=str(path), offset=0)
    if version != FORMAT_VERSION:
        raise SceneParseError(f"Unsupported version {version}", path=str(path), offset=4)
    if count < 1:
        raise SceneParseError("File holds no rows", path=str(path), offset=8)
    expected = _HEADER.size + count * columns * 4
    if len(payload) < expected:
        raise SceneParseError(f"Truncated payload for {count} rows", path=str(path), offset=len(payload))
    if len(payload) > expected:
        raise SceneParseError("Trailing bytes after payload", path=str(path), offset=expected)
    table = np.frombuffer(payload, dtype="<f4", count=count * columns, offset=_HEADER.size)
    bad = np.flatnonzero(~np.isfinite(table))
    if bad.size:
        raise SceneParseError("Non-finite value", path=str(path), offset=_HEADER.size + 4 * int(bad[0]))
    return table.reshape(count, columns).astype(np.float32)


def save_cloud(cloud: GaussianCloud, path: pathlib.Path | str) -> pathlib.Path:
    path = pathlib.Path(path)
    _write_table(path, CLOUD_MAGIC, cloud.params.astype(np.float32))
    return path


def load_cloud(path: pathlib.Path | str) -> GaussianCloud:
    return GaussianCloud(_read_table(pathlib.Path(path), CLOUD_MAGIC, PARAM_COUNT), copy=False)


def save_points(points: np.ndarray, colors: np.ndarray, path: pathlib.Path | str) -> pathlib.Path:
    path = pathlib.Path(path)
    _write_table(path, POINTS_MAGIC, np.concatenate([points, colors], axis=1))
    return path


def load_points(path: pathlib.Path | str) -> tuple[np.ndarray, np.ndarray]:
    table = _read_table(pathlib.Path(path), POINTS_MAGIC, 6)
    return table[:, :3], table[:, 3:]


def _view_record(view: View, image_name: str) -> dict[str, Any]:
    return {
        "name": view.name,
        "role": view.role,
        "width": view.width,
        "height": view.height,
        "intrinsics": view.intrinsics.reshape(-1).tolist(),
        "rotation": view.rotation.reshape(-1).tolist(),
        "translation": view.translation.tolist(),
        "allow_skew": view.allow_skew,
        "image": image_name,
    }


def save_scene(dataset: SceneDataset, directory: pathlib.Path | str, image_format: str = "png") -> pathlib.Path:
    """Write ``dataset`` as a container directory; images are stored 8-bit."""
    directory = pathlib.Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    records = []
    for view in dataset.views:
        image_name = f"images/{view.name}.{image_format}"
        save_image(directory / image_name, view.image)
        records.append(_view_record(view, image_name))
    meta: dict[str, Any] = {
        "scene_id": dataset.scene_id,
        "version": FORMAT_VERSION,
        "views": records,
        "gaussians": CLOUD_FILE,
    }
    save_cloud(dataset.initial_cloud, directory / CLOUD_FILE)
    if dataset.ground_truth is not None:
        save_cloud(dataset.ground_truth, directory / GROUND_TRUTH_FILE)
        meta["ground_truth"] = GROUND_TRUTH_FILE
    (directory / SCENE_FILE).write_text(json.dumps(meta, indent=2), encoding="utf-8")
    logger.info("Saved scene %s to %s", dataset.scene_id, directory)
    return directory


def _matrix(record: dict, key: str, shape: tuple[int, ...], path: pathlib.Path) -> np.ndarray:
    try:
        values = np.asarray(record[key], dtype=np.float64)
    except KeyError as exc:
        raise SceneParseError(f"View is missing '{key}'", path=str(path)) from exc
    except (TypeError, ValueError) as exc:
        raise SceneParseError(f"View field '{key}' is not numeric", path=str(path)) from exc
    if values.size != int(np.prod(shape)):
        raise SceneParseError(f"View field '{key}' has {values.size} values", path=str(path))
    if not np.isfinite(values).all():
        raise SceneParseError(f"View field '{key}' is not finite", path=str(path))
    return values.reshape(shape)


def load_scene(directory: pathlib.Path | str) -> SceneDataset:
    directory = pathlib.Path(directory)
    meta_path = directory / SCENE_FILE
    try:
        text = meta_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SceneParseError(f"Cannot read {SCENE_FILE}: {exc}", path=str(meta_path)) from exc
    try:
        meta = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneParseError(f"Malformed JSON: {exc.msg}", path=str(meta_path), offset=exc.pos) from exc
    if not isinstance(meta, dict) or not isinstance(meta.get("views"), list) or not meta["views"]:
        raise SceneParseError("Missing camera block 'views'", path=str(meta_path))

    context, target = [], []
    for record in meta["views"]:
        if not isinstance(record, dict):
            raise SceneParseError("View entry is not an object", path=str(meta_path))
        K = _matrix(record, "intrinsics", (3, 3), meta_path)
        R = _matrix(record, "rotation", (3, 3), meta_path)
        t = _matrix(record, "translation", (3,), meta_path)
        image_path = directory / str(record.get("image", ""))
        if not image_path.is_file():
            raise SceneParseError(f"Missing image {image_path.name}", path=str(image_path))
        role = record.get("role", "context")
        try:
            view = View(K, R, t, load_image(image_path), role, str(record.get("name", image_path.stem)),
                        bool(record.get("allow_skew", False)))
        except ValueError as exc:
            raise SceneParseError(str(exc), path=str(meta_path)) from exc
        (target if view.role == "target" else context).append(view)

    if "gaussians" in meta:
        cloud = load_cloud(directory / meta["gaussians"])
    elif "points" in meta:
        points, colors = load_points(directory / meta["points"])
        cloud = sfm_init(points, colors)
        logger.info("Expanded %d SfM points into Gaussians.", cloud.count)
    else:
        raise SceneParseError("Scene names neither 'gaussians' nor 'points'", path=str(meta_path))
    ground_truth = load_cloud(directory / meta["ground_truth"]) if "ground_truth" in meta else None

    try:
        return SceneDataset(str(meta.get("scene_id", directory.name)), context, target, cloud, ground_truth)
    except ValueError as exc:
        raise SceneParseError(str(exc), path=str(meta_path)) from exc


__all__ = [
    "load_cloud",
    "load_points",
    "load_scene",
    "save_cloud",
    "save_points",
    "save_scene",
]
