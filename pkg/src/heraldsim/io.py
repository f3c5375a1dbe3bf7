"""CSV and JSON artifacts with provenance headers.

CSV files start with ``#`` comment lines (tool version, config hash, seed),
then a mandatory header row.  Floats are written with ``repr`` so values
round-trip bit-exactly, and lines end in LF.  Nothing time-dependent is
written, so identical inputs give byte-identical files.
"""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from . import __version__
from .jsa import FrequencyGrid, JointSpectralAmplitude


def config_hash(obj) -> str:
    """SHA-256 of the canonical JSON form of ``obj``."""
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_jsonable)
    return hashlib.sha256(text.encode()).hexdigest()


def file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def provenance(cfg_hash: str, seed) -> dict:
    return {"tool": "heraldsim", "version": __version__, "config_sha256": cfg_hash, "seed": seed}


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, Path):
        return str(x)
    raise TypeError(f"cannot serialise {type(x).__name__}")


def _cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if x is None:
        return ""
    return str(x)


def write_csv(path, header: list[str], rows, prov: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for k in ("tool", "version", "config_sha256", "seed"):
            fh.write(f"# {k}: {prov.get(k, '')}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(x) for x in r])
    return path


def read_csv(path) -> tuple[dict, list[str], list[list[str]]]:
    """(provenance, header, rows as strings)."""
    prov = {}
    lines = Path(path).read_text(encoding="utf-8").split("\n")
    body = []
    for ln in lines:
        if ln.startswith("#"):
            k, _, v = ln[1:].strip().partition(":")
            prov[k.strip()] = v.strip()
        elif ln:
            body.append(ln)
    rows = list(csv.reader(body))
    if not rows:
        raise ValueError(f"{path}: missing header row")
    return prov, rows[0], rows[1:]


def write_json(path, obj, prov: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = dict(obj)
    if prov is not None:
        data["provenance"] = prov
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_jsonable) + "\n", encoding="utf-8")
    return path


def read_json(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


JSI_CORNER = "signal_rad_s\\idler_rad_s"


def write_jsi(path, jsa: JointSpectralAmplitude, prov: dict, extra: dict | None = None) -> tuple[Path, Path]:
    """JSI as CSV (first row idler axis, first column signal axis, cells |A|^2) plus a JSON sidecar."""
    path = Path(path)
    g = jsa.grid
    inten = jsa.intensity
    header = [JSI_CORNER] + [repr(float(x)) for x in g.idler_axis]
    rows = ([float(ws)] + [float(v) for v in inten[j]] for j, ws in enumerate(g.signal_axis))
    write_csv(path, header, rows, prov)
    side = {"grid": g.to_dict(), "mass": jsa.mass, "metadata": jsa.metadata}
    if extra:
        side.update(extra)
    sidecar = write_json(path.with_suffix(".json"), side, prov)
    return path, sidecar


def read_jsi(path) -> JointSpectralAmplitude:
    """Load a JSI CSV as a real amplitude sqrt(|A|^2).

    The grid comes from the JSON sidecar when present (bit-exact), else it
    is rebuilt from the axes in the file.
    """
    path = Path(path)
    _, header, rows = read_csv(path)
    idler = np.array([float(x) for x in header[1:]])
    data = np.array([[float(x) for x in r] for r in rows])
    signal, inten = data[:, 0], data[:, 1:]
    side = path.with_suffix(".json")
    meta = {}
    if side.exists():
        sd = read_json(side)
        grid = FrequencyGrid.from_dict(sd["grid"])
        meta = sd.get("metadata", {})
    else:
        grid = FrequencyGrid.from_axes(signal, idler)
    return JointSpectralAmplitude.from_intensity(grid, inten, meta)
