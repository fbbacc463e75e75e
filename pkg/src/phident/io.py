"""JSON interchange for frequency response data and pH models.

Both documents are written canonically (sorted keys, fixed indentation,
shortest round-trip float repr), so loading a file and saving it again
reproduces it byte for byte.
"""

from __future__ import annotations

import json
import math
import os
from typing import Optional, Tuple

import numpy as np

from .core import PHSystem
from .exceptions import DimensionError, FormatError, InputError
from .passivity import validate_ph_structure
from .transfer import FrdDataset

MODEL_FORMAT = "ph-v1"
LOAD_TOL = 1e-8


def _clean(obj):
    """Make ``obj`` JSON-safe: numpy scalars/arrays to Python, non-finite floats to ``None``."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dumps(doc: dict) -> str:
    return json.dumps(_clean(doc), sort_keys=True, indent=1, allow_nan=False) + "\n"


def _write(path, doc: dict) -> None:
    text = dumps(doc)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {os.fspath(path)!r}: {exc.strerror or exc}") from None


def _read(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read {os.fspath(path)!r}: {exc.strerror or exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{os.fspath(path)}: not valid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise FormatError(f"{os.fspath(path)}: top level must be an object")
    return doc


def _int_field(doc, key, where) -> int:
    val = doc.get(key)
    if isinstance(val, bool) or not isinstance(val, int) or val < 0:
        raise FormatError(f"{where}: '{key}' must be a nonnegative integer")
    return val


# ---------------------------------------------------------------------------
# frequency response files
# ---------------------------------------------------------------------------

def frd_to_dict(data: FrdDataset) -> dict:
    p, m = data.shape
    samples = [
        {"omega": float(w), "H": [[[float(z.real), float(z.imag)] for z in row] for row in H]}
        for w, H in zip(data.omegas, data.responses)
    ]
    return {"m": m, "p": p, "samples": samples, "meta": dict(data.meta)}


def frd_from_dict(doc: dict, where: str = "FRD") -> FrdDataset:
    m = _int_field(doc, "m", where)
    p = _int_field(doc, "p", where)
    samples = doc.get("samples")
    if not isinstance(samples, list):
        raise FormatError(f"{where}: 'samples' must be an array")
    meta = doc.get("meta", {})
    if not isinstance(meta, dict):
        raise FormatError(f"{where}: 'meta' must be an object")
    omegas = np.empty(len(samples))
    H = np.empty((len(samples), p, m), dtype=complex)
    for k, smp in enumerate(samples):
        try:
            omegas[k] = float(smp["omega"])
            arr = np.asarray(smp["H"], dtype=float)
        except (KeyError, TypeError, ValueError):
            raise FormatError(f"{where}: sample {k} needs 'omega' and a numeric 'H'") from None
        if arr.shape != (p, m, 2):
            raise FormatError(f"{where}: sample {k} 'H' has shape {arr.shape}, expected {(p, m, 2)}")
        H[k] = arr[..., 0] + 1j * arr[..., 1]
    try:
        return FrdDataset(omegas, H, meta)
    except (InputError, DimensionError) as exc:
        raise FormatError(f"{where}: {exc}") from None


def save_frd(path, data: FrdDataset) -> None:
    _write(path, frd_to_dict(data))


def load_frd(path) -> FrdDataset:
    return frd_from_dict(_read(path), os.fspath(path))


# ---------------------------------------------------------------------------
# model files
# ---------------------------------------------------------------------------

def model_to_dict(sys: PHSystem, theta=None, provenance: Optional[dict] = None) -> dict:
    doc = {"format": MODEL_FORMAT, "n": sys.n, "m": sys.m}
    for k, mat in sys.matrices().items():
        doc[k] = mat.tolist()
    if theta is not None:
        doc["theta"] = [float(x) for x in np.asarray(theta, dtype=float).reshape(-1)]
    doc["provenance"] = dict(provenance or {})
    return doc


def model_from_dict(doc: dict, where: str = "model", validate: bool = True) -> Tuple[PHSystem, dict]:
    """Parse a model document; returns the system and the raw document.

    With ``validate`` the pH structure is checked at tolerance ``1e-8``.
    """
    if doc.get("format") != MODEL_FORMAT:
        raise FormatError(f"{where}: 'format' must be {MODEL_FORMAT!r}")
    n = _int_field(doc, "n", where)
    m = _int_field(doc, "m", where)
    shapes = {"E": (n, n), "J": (n, n), "R": (n, n), "B": (n, m), "P": (n, m), "S": (m, m), "N": (m, m)}
    mats = {}
    for k, shape in shapes.items():
        if k not in doc:
            raise FormatError(f"{where}: missing matrix '{k}'")
        try:
            arr = np.array(doc[k], dtype=float)
        except (TypeError, ValueError):
            raise FormatError(f"{where}: matrix '{k}' is not numeric") from None
        if arr.shape != shape:
            raise FormatError(f"{where}: matrix '{k}' has shape {arr.shape}, expected {shape}")
        if not np.all(np.isfinite(arr)):
            raise FormatError(f"{where}: matrix '{k}' has non-finite entries")
        mats[k] = arr
    sys = PHSystem(**mats)
    if validate:
        report = validate_ph_structure(sys, tol=LOAD_TOL)
        if not report:
            block = report.violation
            raise FormatError(f"{where}: stored matrices violate the pH structure in block {block}")
    return sys, doc


def save_model(path, sys: PHSystem, theta=None, provenance: Optional[dict] = None) -> None:
    _write(path, model_to_dict(sys, theta, provenance))


def load_model(path, validate: bool = True) -> PHSystem:
    return model_from_dict(_read(path), os.fspath(path), validate)[0]


def load_model_document(path, validate: bool = True) -> Tuple[PHSystem, dict]:
    return model_from_dict(_read(path), os.fspath(path), validate)


def resave(path_in, path_out) -> None:
    """Load either document type and write it back canonically."""
    doc = _read(path_in)
    if doc.get("format") == MODEL_FORMAT:
        save_model(path_out, *_parts(doc, os.fspath(path_in)))
    else:
        save_frd(path_out, frd_from_dict(doc, os.fspath(path_in)))


def _parts(doc, where):
    sys, raw = model_from_dict(doc, where)
    return sys, raw.get("theta"), raw.get("provenance")
