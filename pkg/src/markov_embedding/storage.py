"""
JSON/CSV persistence for datasets, fitted models and reports.

Complex numbers are stored as ``[re, im]`` pairs. Every file is written to a
temporary sibling first and renamed into place.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .embedding import ED_TOL, EmbeddingModel, ThresholdConfig
from .errors import FileFormatError
from .logger import get_logger
from .models import TrajectoryDataset

logger = get_logger(__name__)

FORMAT_VERSION = 1
SUPPORTED_VERSIONS = (1,)


# ---------------------------------------------------------------------------
# Low-level helpers
# ---------------------------------------------------------------------------


def atomic_write_text(path: Path | str, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return path


def write_json(path: Path | str, data: Any, *, compact: bool = False) -> Path:
    if compact:
        text = json.dumps(data, ensure_ascii=False, separators=(",", ":"))
    else:
        text = json.dumps(data, ensure_ascii=False, indent=2)
    return atomic_write_text(path, text + "\n")


def read_json(path: Path | str) -> Any:
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path}: invalid JSON ({exc})") from exc


def write_csv(path: Path | str, fieldnames: Sequence[str], rows: Sequence[Dict[str, Any]]) -> Path:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(fieldnames), extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return atomic_write_text(path, buf.getvalue())


def file_fingerprint(path: Path | str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def encode_complex(arr: np.ndarray) -> list:
    arr = np.asarray(arr, dtype=complex)
    return np.stack([arr.real, arr.imag], axis=-1).tolist()


def decode_complex(data: Any, shape: Optional[Tuple[int, ...]] = None, what: str = "array") -> np.ndarray:
    raw = np.asarray(data, dtype=float)
    if raw.ndim == 0 or raw.shape[-1] != 2:
        raise FileFormatError(f"{what}: expected [re, im] pairs, got shape {raw.shape}")
    arr = raw[..., 0] + 1j * raw[..., 1]
    if shape is not None and arr.shape != tuple(shape):
        raise FileFormatError(f"{what}: declared shape {tuple(shape)} but found {arr.shape}")
    return arr


def _check_version(data: Dict[str, Any], kind: str, source: str) -> None:
    if not isinstance(data, dict):
        raise FileFormatError(f"{source}: top-level JSON value must be an object")
    version = data.get("format_version")
    if version not in SUPPORTED_VERSIONS:
        raise FileFormatError(f"{source}: unsupported format_version {version!r}")
    if data.get("kind") != kind:
        raise FileFormatError(f"{source}: expected a {kind} file, found {data.get('kind')!r}")


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------


def dataset_to_dict(
    ds: TrajectoryDataset,
    *,
    clean_reference: Optional[str] = None,
    clean: Optional[TrajectoryDataset] = None,
) -> Dict[str, Any]:
    data: Dict[str, Any] = {
        "format_version": FORMAT_VERSION,
        "kind": "dataset",
        "model": ds.metadata,
        "d": ds.d,
        "tau": ds.tau,
        "L": ds.L,
        "T": ds.T,
        "noise_sigma": ds.noise_sigma,
        "trajectories": encode_complex(ds.trajectories),
    }
    if clean_reference is not None:
        data["clean_reference"] = clean_reference
    if clean is not None:
        if clean.trajectories.shape != ds.trajectories.shape:
            raise ValueError("Clean twin must have the same shape as the dataset")
        data["clean_trajectories"] = encode_complex(clean.trajectories)
    return data


def dataset_from_dict(
    data: Dict[str, Any], source: str = "<dataset>"
) -> Tuple[TrajectoryDataset, Optional[TrajectoryDataset], Optional[str]]:
    """Returns ``(dataset, inline clean twin or None, clean_reference or None)``."""
    _check_version(data, "dataset", source)
    try:
        d, L, T = int(data["d"]), int(data["L"]), int(data["T"])
        tau = float(data["tau"])
        sigma = float(data.get("noise_sigma", 0.0))
        meta = dict(data.get("model") or {})
        traj = decode_complex(data["trajectories"], (L, T, d, d), f"{source} trajectories")
    except KeyError as exc:
        raise FileFormatError(f"{source}: missing field {exc}") from exc
    ds = TrajectoryDataset(d=d, tau=tau, trajectories=traj, noise_sigma=sigma, metadata=meta)

    clean = None
    if "clean_trajectories" in data:
        clean_traj = decode_complex(
            data["clean_trajectories"], (L, T, d, d), f"{source} clean_trajectories"
        )
        clean = TrajectoryDataset(d=d, tau=tau, trajectories=clean_traj, metadata=dict(meta))
    return ds, clean, data.get("clean_reference")


def write_dataset(
    path: Path | str,
    ds: TrajectoryDataset,
    *,
    clean_path: Path | str | None = None,
    clean: Optional[TrajectoryDataset] = None,
) -> Path:
    path = Path(path)
    reference = None
    if clean_path is not None and ds.noise_sigma > 0:
        reference = os.path.relpath(Path(clean_path).resolve(), path.resolve().parent)
        reference = Path(reference).as_posix()
    inline = clean if clean is not None and ds.noise_sigma > 0 else None
    write_json(path, dataset_to_dict(ds, clean_reference=reference, clean=inline), compact=True)
    logger.info(f"Wrote dataset {path} (L={ds.L}, T={ds.T}, sigma={ds.noise_sigma:g})")
    return path


def read_dataset(
    path: Path | str, *, with_clean: bool = False
) -> TrajectoryDataset | Tuple[TrajectoryDataset, Optional[TrajectoryDataset]]:
    """
    Load a dataset file. With ``with_clean`` also resolve its clean twin
    (inline copy or ``clean_reference`` relative to the file).
    """
    path = Path(path)
    ds, clean, reference = dataset_from_dict(read_json(path), str(path))
    if not with_clean:
        return ds
    if clean is None and reference is not None:
        ref_path = path.parent / reference
        if ref_path.exists():
            clean = read_dataset(ref_path)
            if clean.trajectories.shape != ds.trajectories.shape:
                raise FileFormatError(f"{ref_path}: clean twin shape differs from {path}")
        else:
            logger.warning(f"Clean reference {ref_path} not found")
    if clean is None and ds.noise_sigma == 0:
        clean = ds
    return ds, clean


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------


def model_to_dict(
    model: EmbeddingModel,
    *,
    fingerprint: Optional[str] = None,
    variant: str = "projected",
    project: bool = False,
) -> Dict[str, Any]:
    return {
        "format_version": FORMAT_VERSION,
        "kind": "model",
        "r": model.r,
        "K": model.K,
        "d": model.d,
        "tau": model.tau,
        "variant": variant,
        "project": bool(project),
        "threshold": {"sigma": model.threshold.sigma, "floor": model.threshold.floor},
        "eigenvalues": encode_complex(model.eigenvalues),
        "E": encode_complex(model.E),
        "D": encode_complex(model.D),
        "singular_values": [float(s) for s in model.singular_values],
        "fingerprint": fingerprint,
    }


def model_from_dict(data: Dict[str, Any], source: str = "<model>") -> EmbeddingModel:
    _check_version(data, "model", source)
    try:
        r, K, d = int(data["r"]), int(data["K"]), int(data["d"])
        n = K * d * d
        eig = decode_complex(data["eigenvalues"], (r,), f"{source} eigenvalues")
        E = decode_complex(data["E"], (r, n), f"{source} E")
        D = decode_complex(data["D"], (n, r), f"{source} D")
        thr = data.get("threshold") or {}
        model = EmbeddingModel(
            r=r,
            K=K,
            d=d,
            eigenvalues=eig,
            E=E,
            D=D,
            singular_values=np.asarray(data.get("singular_values", []), dtype=float),
            threshold=ThresholdConfig(
                sigma=float(thr.get("sigma", 0.0)), floor=float(thr.get("floor", 1e-12))
            ),
            tau=float(data.get("tau", 1.0)),
        )
    except KeyError as exc:
        raise FileFormatError(f"{source}: missing field {exc}") from exc

    dev = model.ed_deviation()
    if dev > ED_TOL:
        raise FileFormatError(f"{source}: |ED - I| = {dev:.3e} exceeds {ED_TOL:g}")
    moduli = np.abs(eig)
    if np.any(np.diff(moduli) > 1e-12):
        raise FileFormatError(f"{source}: eigenvalues are not sorted by descending modulus")
    return model


def write_model(
    path: Path | str,
    model: EmbeddingModel,
    *,
    fingerprint: Optional[str] = None,
    variant: str = "projected",
    project: bool = False,
) -> Path:
    path = Path(path)
    write_json(path, model_to_dict(model, fingerprint=fingerprint, variant=variant, project=project), compact=True)
    logger.info(f"Wrote model {path} (r={model.r}, K={model.K})")
    return path


def read_model(path: Path | str) -> Tuple[EmbeddingModel, Dict[str, Any]]:
    """Returns the model and the raw header fields (fingerprint, variant, project)."""
    path = Path(path)
    data = read_json(path)
    model = model_from_dict(data, str(path))
    header = {
        "fingerprint": data.get("fingerprint"),
        "variant": data.get("variant", "projected"),
        "project": bool(data.get("project", False)),
    }
    return model, header


def complex_pairs(values: Sequence[complex] | np.ndarray) -> List[List[float]]:
    return encode_complex(np.asarray(values, dtype=complex))
