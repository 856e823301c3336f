"""JSON document family for plants, partitions, controllers, and results.

Matrices are dense row-major nested lists; every document carries a "type"
tag.  Large plant matrices can optionally be exported in Matrix Market
format as sidecar files next to the main document.  CSV emission formats
floats with repr so identical values give byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import json
import platform
import time
from pathlib import Path

import numpy as np
import scipy

from .plant import GeneralizedPlant, Subsystem
from .projection import ClusterPartition, WeightVectors
from .statespace import StateSpace
from .synthesis import HierarchicalController

__all__ = [
    "save_plant", "load_plant", "save_partition", "load_partition",
    "save_controller", "load_controller", "write_manifest", "write_csv",
    "config_hash",
]


def _mat(m) -> list:
    return np.asarray(m, float).tolist()


def _dump(doc: dict, path) -> None:
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _load(path) -> dict:
    return json.loads(Path(path).read_text())


def save_plant(g: GeneralizedPlant, path, matrix_format: str = "json") -> None:
    """Write a plant document; matrix_format 'mm' stores the matrices as
    Matrix Market sidecar files referenced from the JSON."""
    path = Path(path)
    mats = {"a": g.a, "b1": g.b1, "b2": g.b2, "c1": g.c1, "c2": g.c2,
            "d12": g.d12, "d21": g.d21}
    doc = {
        "type": "generalized_plant",
        "subsystems": [
            {"states": list(s.states), "inputs": list(s.inputs),
             "outputs": list(s.outputs)} for s in g.subsystems
        ],
    }
    if matrix_format == "json":
        doc.update({k: _mat(v) for k, v in mats.items()})
    elif matrix_format == "mm":
        from scipy.io import mmwrite
        doc["matrix_files"] = {}
        for k, v in mats.items():
            side = path.with_suffix(f".{k}.mtx")
            mmwrite(str(side), np.asarray(v))
            doc["matrix_files"][k] = side.name
    else:
        raise ValueError(f"unknown matrix_format {matrix_format!r}")
    _dump(doc, path)


def load_plant(path) -> GeneralizedPlant:
    path = Path(path)
    doc = _load(path)
    if doc.get("type") != "generalized_plant":
        raise ValueError(f"{path} is not a plant document")
    if "matrix_files" in doc:
        from scipy.io import mmread
        mats = {k: np.asarray(mmread(str(path.parent / fname)))
                for k, fname in doc["matrix_files"].items()}
    else:
        mats = {k: np.asarray(doc[k], float)
                for k in ("a", "b1", "b2", "c1", "c2", "d12", "d21")}
    subsystems = tuple(
        Subsystem(states=tuple(s["states"]), inputs=tuple(s["inputs"]),
                  outputs=tuple(s["outputs"]))
        for s in doc["subsystems"])
    return GeneralizedPlant(subsystems=subsystems, **mats)


def save_partition(partition: ClusterPartition, path,
                   weights: WeightVectors | None = None) -> None:
    doc = {
        "type": "cluster_partition",
        "r": partition.r,
        "input_sets": [list(s) for s in partition.input_sets],
        "output_sets": [list(s) for s in partition.output_sets],
        "subsystem_sets": (None if partition.subsystem_sets is None
                           else [list(s) for s in partition.subsystem_sets]),
    }
    if weights is not None:
        doc["weights"] = {"w_u": weights.w_u.tolist(),
                          "w_y": weights.w_y.tolist()}
    _dump(doc, path)


def load_partition(path) -> tuple[ClusterPartition, WeightVectors | None]:
    doc = _load(path)
    if doc.get("type") != "cluster_partition":
        raise ValueError(f"{path} is not a partition document")
    partition = ClusterPartition(
        input_sets=tuple(tuple(s) for s in doc["input_sets"]),
        output_sets=tuple(tuple(s) for s in doc["output_sets"]),
        subsystem_sets=(None if doc.get("subsystem_sets") is None
                        else tuple(tuple(s) for s in doc["subsystem_sets"])))
    weights = None
    if "weights" in doc:
        weights = WeightVectors(np.asarray(doc["weights"]["w_u"]),
                                np.asarray(doc["weights"]["w_y"]))
    return partition, weights


def save_controller(controller: HierarchicalController, path) -> None:
    k = controller.k_tilde
    doc = {
        "type": "hierarchical_controller",
        "p_u": _mat(controller.p_u),
        "p_y": _mat(controller.p_y),
        "k_tilde": {"a": _mat(k.a), "b": _mat(k.b), "c": _mat(k.c),
                    "d": _mat(k.d)},
    }
    _dump(doc, path)


def load_controller(path) -> HierarchicalController:
    doc = _load(path)
    if doc.get("type") != "hierarchical_controller":
        raise ValueError(f"{path} is not a controller document")
    kt = doc["k_tilde"]
    return HierarchicalController(
        p_u=np.asarray(doc["p_u"], float),
        k_tilde=StateSpace(np.asarray(kt["a"], float), np.asarray(kt["b"], float),
                           np.asarray(kt["c"], float), np.asarray(kt["d"], float)),
        p_y=np.asarray(doc["p_y"], float))


def config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def write_manifest(out_dir, config: dict, seed: int | None,
                   wall_clock_s: float) -> Path:
    """Record config hash, seed, versions, and wall clock for one run."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    from . import __version__
    doc = {
        "config_hash": config_hash(config),
        "config": config,
        "seed": seed,
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "hierh2": __version__,
        },
        "wall_clock_s": wall_clock_s,
        "finished_unix": time.time(),
    }
    path = out_dir / "manifest.json"
    _dump(doc, path)
    return path


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return str(value)


def write_csv(path, fieldnames: list[str], rows: list[dict]) -> Path:
    """Deterministic CSV: fixed column order, repr-formatted floats."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_fmt(row.get(k)) for k in fieldnames])
    return path
