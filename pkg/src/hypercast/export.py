"""Export learned structure for inspection.

Every matrix goes out as a raw little-endian binary next to a JSON
sidecar describing shape, dtype and matrix-specific metadata, so the
files can be read back with nothing but numpy and json.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch

from .encoder import scale_index_entries
from .model import Forecaster


def write_matrix(base_path: str | Path, array: np.ndarray,
                 meta: dict | None = None) -> None:
    """Write ``<base>.bin`` (raw ``<f8``) and ``<base>.json``."""
    base_path = Path(base_path)
    arr = np.ascontiguousarray(np.asarray(array), dtype="<f8")
    base_path.with_suffix(".bin").write_bytes(arr.tobytes())
    sidecar = {"shape": list(arr.shape), "dtype": "<f8"}
    sidecar.update(meta or {})
    base_path.with_suffix(".json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n")


def read_matrix(base_path: str | Path) -> tuple[np.ndarray, dict]:
    base_path = Path(base_path)
    meta = json.loads(base_path.with_suffix(".json").read_text())
    arr = np.frombuffer(base_path.with_suffix(".bin").read_bytes(),
                        dtype=np.dtype(meta["dtype"])).reshape(meta["shape"])
    return arr, meta


def export_structures(model: Forecaster, out_dir: str | Path,
                      variable_names: list[str] | None = None) -> list[str]:
    """Dump adjacencies, assignments, group labels, hyperedge structure
    and fusion weights; returns the written base names."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    def emit(name: str, array, meta: dict | None = None) -> None:
        write_matrix(out_dir / name, array, meta)
        written.append(name)

    with torch.no_grad():
        pyramid = model.pyramid
        for j in range(1, pyramid.n_scales + 1):
            emit(f"A_{j}", pyramid.adjacency(j).numpy(),
                 {"kind": "adjacency", "spatial_scale": j})
        for j in range(1, pyramid.n_scales):
            assign = pyramid.assignment(j).numpy()
            emit(f"S_{j}", assign, {"kind": "assignment", "spatial_scale": j})
            labels = assign.argmax(axis=1).tolist()
            payload = {"kind": "group_labels", "spatial_scale": j,
                       "n_groups": assign.shape[1], "labels": labels}
            if j == 1 and variable_names is not None:
                payload["variable_names"] = variable_names
            (out_dir / f"labels_{j}.json").write_text(
                json.dumps(payload, indent=2, sort_keys=True) + "\n")
            written.append(f"labels_{j}")

        emit("fusion_weights", model.fusion.weights().numpy(),
             {"kind": "fusion_weights",
              "rows": "spatial scale", "cols": "temporal scale"})

        if model.hypergraph is not None:
            entries = scale_index_entries(
                pyramid.node_counts, model.cfg.temporal_scales)
            emit("incidence", model.hypergraph.sparse_incidence().numpy(),
                 {"kind": "sparse_incidence",
                  "index_map": [list(e) for e in entries],
                  "index_map_fields": ["spatial_scale", "temporal_scale", "node"]})
            emit("edge_graph", model.hypergraph.edge_graph().numpy(),
                 {"kind": "hyperedge_adjacency"})
    return written
