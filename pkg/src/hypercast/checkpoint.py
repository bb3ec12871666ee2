"""Checkpoint directory format.

A checkpoint is a directory of three files:

* ``manifest.json`` — ordered list of tensor records
  ``{name, kind, shape, dtype, offset, nbytes}`` (kinds: ``param``,
  ``buffer``, ``adam.exp_avg``, ``adam.exp_avg_sq``);
* ``params.bin`` — the raw little-endian tensor bytes, concatenated in
  manifest order;
* ``meta.json`` — config (full field dump + hash), normalization stats,
  variable names, epoch and best validation loss, Adam step counts and
  hyperparameters.

Float64 tensors round-trip bit-exactly, so a reloaded model reproduces
forward passes bitwise on the same device.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .config import ModelConfig
from .data import NormStats
from .errors import LoadError
from .model import Forecaster

FORMAT_VERSION = 1

_DTYPE_STR = {torch.float64: "<f8", torch.float32: "<f4", torch.int64: "<i8"}


def _tensor_records(model: Forecaster, optimizer: torch.optim.Optimizer | None):
    """Yield (name, kind, tensor) in a deterministic order."""
    for name, p in model.named_parameters():
        yield name, "param", p.detach()
    for name, b in model.named_buffers():
        yield name, "buffer", b.detach()
    if optimizer is not None:
        param_names = {id(p): n for n, p in model.named_parameters()}
        for group in optimizer.param_groups:
            for p in group["params"]:
                state = optimizer.state.get(p)
                if not state:
                    continue
                name = param_names[id(p)]
                yield name, "adam.exp_avg", state["exp_avg"].detach()
                yield name, "adam.exp_avg_sq", state["exp_avg_sq"].detach()


def save_checkpoint(path: str | Path, model: Forecaster,
                    stats: NormStats | None = None,
                    optimizer: torch.optim.Optimizer | None = None,
                    epoch: int = 0, best_val_loss: float | None = None,
                    variable_names: list[str] | None = None) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)

    entries, blobs, offset = [], [], 0
    for name, kind, tensor in _tensor_records(model, optimizer):
        dtype = _DTYPE_STR[tensor.dtype]
        arr = np.ascontiguousarray(tensor.cpu().numpy(), dtype=np.dtype(dtype))
        raw = arr.tobytes()
        entries.append({"name": name, "kind": kind, "shape": list(tensor.shape),
                        "dtype": dtype, "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)

    adam_steps = {}
    adam_hyper = None
    if optimizer is not None:
        param_names = {id(p): n for n, p in model.named_parameters()}
        for group in optimizer.param_groups:
            for p in group["params"]:
                state = optimizer.state.get(p)
                if state:
                    adam_steps[param_names[id(p)]] = float(state["step"])
        g = optimizer.param_groups[0]
        adam_hyper = {"lr": g["lr"], "betas": list(g["betas"]),
                      "eps": g["eps"], "weight_decay": g["weight_decay"]}

    (path / "params.bin").write_bytes(b"".join(blobs))
    (path / "manifest.json").write_text(
        json.dumps({"format_version": FORMAT_VERSION, "entries": entries}, indent=2) + "\n")
    meta = {
        "format_version": FORMAT_VERSION,
        "config": model.cfg.to_dict(),
        "config_hash": model.cfg.config_hash(),
        "n_vars": model.n_vars,
        "variable_names": variable_names,
        "norm_stats": stats.to_dict() if stats is not None else None,
        "epoch": epoch,
        "best_val_loss": best_val_loss,
        "adam_steps": adam_steps,
        "adam_hyper": adam_hyper,
    }
    (path / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")


@dataclass
class CheckpointBundle:
    model: Forecaster
    config: ModelConfig
    stats: NormStats | None
    meta: dict
    optimizer: torch.optim.Optimizer | None = None


def load_checkpoint(path: str | Path, with_optimizer: bool = False) -> CheckpointBundle:
    path = Path(path)
    for fname in ("manifest.json", "params.bin", "meta.json"):
        if not (path / fname).exists():
            raise LoadError(f"checkpoint {path} is missing {fname}")
    manifest = json.loads((path / "manifest.json").read_text())
    meta = json.loads((path / "meta.json").read_text())
    raw = (path / "params.bin").read_bytes()

    def read_entry(entry) -> torch.Tensor:
        buf = raw[entry["offset"]:entry["offset"] + entry["nbytes"]]
        arr = np.frombuffer(buf, dtype=np.dtype(entry["dtype"])).reshape(entry["shape"])
        return torch.from_numpy(arr.copy())

    cfg = ModelConfig.from_dict(meta["config"])
    model = Forecaster(meta["n_vars"], cfg)

    state = {}
    adam_moments: dict[str, dict[str, torch.Tensor]] = {}
    for entry in manifest["entries"]:
        tensor = read_entry(entry)
        if entry["kind"] in ("param", "buffer"):
            state[entry["name"]] = tensor
        else:
            moment = entry["kind"].split(".", 1)[1]
            adam_moments.setdefault(entry["name"], {})[moment] = tensor
    if "dtw_affinity" in state and state["dtw_affinity"].numel():
        model.dtw_affinity = torch.zeros_like(state["dtw_affinity"])
    missing, unexpected = model.load_state_dict(state, strict=True)
    if missing or unexpected:
        raise LoadError(f"checkpoint mismatch: missing={missing} unexpected={unexpected}")

    stats = NormStats.from_dict(meta["norm_stats"]) if meta.get("norm_stats") else None

    optimizer = None
    if with_optimizer and meta.get("adam_hyper"):
        hyper = meta["adam_hyper"]
        optimizer = torch.optim.Adam(
            model.parameters(), lr=hyper["lr"], betas=tuple(hyper["betas"]),
            eps=hyper["eps"], weight_decay=hyper["weight_decay"])
        name_to_idx = {n: i for i, (n, _) in enumerate(model.named_parameters())}
        opt_state = {}
        for name, moments in adam_moments.items():
            opt_state[name_to_idx[name]] = {
                "step": torch.tensor(meta["adam_steps"][name]),
                "exp_avg": moments["exp_avg"],
                "exp_avg_sq": moments["exp_avg_sq"],
            }
        optimizer.load_state_dict({
            "state": opt_state,
            "param_groups": [{**optimizer.param_groups[0],
                              "params": list(range(len(name_to_idx)))}],
        })
    return CheckpointBundle(model=model, config=cfg, stats=stats,
                            meta=meta, optimizer=optimizer)
