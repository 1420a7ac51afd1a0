"""GNNWM1 JSON checkpoints.

Tensors are stored as flat row-major arrays with their shapes; floats use
Python's shortest round-trip repr, so save/load is bit-exact.
"""

from __future__ import annotations

import json
import math
import os
from typing import Optional, Tuple, Union

import numpy as np

from .sage import PARAM_NAMES, SageModel, TrainConfig

CHECKPOINT_FORMAT = "GNNWM1"


class CheckpointError(ValueError):
    pass


def model_to_dict(
    m: SageModel,
    config: Optional[TrainConfig] = None,
    seed: Optional[int] = None,
    epoch: Optional[int] = None,
    extra: Optional[dict] = None,
) -> dict:
    d, h, c = m.dims
    doc = {
        "format": CHECKPOINT_FORMAT,
        "dims": {"D": d, "H": h, "C": c},
        "config": config.to_dict() if config is not None else None,
        "seed": seed,
        "epoch": epoch,
        "tensors": {
            name: {"shape": list(arr.shape), "data": arr.ravel().tolist()}
            for name, arr in m.params().items()
        },
    }
    if extra:
        doc["extra"] = extra
    return doc


def model_from_dict(doc: dict) -> SageModel:
    if not isinstance(doc, dict):
        raise CheckpointError(f"checkpoint must be a JSON object, got {type(doc).__name__}")
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"unsupported checkpoint format {doc.get('format')!r}")
    try:
        dims = doc["dims"]
        d, h, c = int(dims["D"]), int(dims["H"]), int(dims["C"])
        tensors = doc["tensors"]
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f"missing checkpoint field {exc}") from None
    expected = {
        "w1": [d, h], "b1": [h], "w2": [h, h], "b2": [h], "w_out": [h, c], "b_out": [c],
    }
    arrays = {}
    for name in PARAM_NAMES:
        if name not in tensors:
            raise CheckpointError(f"checkpoint lacks tensor {name}")
        shape = [int(s) for s in tensors[name]["shape"]]
        if shape != expected[name]:
            raise CheckpointError(f"{name} has shape {shape}, dims imply {expected[name]}")
        data = np.asarray(tensors[name]["data"], dtype=np.float64)
        if data.size != math.prod(shape):
            raise CheckpointError(f"{name} holds {data.size} values for shape {shape}")
        if not np.all(np.isfinite(data)):
            raise CheckpointError(f"{name} contains non-finite values")
        arrays[name] = data.reshape(shape)
    return SageModel(**arrays)


def dumps_model(m: SageModel, **meta) -> str:
    return json.dumps(model_to_dict(m, **meta), separators=(",", ":"), allow_nan=False)


def save_model(path: Union[str, os.PathLike], m: SageModel, **meta) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_model(m, **meta))


def load_model(path: Union[str, os.PathLike]) -> Tuple[SageModel, dict]:
    """Returns the model and the raw document (for config/seed/extra metadata)."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CheckpointError(f"{path}: not valid JSON ({exc})") from None
    return model_from_dict(doc), doc
