# src/skillchain/nn/checkpoint.py
"""Binary checkpoint container.

    b"SKCK" | uint32 version | uint32 header length | header JSON (utf-8)
    then, for every tensor listed in the header in order, its values as
    little-endian float32 in row-major order.

The header is {"spec": {...}, "tensors": [{"name": ..., "shape": [...]}, ...]}.
"""
import json
import logging
import struct
from pathlib import Path
from typing import Dict, Mapping, Tuple, Union

import numpy as np
import torch

from ..errors import SchemaError

logger = logging.getLogger(__name__)

MAGIC = b"SKCK"
VERSION = 1


def save_checkpoint(path: Union[str, Path], spec: dict, tensors: Mapping[str, torch.Tensor]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # ascontiguousarray promotes 0-d to (1,)
    arrays = {k: np.ascontiguousarray(v.detach().cpu().numpy(), dtype="<f4").reshape(tuple(v.shape))
              for k, v in tensors.items()}
    header = json.dumps({"spec": spec, "tensors": [{"name": k, "shape": list(a.shape)} for k, a in arrays.items()]},
                        sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(header)))
        f.write(header)
        for a in arrays.values():
            f.write(a.tobytes())
    logger.debug("wrote checkpoint %s (%d tensors)", path, len(arrays))
    return path


def load_checkpoint(path: Union[str, Path]) -> Tuple[dict, Dict[str, torch.Tensor]]:
    path = Path(path)
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != MAGIC:
        raise SchemaError(str(path), ["not a skillchain checkpoint"])
    version, hlen = struct.unpack("<II", data[4:12])
    if version != VERSION:
        raise SchemaError(str(path), [f"unsupported checkpoint version {version}"])
    header = json.loads(data[12:12 + hlen].decode("utf-8"))
    offset = 12 + hlen
    tensors: Dict[str, torch.Tensor] = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        n = int(np.prod(shape)) if shape else 1
        block = np.frombuffer(data, dtype="<f4", count=n, offset=offset).reshape(shape)
        tensors[entry["name"]] = torch.from_numpy(block.astype(np.float32))
        offset += 4 * n
    if offset != len(data):
        raise SchemaError(str(path), [f"{len(data) - offset} trailing bytes after the last tensor"])
    return header["spec"], tensors


def save_module(module: torch.nn.Module, spec: dict, path: Union[str, Path]) -> Path:
    return save_checkpoint(path, spec, module.state_dict())


def load_module(module: torch.nn.Module, path: Union[str, Path]) -> dict:
    """Load tensors into an already-built module; returns the stored spec."""
    spec, tensors = load_checkpoint(path)
    own = module.state_dict()
    missing = sorted(set(own) - set(tensors))
    unexpected = sorted(set(tensors) - set(own))
    if missing or unexpected:
        raise SchemaError(str(path), [f"missing {missing}", f"unexpected {unexpected}"])
    module.load_state_dict({k: tensors[k].to(own[k].dtype).reshape(own[k].shape) for k in own})
    return spec
