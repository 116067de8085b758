"""Named parameter storage, initialization and the WFCKPT01 checkpoint format."""

from __future__ import annotations

import json
import math
from collections import OrderedDict
from pathlib import Path

import numpy as np

from .tensor import Tensor

CKPT_MAGIC = b"WFCKPT01"
CKPT_VERSION = 1
MANIFEST_NAME = "params.json"
BLOB_NAME = "params.bin"


class CheckpointError(ValueError):
    pass


class ParamStore:
    """Ordered ``name -> Tensor`` map of trainable parameters."""

    def __init__(self, dtype=np.float64):
        self.dtype = np.dtype(dtype)
        self._params: OrderedDict[str, Tensor] = OrderedDict()

    def add(self, name: str, value) -> Tensor:
        if name in self._params:
            raise KeyError(f"duplicate parameter name {name!r}")
        t = Tensor(np.array(value, dtype=self.dtype), requires_grad=True, name=name)
        self._params[name] = t
        return t

    def uniform(self, name: str, shape, fan_in: int, rng: np.random.Generator) -> Tensor:
        """Add a parameter drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in))."""
        bound = 1.0 / math.sqrt(fan_in)
        return self.add(name, rng.uniform(-bound, bound, size=shape))

    def he_uniform(self, name: str, shape, fan_in: float, rng: np.random.Generator) -> Tensor:
        """Add a parameter drawn from U(-sqrt(6/fan_in), sqrt(6/fan_in)), suited to ReLU layers."""
        bound = math.sqrt(6.0 / fan_in)
        return self.add(name, rng.uniform(-bound, bound, size=shape))

    def zeros(self, name: str, shape) -> Tensor:
        return self.add(name, np.zeros(shape))

    def __getitem__(self, name) -> Tensor:
        return self._params[name]

    def __contains__(self, name):
        return name in self._params

    def __iter__(self):
        return iter(self._params)

    def __len__(self):
        return len(self._params)

    def names(self):
        return list(self._params)

    def items(self):
        return self._params.items()

    def values(self):
        return self._params.values()

    @property
    def num_params(self) -> int:
        return sum(t.size for t in self._params.values())

    def zero_grad(self):
        for t in self._params.values():
            t.grad = np.zeros_like(t.data)

    def clear_grad(self):
        for t in self._params.values():
            t.grad = None

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: t.data.copy() for k, t in self._params.items()}

    def load_arrays(self, arrays: dict[str, np.ndarray]):
        for k, t in self._params.items():
            if k not in arrays:
                raise KeyError(f"missing parameter {k!r}")
            a = np.asarray(arrays[k])
            if a.shape != t.shape:
                raise ValueError(f"{k}: shape {a.shape} != {t.shape}")
            t.data = a.astype(self.dtype, copy=True)

    def astype(self, dtype) -> "ParamStore":
        out = ParamStore(dtype)
        for k, t in self._params.items():
            out.add(k, t.data)
        return out

    def save(self, directory) -> None:
        """Write ``params.json`` (manifest) and ``params.bin`` (raw little-endian blob)."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        le = self.dtype.newbyteorder("<")
        chunks, entries, offset = [CKPT_MAGIC], [], len(CKPT_MAGIC)
        for name, t in self._params.items():
            raw = np.ascontiguousarray(t.data, dtype=le).tobytes()
            entries.append({"name": name, "shape": list(t.shape), "offset": offset, "nbytes": len(raw)})
            chunks.append(raw)
            offset += len(raw)
        manifest = {
            "magic": CKPT_MAGIC.decode(),
            "version": CKPT_VERSION,
            "dtype": self.dtype.name,
            "blob": BLOB_NAME,
            "tensors": entries,
        }
        (directory / BLOB_NAME).write_bytes(b"".join(chunks))
        (directory / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2) + "\n")

    @classmethod
    def load(cls, directory) -> "ParamStore":
        directory = Path(directory)
        try:
            manifest = json.loads((directory / MANIFEST_NAME).read_text())
        except FileNotFoundError:
            raise CheckpointError(f"no {MANIFEST_NAME} in {directory}") from None
        if manifest.get("magic") != CKPT_MAGIC.decode():
            raise CheckpointError(f"manifest magic {manifest.get('magic')!r} != {CKPT_MAGIC.decode()!r}")
        if manifest.get("version") != CKPT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {manifest.get('version')!r}")
        dtype = np.dtype(manifest["dtype"])
        blob = (directory / manifest.get("blob", BLOB_NAME)).read_bytes()
        if blob[: len(CKPT_MAGIC)] != CKPT_MAGIC:
            raise CheckpointError("blob magic mismatch")
        store = cls(dtype)
        le = dtype.newbyteorder("<")
        for e in manifest["tensors"]:
            n = int(np.prod(e["shape"], dtype=np.int64)) * dtype.itemsize
            if e["nbytes"] != n or e["offset"] + n > len(blob):
                raise CheckpointError(f"tensor {e['name']!r}: bad length/offset")
            arr = np.frombuffer(blob, dtype=le, count=n // dtype.itemsize, offset=e["offset"])
            store.add(e["name"], arr.reshape(e["shape"]).astype(dtype))
        return store
