"""Binary model checkpoints.

Layout (all integers little-endian u32 unless noted)::

    b"SBND"  version  K  d  num_classes  kind  in_channels  n_blocks  channels[n_blocks]
    u64 parameter count
    float64 LE parameters, each tensor flattened C-order, in declaration order

``kind`` is 0 for a single-encoder model, 1 for a dual model and 2 for a
dual model whose branches share one encoder, plus ``NO_PROJ_BIAS`` / ``NO_PROJ`` when
the encoders were built without a projection bias or without a projection. ``K`` is the band count the
model was trained with (0 when unknown, e.g. ERM).
"""

import struct

import numpy as np

from .model import DualModel, EncoderConfig, SingleModel

MAGIC = b"SBND"
VERSION = 1
NO_PROJ_BIAS = 0x100
NO_PROJ = 0x200
_LE_F64 = np.dtype("<f8")


class CheckpointError(ValueError):
    pass


def _kind(model):
    if isinstance(model, DualModel):
        return 2 if model.shared else 1
    if isinstance(model, SingleModel):
        return 0
    raise TypeError(f"cannot checkpoint {type(model).__name__}")


def to_bytes(model, k=0):
    enc = model.encoder_config
    kind = _kind(model) | (0 if enc.projection_bias else NO_PROJ_BIAS) | (0 if enc.projection else NO_PROJ)
    header = [VERSION, k, enc.feature_dim, model.num_classes, kind,
              enc.in_channels, len(enc.channels), *enc.channels]
    params = model.parameters()
    count = sum(p.value.size for p in params)
    out = [MAGIC, struct.pack(f"<{len(header)}I", *header), struct.pack("<Q", count)]
    out += [np.ascontiguousarray(p.value, dtype=_LE_F64).tobytes() for p in params]
    return b"".join(out)


def from_bytes(data):
    """Rebuild a model from checkpoint bytes; returns ``(model, k)``."""
    if data[:4] != MAGIC:
        raise CheckpointError("not a checkpoint (bad magic)")
    pos = 4

    def u32s(n):
        nonlocal pos
        if pos + 4 * n > len(data):
            raise CheckpointError("truncated header")
        vals = struct.unpack_from(f"<{n}I", data, pos)
        pos += 4 * n
        return vals

    version, k, d, num_classes, kind, in_ch, n_blocks = u32s(7)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    channels = u32s(n_blocks)
    if pos + 8 > len(data):
        raise CheckpointError("truncated header")
    (count,) = struct.unpack_from("<Q", data, pos)
    pos += 8

    flags = kind
    kind &= ~(NO_PROJ_BIAS | NO_PROJ)
    try:
        enc = EncoderConfig(in_channels=in_ch, channels=channels, feature_dim=d,
                            projection=not flags & NO_PROJ, projection_bias=not flags & NO_PROJ_BIAS)
    except ValueError as e:
        raise CheckpointError(f"bad layer config: {e}") from None
    if kind == 0:
        model = SingleModel(num_classes, enc, seed=0)
    elif kind in (1, 2):
        model = DualModel(num_classes, enc, seed=0, shared=kind == 2)
    else:
        raise CheckpointError(f"unknown model kind {kind}")
    params = model.parameters()
    expected = sum(p.value.size for p in params)
    if count != expected or len(data) - pos != 8 * count:
        raise CheckpointError(f"parameter payload mismatch: header says {count}, architecture needs {expected}")
    flat = np.frombuffer(data, dtype=_LE_F64, count=count, offset=pos)
    i = 0
    for p in params:
        n = p.value.size
        p.value[...] = flat[i:i + n].reshape(p.value.shape)
        i += n
    return model, k


def save(model, path, k=0):
    with open(path, "wb") as f:
        f.write(to_bytes(model, k))


def load(path):
    with open(path, "rb") as f:
        return from_bytes(f.read())
