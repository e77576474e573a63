"""Model checkpoint container.

Layout: an ASCII header of ``key = value`` lines, starting with the magic
line and ending with ``end``, followed by the raw data of every declared
array in declaration order as row-major little-endian float64.  Boolean
masks are stored as 0.0/1.0.  Saving a loaded checkpoint reproduces the
file byte for byte.
"""

from __future__ import annotations

import io

import numpy as np

from .bilinear import BilinearModelKind
from .rtucker import CoreTensor, RTModel
from .sparsity import HardConcreteGates

MAGIC = "reltucker-checkpoint"
VERSION = 1
_DTYPE = np.dtype("<f8")
_GATE_CONSTANTS = ("beta", "zeta", "gamma", "loc_mean", "loc_std")


class CheckpointError(ValueError):
    pass


def _arrays(model: RTModel):
    yield "E", model.E
    yield "R", model.R
    if model.core is not None:
        yield "G", model.core.slices
        if model.core.fixed is not None:
            yield "G_fixed", model.core.fixed.astype(np.float64)
    if model.gates is not None:
        yield "gate_log_alpha", model.gates.log_alpha


def dumps(model: RTModel) -> bytes:
    header = [
        MAGIC,
        f"version = {VERSION}",
        f"kind = {model.kind}",
        f"N = {model.N}",
        f"K = {model.K}",
        f"d_e = {model.d_e}",
        f"d_r = {model.d_r}",
        f"bilinear = {model.bilinear.name if model.bilinear else '-'}",
        f"layout = {(model.bilinear.layout if model.bilinear else None) or '-'}",
        f"r_fixed = {int(model.r_fixed)}",
        f"gates = {int(model.gates is not None)}",
    ]
    if model.gates is not None:
        header += [f"{c} = {getattr(model.gates, c)!r}" for c in _GATE_CONSTANTS]
    arrays = list(_arrays(model))
    header += [f"array = {name} {' '.join(map(str, a.shape))}" for name, a in arrays]
    header.append("end")
    buf = io.BytesIO()
    buf.write(("\n".join(header) + "\n").encode("ascii"))
    for _, a in arrays:
        buf.write(np.ascontiguousarray(a, dtype=_DTYPE).tobytes())
    return buf.getvalue()


def save(model: RTModel, path) -> None:
    with open(path, "wb") as f:
        f.write(dumps(model))


def _parse_header(data: bytes):
    fields, arrays, pos = {}, [], 0
    lines = iter(data.split(b"\n"))
    try:
        first = next(lines)
        pos += len(first) + 1
        if first.decode("ascii") != MAGIC:
            raise CheckpointError("not a reltucker checkpoint (bad magic line)")
        for raw in lines:
            pos += len(raw) + 1
            line = raw.decode("ascii")
            if line == "end":
                return fields, arrays, pos
            key, sep, value = line.partition(" = ")
            if not sep:
                raise CheckpointError(f"malformed header line {line!r}")
            if key == "array":
                name, *dims = value.split()
                arrays.append((name, tuple(int(d) for d in dims)))
            else:
                fields[key] = value
    except UnicodeDecodeError:
        raise CheckpointError("checkpoint header is not ASCII") from None
    except ValueError as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"malformed checkpoint header: {exc}") from None
    raise CheckpointError("checkpoint header has no 'end' line")


def loads(data: bytes) -> RTModel:
    fields, specs, pos = _parse_header(data)
    try:
        if int(fields["version"]) != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {fields['version']}")
        dims = {k: int(fields[k]) for k in ("N", "K", "d_e", "d_r")}
        kind = fields["kind"]
        bilinear_name = fields["bilinear"]
        layout = fields["layout"]
        r_fixed = bool(int(fields["r_fixed"]))
        has_gates = bool(int(fields["gates"]))
    except KeyError as exc:
        raise CheckpointError(f"checkpoint header lacks field {exc.args[0]!r}") from None
    except ValueError as exc:
        raise CheckpointError(f"bad checkpoint header value: {exc}") from None

    arrays = {}
    for name, shape in specs:
        n = int(np.prod(shape)) * _DTYPE.itemsize
        if pos + n > len(data):
            raise CheckpointError(f"checkpoint truncated while reading array {name}")
        arrays[name] = np.frombuffer(data, dtype=_DTYPE, count=n // _DTYPE.itemsize, offset=pos).reshape(shape).astype(np.float64)
        pos += n
    if pos != len(data):
        raise CheckpointError(f"{len(data) - pos} trailing bytes after checkpoint arrays")

    try:
        bk = None
        if bilinear_name != "-":
            bk = BilinearModelKind(bilinear_name, dims["d_e"], None if layout == "-" else layout)
        core = None
        if "G" in arrays:
            fixed = arrays["G_fixed"].astype(bool) if "G_fixed" in arrays else None
            core = CoreTensor(arrays["G"], fixed)
        gates = None
        if has_gates:
            constants = {c: float(fields[c]) for c in _GATE_CONSTANTS}
            gates = HardConcreteGates(arrays["gate_log_alpha"], **constants)
        model = RTModel(E=arrays["E"], R=arrays["R"], core=core, bilinear=bk, r_fixed=r_fixed, gates=gates)
    except KeyError as exc:
        raise CheckpointError(f"checkpoint lacks array or field {exc.args[0]!r}") from None
    except ValueError as exc:
        raise CheckpointError(f"inconsistent checkpoint: {exc}") from None

    found = {"N": model.N, "K": model.K, "d_e": model.d_e, "d_r": model.d_r}
    if found != dims or model.kind != kind:
        raise CheckpointError(f"header declares {dims} kind={kind}, arrays give {found} kind={model.kind}")
    return model


def load(path) -> RTModel:
    with open(path, "rb") as f:
        return loads(f.read())
