"""Binary volume files and slice ingestion.

Layout: magic "RIMV", version byte, domain flag (0 image / 1 k-space),
u32 coil count, three u32 spatial dims, then complex samples as interleaved
little-endian float32 pairs in C order (coil, d0, d1, d2).  A text sidecar
(`<path>.meta`) records modality, normalization constant, and provenance.
"""

import struct

import numpy as np

from ..errors import ParseError, ShapeError

_MAGIC = b"RIMV"
_VERSION = 1
_HEADER = struct.Struct("<4sBBIIII")

DOMAIN_IMAGE = 0
DOMAIN_KSPACE = 1


def write_sidecar(path, meta):
    with open(str(path) + ".meta", "w") as fh:
        for key, value in meta.items():
            fh.write(f"{key} = {value}\n")


def read_sidecar(path):
    meta = {}
    try:
        with open(str(path) + ".meta") as fh:
            for line in fh:
                if "=" in line:
                    key, value = line.split("=", 1)
                    meta[key.strip()] = value.strip()
    except FileNotFoundError:
        pass
    return meta


def save_volume(data, path, domain=DOMAIN_IMAGE, meta=None):
    """Write a (coils, d0, d1, d2) or (d0, d1, d2) or (H, W) complex block."""
    data = np.asarray(data, dtype=np.complex64)
    if data.ndim == 2:
        data = data[None, None]
    elif data.ndim == 3:
        data = data[None]
    if data.ndim != 4:
        raise ShapeError(f"expected up to 4 dims, got {data.shape}")
    coils, d0, d1, d2 = data.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, domain, coils, d0, d1, d2))
        interleaved = np.empty(data.size * 2, dtype="<f4")
        flat = data.ravel()
        interleaved[0::2] = flat.real
        interleaved[1::2] = flat.imag
        fh.write(interleaved.tobytes())
    side = {"normalization": 1.0, "modality": "synthetic", "freq_axis": 0}
    side.update(meta or {})
    if float(side["normalization"]) <= 0:
        raise ShapeError("normalization constant must be > 0")
    write_sidecar(path, side)


def load_volume(path):
    """Returns (data (coils,d0,d1,d2) complex64, domain flag, sidecar dict)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ParseError("truncated volume header", len(raw))
    magic, version, domain, coils, d0, d1, d2 = _HEADER.unpack_from(raw, 0)
    if magic != _MAGIC:
        raise ParseError(f"bad magic {magic!r}", 0)
    if version != _VERSION:
        raise ParseError(f"unsupported version {version}", 4)
    count = coils * d0 * d1 * d2
    expected = _HEADER.size + 8 * count
    if len(raw) != expected:
        raise ParseError(f"payload length {len(raw) - _HEADER.size} != {8 * count}",
                         min(len(raw), expected))
    pairs = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size)
    data = (pairs[0::2] + 1j * pairs[1::2]).astype(np.complex64).reshape(coils, d0, d1, d2)
    return data, domain, read_sidecar(path)


def slice_ingest(path):
    """Stream 2-D slices from a 3-D volume file.

    Applies a 1-D centered inverse FFT along the declared frequency-encoding
    axis (sidecar key ``freq_axis``, default 0), then yields slices along that
    axis; the two remaining axes are the phase-encoding plane.
    """
    data, domain, meta = load_volume(path)
    freq_axis = int(meta.get("freq_axis", 0))
    if freq_axis not in (0, 1, 2):
        raise ParseError(f"invalid freq_axis {freq_axis}", 0)
    volume = data.astype(np.complex128)
    axis = 1 + freq_axis  # skip the coil axis
    if domain == DOMAIN_KSPACE:
        shifted = np.fft.ifftshift(volume, axes=axis)
        volume = np.fft.fftshift(np.fft.ifft(shifted, axis=axis, norm="ortho"), axes=axis)
    volume = np.moveaxis(volume, axis, 1)
    for idx in range(volume.shape[1]):
        yield idx, volume[:, idx]
