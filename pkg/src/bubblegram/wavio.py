"""Minimal RIFF/WAVE reader and writer.

Reads integer PCM at 16, 24 or 32 bits and IEEE float32, plain or
WAVE_FORMAT_EXTENSIBLE, mono or multichannel. Integer samples are scaled by
``2**(bits - 1)`` so that full scale maps to [-1, 1).
"""

from __future__ import annotations

import os
import struct
import tempfile
import warnings
from pathlib import Path

import numpy as np

from .errors import ArgumentError, WavError
from .signal import Signal

FORMAT_PCM = 0x0001
FORMAT_FLOAT = 0x0003
FORMAT_EXTENSIBLE = 0xFFFE

_FORMAT_NAMES = {
    FORMAT_PCM: "PCM",
    FORMAT_FLOAT: "IEEE float",
    0x0002: "Microsoft ADPCM",
    0x0006: "A-law",
    0x0007: "mu-law",
    0x0011: "IMA ADPCM",
    0x0055: "MPEG layer 3",
}


def _encoding_name(tag: int, bits: int) -> str:
    return f"{_FORMAT_NAMES.get(tag, f'format tag 0x{tag:04x}')} {bits}-bit"


def atomic_write_bytes(path, data: bytes):
    """Write ``data`` to ``path`` through a temporary file and rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _decode(payload: bytes, tag: int, bits: int, channels: int) -> np.ndarray:
    if tag == FORMAT_PCM and bits == 16:
        x = np.frombuffer(payload, "<i2").astype(float) / 32768.0
    elif tag == FORMAT_PCM and bits == 24:
        raw = np.frombuffer(payload, np.uint8).reshape(-1, 3).astype(np.int32)
        ints = raw[:, 0] | (raw[:, 1] << 8) | (raw[:, 2] << 16)
        ints = np.where(ints >= 1 << 23, ints - (1 << 24), ints)
        x = ints.astype(float) / float(1 << 23)
    elif tag == FORMAT_PCM and bits == 32:
        x = np.frombuffer(payload, "<i4").astype(float) / 2147483648.0
    elif tag == FORMAT_FLOAT and bits == 32:
        x = np.frombuffer(payload, "<f4").astype(float)
    else:
        raise WavError(f"unsupported WAV encoding: {_encoding_name(tag, bits)}")
    return x.reshape(-1, channels)


def read_wav(path, channel: int = 0) -> Signal:
    """Read one channel of a WAV file as a :class:`Signal`."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise WavError(f"{path}: {exc.strerror or exc}") from exc
    if len(blob) < 12 or blob[:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise WavError(f"{path}: not a RIFF/WAVE file")
    pos = 12
    fmt = None
    data = None
    while pos + 8 <= len(blob):
        cid, size = struct.unpack_from("<4sI", blob, pos)
        body = pos + 8
        if body + size > len(blob):
            if cid == b"data":
                raise WavError(
                    f"{path}: truncated data chunk at byte offset {pos}: declares "
                    f"{size} bytes, {len(blob) - body} present"
                )
            raise WavError(
                f"{path}: truncated {cid.decode('latin-1')!r} chunk at byte offset {pos}"
            )
        if cid == b"fmt ":
            if size < 16:
                raise WavError(f"{path}: fmt chunk at byte offset {pos} is too short")
            tag, channels, rate, _, block, bits = struct.unpack_from("<HHIIHH", blob, body)
            if tag == FORMAT_EXTENSIBLE:
                if size < 40:
                    raise WavError(f"{path}: extensible fmt chunk at byte offset {pos} is too short")
                (tag,) = struct.unpack_from("<H", blob, body + 24)
            fmt = (tag, channels, rate, block, bits)
        elif cid == b"data":
            data = (pos, blob[body:body + size])
        pos = body + size + (size & 1)
    if fmt is None:
        raise WavError(f"{path}: no fmt chunk")
    if data is None:
        raise WavError(f"{path}: no data chunk")
    tag, channels, rate, block, bits = fmt
    if channels < 1 or rate < 1:
        raise WavError(f"{path}: invalid header ({channels} channels, {rate} Hz)")
    if block != channels * ((bits + 7) // 8):
        raise WavError(f"{path}: block align {block} inconsistent with {channels} x {bits}-bit")
    offset, payload = data
    if len(payload) % block:
        whole = len(payload) - len(payload) % block
        raise WavError(
            f"{path}: truncated sample frame at byte offset {offset + 8 + whole} "
            f"({len(payload) % block} stray bytes)"
        )
    frames = _decode(payload, tag, bits, channels)
    if not 0 <= channel < channels:
        raise ArgumentError(f"channel {channel} out of range for {channels}-channel file")
    return Signal(
        frames[:, channel].copy(),
        float(rate),
        0.0,
        {"source": str(path), "encoding": _encoding_name(tag, bits), "channels": channels},
    )


def write_wav(signal: Signal, path, bits: int = 16, encoding: str = "pcm") -> int:
    """Write ``signal`` as a mono WAV file; returns the number of clipped samples.

    ``encoding`` is ``"pcm"`` (``bits`` 16, 24 or 32) or ``"float"``
    (32-bit). Samples outside [-1, 1] are clipped with a warning.
    """
    x = np.asarray(signal.samples, dtype=float)
    clipped = int(np.count_nonzero((x > 1.0) | (x < -1.0)))
    if clipped:
        warnings.warn(f"{path}: clipped {clipped} samples outside [-1, 1]", stacklevel=2)
        x = np.clip(x, -1.0, 1.0)
    if encoding == "float":
        if bits != 32:
            raise ArgumentError(f"float WAV must be 32-bit, got {bits}")
        tag, payload = FORMAT_FLOAT, x.astype("<f4").tobytes()
    elif encoding == "pcm":
        if bits not in (16, 24, 32):
            raise ArgumentError(f"PCM bit depth must be 16, 24 or 32, got {bits}")
        full = float(1 << (bits - 1))
        q = np.clip(np.round(x * full), -full, full - 1).astype(np.int64)
        if bits == 16:
            payload = q.astype("<i2").tobytes()
        elif bits == 32:
            payload = q.astype("<i4").tobytes()
        else:
            payload = q.astype("<i4").view(np.uint8).reshape(-1, 4)[:, :3].tobytes()
        tag = FORMAT_PCM
    else:
        raise ArgumentError(f"encoding must be 'pcm' or 'float', got {encoding!r}")
    rate = int(round(signal.sample_rate))
    if rate != signal.sample_rate:
        raise ArgumentError(f"WAV needs an integer sample rate, got {signal.sample_rate}")
    block = bits // 8
    fmt = struct.pack("<HHIIHH", tag, 1, rate, rate * block, block, bits)
    pad = b"\x00" if len(payload) & 1 else b""
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload + pad
    try:
        atomic_write_bytes(path, b"RIFF" + struct.pack("<I", len(body)) + body)
    except OSError as exc:
        raise WavError(f"{path}: cannot write: {exc.strerror or exc}") from exc
    return clipped
