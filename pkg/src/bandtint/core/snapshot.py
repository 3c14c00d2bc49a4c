import struct
from collections.abc import Mapping
from pathlib import Path

import numpy as np

from bandtint.errors import SnapshotError

# magic, then per parameter: u16 LE name length, UTF-8 name, u8 rank, u32 LE extents, float32 LE samples
MAGIC = b'BTW1'


def encode_snapshot(params: Mapping[str, np.ndarray]) -> bytes:
    chunks = [MAGIC]
    for name, array in params.items():
        encoded = name.encode('utf-8')
        chunks.append(struct.pack('<H', len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack('<B', array.ndim))
        chunks.append(struct.pack(f'<{array.ndim}I', *array.shape))
        chunks.append(np.ascontiguousarray(array, dtype='<f4').tobytes())
    return b''.join(chunks)


def decode_snapshot(payload: bytes) -> dict[str, np.ndarray]:
    if payload[:4] != MAGIC:
        raise SnapshotError(f'unknown snapshot magic {payload[:4]!r}')

    params: dict[str, np.ndarray] = {}
    offset = len(MAGIC)

    def take(count: int, what: str) -> bytes:
        nonlocal offset
        if offset + count > len(payload):
            raise SnapshotError(f'snapshot truncated while reading {what}')
        chunk = payload[offset : offset + count]
        offset += count
        return chunk

    while offset < len(payload):
        (length,) = struct.unpack('<H', take(2, 'name length'))
        start = offset
        try:
            name = take(length, 'name').decode('utf-8')
        except UnicodeDecodeError as e:
            raise SnapshotError(f'snapshot name is not UTF-8 at byte {start}') from e
        (rank,) = struct.unpack('<B', take(1, f'{name} rank'))
        shape = struct.unpack(f'<{rank}I', take(4 * rank, f'{name} extents'))
        count = int(np.prod(shape, dtype=np.int64))
        samples = take(4 * count, f'{name} samples')
        params[name] = np.frombuffer(samples, dtype='<f4').reshape(shape).astype(np.float32)
    return params


def write_snapshot(path: Path, params: Mapping[str, np.ndarray]) -> None:
    path.write_bytes(encode_snapshot(params))


def read_snapshot(path: Path) -> dict[str, np.ndarray]:
    try:
        payload = path.read_bytes()
    except OSError as e:
        raise SnapshotError(f'{path}: {e.strerror}') from e
    try:
        return decode_snapshot(payload)
    except SnapshotError as e:
        raise SnapshotError(f'{path}: {e}') from e
