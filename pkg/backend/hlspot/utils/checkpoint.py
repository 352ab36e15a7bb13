"""
Checkpoint - HLSpot
Arquivo binário com magic, metadados JSON e tensores nomeados

Layout:
    b"HLSPOT1\\n"
    u32 tamanho do bloco de metadados + JSON UTF-8
    u32 número de entradas
    por entrada: u16 tamanho do nome + nome UTF-8, u8 ndim, ndim × u32 shape,
                 payload f64 little-endian
"""

import json
import logging
import struct

import numpy as np

from hlspot.errors import CheckpointError
from hlspot.utils.tensor import Tensor

logger = logging.getLogger(__name__)

MAGIC = b"HLSPOT1\n"


def save_checkpoint(path, params, metadata=None):
    """
    Grava parâmetros nomeados

    Args:
        path: Arquivo de destino
        params: dict nome → Tensor ou ndarray
        metadata: dict serializável (ex.: ModelConfig)
    """
    meta = json.dumps(metadata or {}, sort_keys=True).encode('utf-8')
    with open(path, 'wb') as f:
        f.write(MAGIC)
        f.write(struct.pack('<I', len(meta)))
        f.write(meta)
        f.write(struct.pack('<I', len(params)))
        for name in sorted(params):
            value = params[name]
            data = np.asarray(value.data if isinstance(value, Tensor) else value, dtype='<f8')
            encoded = name.encode('utf-8')
            f.write(struct.pack('<H', len(encoded)))
            f.write(encoded)
            f.write(struct.pack('<B', data.ndim))
            f.write(struct.pack(f'<{data.ndim}I', *data.shape))
            f.write(data.tobytes(order='C'))
    logger.debug(f"✅ Checkpoint salvo: {path} ({len(params)} tensores)")


def _read(f, size, path):
    chunk = f.read(size)
    if len(chunk) != size:
        raise CheckpointError(path, "arquivo truncado")
    return chunk


def load_checkpoint(path):
    """
    Lê um checkpoint

    Returns:
        tuple: (dict nome → ndarray, dict de metadados)
    """
    try:
        f = open(path, 'rb')
    except OSError as e:
        raise CheckpointError(path, str(e))
    with f:
        if f.read(len(MAGIC)) != MAGIC:
            raise CheckpointError(path, "magic inválido")
        (meta_len,) = struct.unpack('<I', _read(f, 4, path))
        try:
            metadata = json.loads(_read(f, meta_len, path).decode('utf-8'))
        except (UnicodeDecodeError, ValueError):
            raise CheckpointError(path, "metadados ilegíveis")
        (count,) = struct.unpack('<I', _read(f, 4, path))
        params = {}
        for _ in range(count):
            (name_len,) = struct.unpack('<H', _read(f, 2, path))
            name = _read(f, name_len, path).decode('utf-8')
            (ndim,) = struct.unpack('<B', _read(f, 1, path))
            shape = struct.unpack(f'<{ndim}I', _read(f, 4 * ndim, path)) if ndim else ()
            n = int(np.prod(shape)) if ndim else 1
            payload = _read(f, 8 * n, path)
            params[name] = np.frombuffer(payload, dtype='<f8').reshape(shape).astype(np.float64)
        if f.read(1):
            raise CheckpointError(path, "bytes excedentes após as entradas")
    return params, metadata
