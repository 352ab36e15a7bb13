"""
Leitura e escrita de PNG (RGB 8 bits)
"""

import numpy as np
from PIL import Image

from hlspot.errors import DataError


def read_png(path):
    """Retorna array uint8 [H, W, 3]"""
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert('RGB'), dtype=np.uint8).copy()
    except (OSError, ValueError) as e:
        raise DataError(f"Imagem ilegível {path}: {str(e)}")


def write_png(path, raster):
    raster = np.asarray(raster, dtype=np.uint8)
    # metadados fixos para que a saída seja idêntica byte a byte
    Image.fromarray(raster, mode='RGB').save(path, format='PNG', optimize=False)


def to_chw(raster):
    """uint8 [H, W, 3] → float64 [3, H, W] em [0, 1]"""
    return np.asarray(raster, dtype=np.float64).transpose(2, 0, 1) / 255.0
