"""
Aumento de dados - HLSpot
Redimensionamento aleatório seguido de recorte (ou preenchimento) para o canvas
"""

import numpy as np
from PIL import Image


def _transform(inst, scale, shift):
    points = inst.polygon.points * scale + shift
    centers = None if inst.char_centers is None else inst.char_centers * scale + shift
    moved = inst.copy()
    moved.polygon = type(inst.polygon)(points)
    moved.char_centers = centers
    return moved


def augment_sample(raster, instances, rng, scale_range=(0.75, 1.25)):
    """
    Redimensiona por s ∈ scale_range e recorta/preenche de volta ao tamanho original

    Instâncias parcialmente fora do recorte viram DON'T CARE; as totalmente
    fora são descartadas.

    Returns:
        tuple: (raster uint8 [H, W, 3], list[TextInstance])
    """
    height, width = raster.shape[:2]
    s = rng.uniform(*scale_range)
    new_w, new_h = max(1, int(round(width * s))), max(1, int(round(height * s)))
    resized = np.asarray(Image.fromarray(raster).resize((new_w, new_h), Image.BILINEAR))
    scale = np.array([new_w / width, new_h / height])

    canvas = np.empty_like(raster)
    canvas[:] = raster.reshape(-1, 3).mean(axis=0).astype(np.uint8)
    # deslocamento do recorte (>0) ou do preenchimento (<0) em cada eixo
    ox = int(rng.integers(0, new_w - width + 1)) if new_w > width else \
        -int(rng.integers(0, width - new_w + 1))
    oy = int(rng.integers(0, new_h - height + 1)) if new_h > height else \
        -int(rng.integers(0, height - new_h + 1))
    src_x0, src_y0 = max(ox, 0), max(oy, 0)
    dst_x0, dst_y0 = max(-ox, 0), max(-oy, 0)
    w = min(new_w - src_x0, width - dst_x0)
    h = min(new_h - src_y0, height - dst_y0)
    canvas[dst_y0:dst_y0 + h, dst_x0:dst_x0 + w] = resized[src_y0:src_y0 + h, src_x0:src_x0 + w]

    shift = np.array([-ox, -oy], dtype=np.float64)
    kept = []
    for inst in instances:
        moved = _transform(inst, scale, shift)
        pts = moved.polygon.points
        inside = ((pts[:, 0] >= 0) & (pts[:, 0] <= width) & (pts[:, 1] >= 0)
                  & (pts[:, 1] <= height))
        if not inside.any():
            continue
        if not inside.all():
            moved.dont_care = True
        kept.append(moved)
    return canvas, kept

