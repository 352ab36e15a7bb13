"""
Renderização de fundo - HLSpot
Células 8x8 ao redor de texto, K-means em dois estágios e perfis de estilo
"""

import json
import logging
import os

import numpy as np
from PIL import Image, ImageDraw

from hlspot.errors import ContractError, DataError
from hlspot.models import StyleProfile
from hlspot.utils.image_io import read_png

logger = logging.getLogger(__name__)

CELL = 8
CELL_BUFFER = 8
KMEANS_MAX_ITER = 100

# matizes de papel dos exemplos procedurais
PAPER_HUES = [
    (236, 224, 196),
    (214, 226, 232),
    (222, 234, 208),
    (240, 214, 206),
]


class KMeansResult:
    def __init__(self, assignments, centroids, sse_history):
        self.assignments = assignments
        self.centroids = centroids
        self.sse_history = sse_history

    @property
    def sse(self):
        return self.sse_history[-1]


def _sq_dist(points, centroids):
    return ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def _kmeans_pp(points, k, rng):
    centroids = [points[rng.integers(len(points))]]
    for _ in range(1, k):
        d = _sq_dist(points, np.asarray(centroids)).min(axis=1)
        total = d.sum()
        if total <= 0:
            idx = rng.integers(len(points))
        else:
            idx = rng.choice(len(points), p=d / total)
        centroids.append(points[idx])
    return np.asarray(centroids, dtype=np.float64)


def kmeans(points, k, seed, max_iter=KMEANS_MAX_ITER):
    """
    Lloyd com inicialização k-means++

    Para quando as atribuições estabilizam ou após max_iter iterações;
    clusters vazios são ressemeados no ponto mais distante do seu centróide.

    Args:
        points: Vetores [n, d]
        k: Número de clusters
        seed: Semente da inicialização

    Returns:
        KMeansResult: atribuições, centróides e histórico de SSE
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    if k <= 0 or len(points) < k:
        raise ContractError(f"kmeans exige pelo menos k={k} pontos, recebido {len(points)}")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp(points, k, rng)
    assignments = None
    history = []
    for _ in range(max_iter):
        dist = _sq_dist(points, centroids)
        new_assignments = dist.argmin(axis=1)
        history.append(float(dist[np.arange(len(points)), new_assignments].sum()))
        if assignments is not None and np.array_equal(new_assignments, assignments):
            break
        assignments = new_assignments
        own = dist[np.arange(len(points)), assignments]
        for c in range(k):
            members = assignments == c
            if members.any():
                centroids[c] = points[members].mean(axis=0)
            else:
                far = int(own.argmax())
                centroids[c] = points[far]
                own[far] = 0.0
    return KMeansResult(assignments, centroids, history)


def extract_background_cells(image, text_regions, buffer=CELL_BUFFER):
    """
    Células 8x8 que tocam os retângulos de texto com buffer

    Args:
        image: uint8 [H, W, 3] (recortada para múltiplos de 8)
        text_regions: Retângulos (x0, y0, x1, y1) em pixels

    Returns:
        ndarray: [n, 8, 8, 3] em ordem de varredura
    """
    image = np.asarray(image, dtype=np.uint8)
    rows, cols = image.shape[0] // CELL, image.shape[1] // CELL
    image = image[:rows * CELL, :cols * CELL]
    selected = np.zeros((rows, cols), dtype=bool)
    xs = np.arange(cols) * CELL
    ys = np.arange(rows) * CELL
    for x0, y0, x1, y1 in text_regions:
        bx0, by0, bx1, by1 = x0 - buffer, y0 - buffer, x1 + buffer, y1 + buffer
        in_x = (xs < bx1) & (xs + CELL > bx0)
        in_y = (ys < by1) & (ys + CELL > by0)
        selected |= in_y[:, None] & in_x[None, :]
    cells = [image[i * CELL:(i + 1) * CELL, j * CELL:(j + 1) * CELL]
             for i, j in zip(*np.nonzero(selected))]
    if not cells:
        return np.zeros((0, CELL, CELL, 3), dtype=np.uint8)
    return np.stack(cells)


def _luminance(colors):
    return np.asarray(colors) @ np.array([0.299, 0.587, 0.114])


def build_style_profiles(samples, k_styles, seed):
    """
    Perfis de estilo a partir de imagens de mapa com caixas de texto

    Estágio 1: k-means (k=2) nas cores médias das células separa fundo de
    primeiro plano; o cluster mais claro é o fundo. Estágio 2: k-means
    (k=k_styles) nas células de fundo produz os perfis.

    Args:
        samples: Lista de (imagem, caixas de texto)
        k_styles: Número de perfis
        seed: Semente

    Returns:
        list[StyleProfile]
    """
    if not samples:
        raise ContractError("build_style_profiles exige pelo menos uma imagem")
    cells = [extract_background_cells(image, boxes) for image, boxes in samples]
    cells = np.concatenate(cells) if cells else np.zeros((0, CELL, CELL, 3), dtype=np.uint8)
    colors = cells.reshape(len(cells), -1, 3).mean(axis=1)

    stage1 = kmeans(colors, 2, seed)
    lum = [_luminance(stage1.centroids[c]) for c in range(2)]
    background = cells[stage1.assignments == int(np.argmax(lum))]
    bg_colors = background.reshape(len(background), -1, 3).mean(axis=1)

    stage2 = kmeans(bg_colors, k_styles, seed + 1)
    profiles = []
    for c in range(k_styles):
        members = background[stage2.assignments == c]
        if len(members) == 0:
            logger.warning(f"⚠️ Perfil de estilo {c} vazio, descartado")
            continue
        profiles.append(StyleProfile(len(profiles), members))
    logger.info(f"📊 {len(profiles)} perfis de estilo a partir de {len(background)} células de fundo")
    return profiles


def paper_texture(rng, width, height, hue, words=6):
    """
    Textura de papel procedural com traços escuros imitando texto

    Returns:
        tuple: (imagem uint8 [H, W, 3], caixas de texto)
    """
    base = np.asarray(hue, dtype=np.float64)
    noise = rng.normal(0.0, 4.0, size=(height, width, 1))
    blotch = rng.normal(0.0, 3.0, size=(height // CELL + 1, width // CELL + 1, 1))
    blotch = np.kron(blotch, np.ones((CELL, CELL, 1)))[:height, :width]
    image = np.clip(base + noise + blotch, 0, 255).astype(np.uint8)
    canvas = Image.fromarray(image, mode='RGB')
    draw = ImageDraw.Draw(canvas)
    boxes = []
    ink = tuple(int(v * 0.3) for v in hue)
    for _ in range(words):
        w = int(rng.integers(24, max(25, width // 3)))
        h = int(rng.integers(8, 14))
        x0 = int(rng.integers(0, max(1, width - w)))
        y0 = int(rng.integers(0, max(1, height - h)))
        for x in range(x0 + 2, x0 + w - 2, 5):
            draw.line([(x, y0 + 1), (x + 2, y0 + h - 1)], fill=ink, width=1)
        boxes.append((x0, y0, x0 + w, y0 + h))
    return np.asarray(canvas, dtype=np.uint8).copy(), boxes


def bundled_samples(seed, count=4, size=128):
    """Amostras procedurais com matizes distintos (substituem mapas digitalizados)"""
    rng = np.random.default_rng(seed)
    return [paper_texture(rng, size, size, PAPER_HUES[i % len(PAPER_HUES)]) for i in range(count)]


def load_sample_dir(directory):
    """PNGs com caixas em `<nome>.boxes.json` ([[x0, y0, x1, y1], ...])"""
    if not os.path.isdir(directory):
        raise DataError(f"Diretório de fundos não encontrado: {directory}")
    samples = []
    for name in sorted(os.listdir(directory)):
        if not name.endswith('.png'):
            continue
        sidecar = os.path.join(directory, name[:-4] + '.boxes.json')
        if not os.path.exists(sidecar):
            logger.warning(f"⚠️ {name} sem arquivo de caixas, ignorado")
            continue
        with open(sidecar, 'r') as f:
            boxes = [tuple(b) for b in json.load(f)]
        samples.append((read_png(os.path.join(directory, name)), boxes))
    if not samples:
        raise DataError(f"Nenhuma amostra de fundo em {directory}")
    return samples


def tile_background(profile, width, height, rng):
    """Fundo montado sorteando células do perfil com reposição"""
    rows, cols = height // CELL, width // CELL
    picks = rng.integers(len(profile.cells), size=(rows, cols))
    tiles = profile.cells[picks]
    return tiles.transpose(0, 2, 1, 3, 4).reshape(rows * CELL, cols * CELL, 3).copy()
