"""
Posicionamento de rótulos - HLSpot
Texto ao longo de linhas (estradas, rios) e do contorno de polígonos (lagos)
"""

import logging
import math

import numpy as np
from shapely.geometry import Polygon

from hlspot.errors import PlacementSkipped
from hlspot.models import TextInstance
from hlspot.utils.geometry import (interpolate_polyline, is_simple, point_in_polygon,
                                   polyline_length, resample_polyline)

logger = logging.getLogger(__name__)

# mudança de direção acima disto quebra um trecho do contorno
MAX_RUN_TURN_DEG = 20.0
# folga entre o rótulo e a borda do polígono, em alturas de glifo
POLYGON_INSET = 0.75


class LabelStyle:
    def __init__(self, font_size=14.0, letter_spacing=1.0, word_spacing=6.0, stroke_width=1,
                 slant=0.0, color=(40, 30, 20)):
        self.font_size = float(font_size)
        self.letter_spacing = float(letter_spacing)
        self.word_spacing = float(word_spacing)
        self.stroke_width = int(stroke_width)
        self.slant = float(slant)
        self.color = tuple(color)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


class PlacedLabel:
    def __init__(self, glyphs, instance, style):
        self.glyphs = glyphs
        self.instance = instance
        self.style = style


def _upright(polyline):
    """Inverte a linha quando ela corre da direita para a esquerda"""
    pts = np.asarray(polyline, dtype=np.float64)
    if pts[-1, 0] < pts[0, 0]:
        return pts[::-1].copy()
    return pts


def text_advance(atlas, text, style):
    w, _ = atlas.glyph_size(style.font_size)
    return len(text) * w + (len(text) - 1) * style.letter_spacing


def _chain(first, last, inner):
    pts = [first]
    pts.extend(inner)
    pts.append(last)
    return np.asarray(pts)


def place_label_on_line(polyline, text, style, atlas, num_boundary, start=None, bounds=None):
    """
    Posiciona uma palavra ao longo de uma polilinha

    Args:
        polyline: Vértices [P, 2] em pixels
        text: Palavra (sem espaços)
        style: LabelStyle
        atlas: GlyphAtlas
        num_boundary: N pontos do polígono de contorno
        start: Distância de arco do primeiro glifo (None centraliza)
        bounds: (largura, altura) opcional da cena

    Returns:
        PlacedLabel: caixas dos glifos e a TextInstance

    Raises:
        PlacementSkipped: Rótulo não cabe ou geometria inválida
    """
    if not text:
        raise PlacementSkipped("texto vazio")
    if not atlas.supports(text):
        raise PlacementSkipped(f"caracteres fora do atlas em '{text}'")
    pts = _upright(polyline)
    length = polyline_length(pts)
    advance = text_advance(atlas, text, style)
    if start is None:
        start = (length - advance) / 2.0
    if start < 0 or start + advance > length + 1e-9:
        raise PlacementSkipped(f"comprimento de arco insuficiente para '{text}'")

    w, h = atlas.glyph_size(style.font_size)
    offsets = start + np.arange(len(text)) * (w + style.letter_spacing) + w / 2.0
    centers, angles = interpolate_polyline(pts, offsets)
    glyphs = [atlas.box(ch, centers[k], angles[k], style.font_size) for k, ch in enumerate(text)]

    # vizinhos compartilham o ponto médio entre TR_k e TL_k+1 (e BR_k / BL_k+1)
    top_inner = [(glyphs[k].corners[1] + glyphs[k + 1].corners[0]) / 2 for k in range(len(text) - 1)]
    bottom_inner = [(glyphs[k].corners[2] + glyphs[k + 1].corners[3]) / 2
                    for k in range(len(text) - 1)]
    top = _chain(glyphs[0].corners[0], glyphs[-1].corners[1], top_inner)
    bottom = _chain(glyphs[-1].corners[2], glyphs[0].corners[3], bottom_inner[::-1])
    half = num_boundary // 2
    polygon = np.concatenate([resample_polyline(top, half), resample_polyline(bottom, half)])

    if not is_simple(polygon):
        raise PlacementSkipped(f"polígono não simples para '{text}'")
    if any(not point_in_polygon(c, polygon) for c in centers):
        raise PlacementSkipped(f"centro fora do polígono para '{text}'")
    if bounds is not None:
        corners = np.concatenate([polygon] + [g.corners for g in glyphs])
        if (corners.min() < 0 or np.any(corners[:, 0] > bounds[0])
                or np.any(corners[:, 1] > bounds[1])):
            raise PlacementSkipped(f"rótulo '{text}' fora da cena")

    instance = TextInstance(polygon, text, char_centers=centers)
    return PlacedLabel(glyphs, instance, style)


def place_words_on_line(polyline, name, style, atlas, num_boundary, bounds=None):
    """Uma instância por palavra, separadas por word_spacing, centralizadas na linha"""
    words = [w for w in name.split() if w]
    if not words:
        raise PlacementSkipped("nome vazio")
    pts = _upright(polyline)
    total = (sum(text_advance(atlas, w, style) for w in words)
             + (len(words) - 1) * style.word_spacing)
    cursor = (polyline_length(pts) - total) / 2.0
    if cursor < 0:
        raise PlacementSkipped(f"comprimento de arco insuficiente para '{name}'")
    placed = []
    for word in words:
        placed.append(place_label_on_line(pts, word, style, atlas, num_boundary,
                                          start=cursor, bounds=bounds))
        cursor += text_advance(atlas, word, style) + style.word_spacing
    return placed


def _turn_angles(ring):
    seg = np.diff(ring, axis=0)
    headings = np.arctan2(seg[:, 1], seg[:, 0])
    turns = np.diff(np.concatenate([headings, headings[:1]]))
    turns = (turns + math.pi) % (2 * math.pi) - math.pi
    return np.degrees(np.abs(turns))


def longest_straight_run(ring):
    """
    Trecho mais longo do anel sem curvas acima de MAX_RUN_TURN_DEG

    Empates preferem o trecho mais alto (menor y médio).
    """
    ring = np.asarray(ring, dtype=np.float64)
    if np.allclose(ring[0], ring[-1]):
        ring = ring[:-1]
    n = len(ring)
    closed = np.concatenate([ring, ring[:1]])
    # turns[i] é a curva no vértice i+1 (fim da aresta i)
    turns = _turn_angles(closed)
    breaks = [i for i in range(n) if turns[i] > MAX_RUN_TURN_DEG]
    if not breaks:
        return np.concatenate([ring, ring[:1]])
    runs = []
    for b, start_break in enumerate(breaks):
        end_break = breaks[(b + 1) % len(breaks)]
        first = (start_break + 1) % n
        count = (end_break - start_break) % n or n
        idx = [(first + k) % n for k in range(count + 1)]
        runs.append(ring[idx])

    def key(run):
        return (-round(polyline_length(run), 6), float(run[:, 1].mean()))
    return min(runs, key=key)


def place_label_on_polygon(polygon, name, style, atlas, num_boundary, bounds=None):
    """
    Rótulo acompanhando o contorno de um polígono

    O contorno é recuado para dentro por POLYGON_INSET alturas de glifo;
    o trecho reto mais longo recebe o texto.
    """
    _, h = atlas.glyph_size(style.font_size)
    shape = Polygon(np.asarray(polygon, dtype=np.float64))
    if not shape.is_valid or shape.area <= 0:
        raise PlacementSkipped("polígono da feição inválido")
    inner = shape.buffer(-POLYGON_INSET * h, join_style=2)
    if inner.is_empty or inner.geom_type != 'Polygon':
        raise PlacementSkipped("polígono pequeno demais para o rótulo")
    run = longest_straight_run(np.asarray(inner.exterior.coords))
    return place_words_on_line(run, name, style, atlas, num_boundary, bounds=bounds)
