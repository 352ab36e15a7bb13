"""
Atlas de glifos em traço - HLSpot
Esqueletos (polilinhas) de A-Z e 0-9 numa caixa unitária (x à direita, y para baixo)
"""

import math

import numpy as np

from hlspot.errors import ContractError
from hlspot.models import GlyphBox

_O = [(0.3, 0.0), (0.7, 0.0), (0.9, 0.2), (0.9, 0.8), (0.7, 1.0), (0.3, 1.0), (0.1, 0.8),
      (0.1, 0.2), (0.3, 0.0)]
_P = [(0.1, 1.0), (0.1, 0.0), (0.7, 0.0), (0.9, 0.15), (0.9, 0.4), (0.7, 0.55), (0.1, 0.55)]

GLYPH_STROKES = {
    'A': [[(0.1, 1.0), (0.5, 0.0), (0.9, 1.0)], [(0.27, 0.6), (0.73, 0.6)]],
    'B': [[(0.1, 0.0), (0.1, 1.0), (0.7, 1.0), (0.9, 0.85), (0.9, 0.65), (0.7, 0.5), (0.1, 0.5)],
          [(0.1, 0.0), (0.65, 0.0), (0.85, 0.12), (0.85, 0.38), (0.65, 0.5)]],
    'C': [[(0.9, 0.1), (0.7, 0.0), (0.3, 0.0), (0.1, 0.2), (0.1, 0.8), (0.3, 1.0), (0.7, 1.0),
           (0.9, 0.9)]],
    'D': [[(0.1, 0.0), (0.1, 1.0), (0.6, 1.0), (0.9, 0.7), (0.9, 0.3), (0.6, 0.0), (0.1, 0.0)]],
    'E': [[(0.9, 0.0), (0.1, 0.0), (0.1, 1.0), (0.9, 1.0)], [(0.1, 0.5), (0.7, 0.5)]],
    'F': [[(0.9, 0.0), (0.1, 0.0), (0.1, 1.0)], [(0.1, 0.5), (0.7, 0.5)]],
    'G': [[(0.9, 0.1), (0.7, 0.0), (0.3, 0.0), (0.1, 0.2), (0.1, 0.8), (0.3, 1.0), (0.7, 1.0),
           (0.9, 0.8), (0.9, 0.55), (0.55, 0.55)]],
    'H': [[(0.1, 0.0), (0.1, 1.0)], [(0.9, 0.0), (0.9, 1.0)], [(0.1, 0.5), (0.9, 0.5)]],
    'I': [[(0.5, 0.0), (0.5, 1.0)], [(0.3, 0.0), (0.7, 0.0)], [(0.3, 1.0), (0.7, 1.0)]],
    'J': [[(0.9, 0.0), (0.9, 0.8), (0.7, 1.0), (0.3, 1.0), (0.1, 0.8)]],
    'K': [[(0.1, 0.0), (0.1, 1.0)], [(0.9, 0.0), (0.1, 0.6)], [(0.35, 0.45), (0.9, 1.0)]],
    'L': [[(0.1, 0.0), (0.1, 1.0), (0.9, 1.0)]],
    'M': [[(0.1, 1.0), (0.1, 0.0), (0.5, 0.6), (0.9, 0.0), (0.9, 1.0)]],
    'N': [[(0.1, 1.0), (0.1, 0.0), (0.9, 1.0), (0.9, 0.0)]],
    'O': [_O],
    'P': [_P],
    'Q': [_O, [(0.6, 0.7), (0.95, 1.0)]],
    'R': [_P, [(0.5, 0.55), (0.9, 1.0)]],
    'S': [[(0.9, 0.1), (0.7, 0.0), (0.3, 0.0), (0.1, 0.15), (0.1, 0.35), (0.3, 0.5), (0.7, 0.5),
           (0.9, 0.65), (0.9, 0.85), (0.7, 1.0), (0.3, 1.0), (0.1, 0.9)]],
    'T': [[(0.1, 0.0), (0.9, 0.0)], [(0.5, 0.0), (0.5, 1.0)]],
    'U': [[(0.1, 0.0), (0.1, 0.8), (0.3, 1.0), (0.7, 1.0), (0.9, 0.8), (0.9, 0.0)]],
    'V': [[(0.1, 0.0), (0.5, 1.0), (0.9, 0.0)]],
    'W': [[(0.05, 0.0), (0.28, 1.0), (0.5, 0.4), (0.72, 1.0), (0.95, 0.0)]],
    'X': [[(0.1, 0.0), (0.9, 1.0)], [(0.9, 0.0), (0.1, 1.0)]],
    'Y': [[(0.1, 0.0), (0.5, 0.5), (0.9, 0.0)], [(0.5, 0.5), (0.5, 1.0)]],
    'Z': [[(0.1, 0.0), (0.9, 0.0), (0.1, 1.0), (0.9, 1.0)]],
    '0': [_O, [(0.8, 0.1), (0.2, 0.9)]],
    '1': [[(0.3, 0.2), (0.5, 0.0), (0.5, 1.0)], [(0.3, 1.0), (0.7, 1.0)]],
    '2': [[(0.1, 0.2), (0.3, 0.0), (0.7, 0.0), (0.9, 0.2), (0.9, 0.4), (0.1, 1.0), (0.9, 1.0)]],
    '3': [[(0.1, 0.1), (0.3, 0.0), (0.7, 0.0), (0.9, 0.15), (0.9, 0.35), (0.7, 0.5), (0.4, 0.5)],
          [(0.7, 0.5), (0.9, 0.65), (0.9, 0.85), (0.7, 1.0), (0.3, 1.0), (0.1, 0.9)]],
    '4': [[(0.7, 1.0), (0.7, 0.0), (0.1, 0.7), (0.9, 0.7)]],
    '5': [[(0.9, 0.0), (0.1, 0.0), (0.1, 0.45), (0.7, 0.45), (0.9, 0.6), (0.9, 0.85), (0.7, 1.0),
           (0.1, 1.0)]],
    '6': [[(0.8, 0.0), (0.3, 0.0), (0.1, 0.25), (0.1, 0.8), (0.3, 1.0), (0.7, 1.0), (0.9, 0.8),
           (0.9, 0.65), (0.7, 0.45), (0.1, 0.45)]],
    '7': [[(0.1, 0.0), (0.9, 0.0), (0.4, 1.0)]],
    '8': [[(0.3, 0.5), (0.1, 0.35), (0.1, 0.15), (0.3, 0.0), (0.7, 0.0), (0.9, 0.15), (0.9, 0.35),
           (0.7, 0.5), (0.3, 0.5), (0.1, 0.65), (0.1, 0.85), (0.3, 1.0), (0.7, 1.0), (0.9, 0.85),
           (0.9, 0.65), (0.7, 0.5)]],
    '9': [[(0.9, 0.55), (0.3, 0.55), (0.1, 0.35), (0.1, 0.2), (0.3, 0.0), (0.7, 0.0), (0.9, 0.2),
           (0.9, 0.75), (0.7, 1.0), (0.2, 1.0)]],
}


class GlyphAtlas:
    """
    Fonte em traço com caixas de caractere conhecidas analiticamente

    A variedade tipográfica vem de escala, inclinação (slant), espessura
    do traço e espaçamento; a caixa do glifo não depende do slant.
    """

    def __init__(self, strokes=None, aspect=0.6):
        self.strokes = strokes or GLYPH_STROKES
        self.aspect = aspect
        for char, paths in self.strokes.items():
            if not paths or any(len(p) < 2 for p in paths):
                raise ContractError(f"Glifo '{char}' sem traços")

    def supports(self, text):
        return bool(text) and all(c in self.strokes for c in text)

    def glyph_size(self, font_size):
        return self.aspect * font_size, float(font_size)

    def box(self, char, center, angle, font_size):
        """Caixa rotacionada: cantos TL, TR, BR, BL"""
        w, h = self.glyph_size(font_size)
        local = np.array([[-w / 2, -h / 2], [w / 2, -h / 2], [w / 2, h / 2], [-w / 2, h / 2]])
        return GlyphBox(char, center, angle, _rotate(local, angle) + np.asarray(center))

    def stroke_paths(self, glyph, font_size, slant=0.0):
        """Traços do glifo em coordenadas da cena"""
        w, h = self.glyph_size(font_size)
        paths = []
        for path in self.strokes[glyph.char]:
            unit = np.asarray(path, dtype=np.float64)
            local = np.stack([(unit[:, 0] - 0.5) * w + slant * (0.5 - unit[:, 1]) * h,
                              (unit[:, 1] - 0.5) * h], axis=1)
            paths.append(_rotate(local, glyph.angle) + glyph.center)
        return paths

    def draw(self, draw, glyph, font_size, stroke_width, slant, color):
        for path in self.stroke_paths(glyph, font_size, slant):
            draw.line([tuple(p) for p in path], fill=tuple(color), width=int(stroke_width),
                      joint='curve')


def _rotate(points, angle):
    c, s = math.cos(angle), math.sin(angle)
    return points @ np.array([[c, s], [-s, c]])
