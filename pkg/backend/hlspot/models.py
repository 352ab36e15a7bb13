import numpy as np

from hlspot.errors import ContractError


class BoundaryPolygon:
    """N pontos: N/2 na curva superior (esq→dir) e N/2 na inferior (dir→esq)"""

    def __init__(self, points):
        points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        if len(points) < 4 or len(points) % 2:
            raise ContractError(f"Polígono exige N par e >= 4, recebido N={len(points)}")
        if not np.all(np.isfinite(points)):
            raise ContractError("Polígono com coordenadas não finitas")
        self.points = points

    @property
    def n(self):
        return len(self.points)

    @property
    def top(self):
        return self.points[:self.n // 2]

    @property
    def bottom(self):
        return self.points[self.n // 2:]

    def scaled(self, sx, sy):
        return BoundaryPolygon(self.points * np.array([sx, sy]))

    def to_list(self):
        return [[float(x), float(y)] for x, y in self.points]


class TextInstance:
    def __init__(self, polygon, transcription, char_centers=None, centers_available=None,
                 dont_care=False, center_source=None, tail_supervision=False):
        self.polygon = polygon if isinstance(polygon, BoundaryPolygon) else BoundaryPolygon(polygon)
        self.transcription = transcription
        self.char_centers = (None if char_centers is None
                             else np.asarray(char_centers, dtype=np.float64).reshape(-1, 2))
        if centers_available is None:
            centers_available = self.char_centers is not None and len(self.char_centers) > 0
        self.centers_available = bool(centers_available)
        self.dont_care = bool(dont_care)
        # 'annotation' | 'predicted' | None
        self.center_source = center_source or ('annotation' if self.centers_available else None)
        self.tail_supervision = bool(tail_supervision)

    def copy(self):
        return TextInstance(self.polygon.points.copy(), self.transcription,
                            None if self.char_centers is None else self.char_centers.copy(),
                            self.centers_available, self.dont_care, self.center_source,
                            self.tail_supervision)

    def to_dict(self):
        centers = None
        if self.centers_available and self.char_centers is not None:
            centers = [[float(x), float(y)] for x, y in self.char_centers]
        return {
            'polygon': self.polygon.to_list(),
            'text': self.transcription,
            'char_centers': centers,
            'dont_care': self.dont_care,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(data['polygon'], data.get('text', ''), data.get('char_centers'),
                   dont_care=data.get('dont_care', False))


class GeoFeature:
    def __init__(self, kind, vertices, feature_class, name=''):
        self.kind = kind
        self.vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 2)
        self.feature_class = feature_class
        self.name = name
        if kind == 'line' and len(self.vertices) < 2:
            raise ContractError("Feição linear exige >= 2 vértices")
        if kind == 'polygon' and len(self.vertices) < 3:
            raise ContractError("Feição poligonal exige >= 3 vértices")
        if kind not in ('line', 'polygon'):
            raise ContractError(f"Tipo de feição desconhecido: {kind}")


class StyleProfile:
    def __init__(self, id, cells):
        cells = np.asarray(cells, dtype=np.uint8)
        if cells.ndim != 4 or cells.shape[1:] != (8, 8, 3):
            raise ContractError(f"Células devem ser 8x8x3, recebido {cells.shape}")
        self.id = id
        self.cells = cells
        colors = cells.reshape(len(cells), -1, 3).mean(axis=1)
        self.palette_mean = colors.mean(axis=0) if len(cells) else np.zeros(3)
        self.palette_cov = np.cov(colors.T) if len(cells) > 1 else np.zeros((3, 3))


class GlyphBox:
    def __init__(self, char, center, angle, corners):
        self.char = char
        self.center = np.asarray(center, dtype=np.float64)
        self.angle = float(angle)
        # TL, TR, BR, BL no referencial do glifo
        self.corners = np.asarray(corners, dtype=np.float64)


class MapScene:
    def __init__(self, width, height, features, style, raster, annotations, glyphs=None):
        self.width = width
        self.height = height
        self.features = features
        self.style = style
        self.raster = raster
        self.annotations = annotations
        self.glyphs = glyphs or []


class Proposal:
    def __init__(self, x, y, w, h, score):
        self.x, self.y, self.w, self.h = float(x), float(y), float(w), float(h)
        self.score = float(score)

    @property
    def center(self):
        return (self.x, self.y)
