"""
Utilitários de geometria - HLSpot
Polígonos de contorno, linha central e alvos de centros de caracteres
"""

import math

import numpy as np
import shapely
from shapely.geometry import Point, Polygon

from hlspot.errors import ContractError
from hlspot.models import BoundaryPolygon

# GEOS usa predicados de orientação robustos; abaixo disto a área é tratada como nula
COLLINEAR_TOL = 1e-12


def _points(polygon):
    if isinstance(polygon, BoundaryPolygon):
        return polygon.points
    return np.asarray(polygon, dtype=np.float64).reshape(-1, 2)


def to_shapely(polygon):
    """Converte para shapely, corrigindo anéis auto-intersectantes de predições"""
    shape = Polygon(_points(polygon))
    if not shape.is_valid:
        shape = shapely.make_valid(shape)
    return shape


def polygon_area(polygon):
    return float(Polygon(_points(polygon)).area)


def is_simple(polygon):
    """Anel fechado sem auto-interseção e com área positiva"""
    shape = Polygon(_points(polygon))
    return bool(shape.is_valid and shape.area > COLLINEAR_TOL)


def polygon_iou(a, b):
    """
    IoU exato por recorte de polígonos

    Args:
        a, b: BoundaryPolygon ou lista de pontos

    Returns:
        float: área(a∩b) / área(a∪b), 0 para entradas degeneradas
    """
    pa, pb = to_shapely(a), to_shapely(b)
    if pa.area <= COLLINEAR_TOL or pb.area <= COLLINEAR_TOL:
        return 0.0
    inter = pa.intersection(pb).area
    union = pa.area + pb.area - inter
    if union <= COLLINEAR_TOL:
        return 0.0
    return float(min(max(inter / union, 0.0), 1.0))


def point_in_polygon(point, polygon):
    """Ponto dentro do polígono; a borda conta como dentro"""
    return bool(to_shapely(polygon).covers(Point(float(point[0]), float(point[1]))))


def bounding_box(polygon):
    pts = _points(polygon)
    x0, y0 = pts.min(axis=0)
    x1, y1 = pts.max(axis=0)
    return np.array([x0, y0, x1, y1])


def rotation_angle(inst):
    """Ângulo (graus, [0, 90]) da corda da curva superior com a horizontal"""
    polygon = inst.polygon if hasattr(inst, 'polygon') else BoundaryPolygon(inst)
    top = polygon.top
    dx, dy = top[-1] - top[0]
    if math.hypot(dx, dy) <= COLLINEAR_TOL:
        return 0.0
    return float(math.degrees(math.atan2(abs(dy), abs(dx))))


def centerline(polygon):
    """Ponto k = ponto médio entre topo k e base N/2-1-k; o último é a cauda"""
    pts = _points(polygon)
    half = len(pts) // 2
    top, bottom = pts[:half], pts[half:]
    return (top + bottom[::-1]) / 2.0


def centerline_tail(polygon):
    return centerline(polygon)[-1]


def char_center_targets(inst, max_len):
    """
    Alvos de centros para os M slots de caracteres

    Os primeiros c slots recebem os centros reais (quando disponíveis); os
    demais recebem a cauda da linha central.
    """
    c = len(inst.transcription)
    if c > max_len:
        raise ContractError(f"Transcrição com {c} caracteres excede M={max_len}")
    tail = centerline_tail(inst.polygon)
    targets = np.repeat(tail[None, :], max_len, axis=0)
    if inst.char_centers is not None and len(inst.char_centers) >= c:
        targets[:c] = inst.char_centers[:c]
    return targets


def polyline_length(points):
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) < 2:
        return 0.0
    return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())


def interpolate_polyline(points, distances):
    """Pontos e ângulos tangentes (radianos) nas distâncias de arco pedidas"""
    pts = np.asarray(points, dtype=np.float64)
    seg = np.diff(pts, axis=0)
    lengths = np.linalg.norm(seg, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    distances = np.clip(np.asarray(distances, dtype=np.float64), 0.0, cum[-1])
    idx = np.clip(np.searchsorted(cum, distances, side='right') - 1, 0, len(seg) - 1)
    # segmentos de comprimento zero herdam a direção do vizinho
    safe = np.where(lengths[idx] > 0, lengths[idx], 1.0)
    t = (distances - cum[idx]) / safe
    coords = pts[idx] + seg[idx] * t[:, None]
    angles = np.arctan2(seg[idx, 1], seg[idx, 0])
    return coords, angles


def resample_polyline(points, n):
    """n pontos igualmente espaçados em comprimento de arco"""
    total = polyline_length(points)
    coords, _ = interpolate_polyline(points, np.linspace(0.0, total, n))
    return coords


def normalize_points(points, width, height):
    return np.asarray(points, dtype=np.float64) / np.array([width, height], dtype=np.float64)


def denormalize_points(points, width, height):
    return np.asarray(points, dtype=np.float64) * np.array([width, height], dtype=np.float64)
