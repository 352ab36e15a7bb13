"""
Feições geográficas - HLSpot
Leitura de GeoJSON (subconjunto) e geração procedural de feições
"""

import json
import logging
import math
import os

import numpy as np

from hlspot.errors import DataError
from hlspot.models import GeoFeature

logger = logging.getLogger(__name__)

RULES_PATH = os.path.join(os.path.dirname(__file__), 'cartographic_rules.json')


def load_rules(path=None):
    """Tabela de regras cartográficas (classe → cores/espessuras) e gazetteer"""
    path = path or RULES_PATH
    try:
        with open(path, 'r') as f:
            return json.load(f)
    except (OSError, ValueError) as e:
        raise DataError(f"Regras cartográficas ilegíveis em {path}: {str(e)}")


def load_features(path):
    """
    Lê LineString/Polygon de um FeatureCollection

    As coordenadas já estão no referencial da cena (pixels); as
    propriedades usadas são `name` e `class`.
    """
    try:
        with open(path, 'r') as f:
            collection = json.load(f)
    except (OSError, ValueError) as e:
        raise DataError(f"GeoJSON ilegível em {path}: {str(e)}")

    features = []
    for item in collection.get('features', []):
        geometry = item.get('geometry') or {}
        props = item.get('properties') or {}
        gtype = geometry.get('type')
        try:
            if gtype == 'LineString':
                features.append(GeoFeature('line', geometry['coordinates'],
                                           props.get('class', 'road'), props.get('name', '')))
            elif gtype == 'Polygon':
                ring = np.asarray(geometry['coordinates'][0], dtype=np.float64)
                if len(ring) > 1 and np.allclose(ring[0], ring[-1]):
                    ring = ring[:-1]
                features.append(GeoFeature('polygon', ring, props.get('class', 'area'),
                                           props.get('name', '')))
            else:
                logger.warning(f"⚠️ Geometria ignorada: {gtype}")
        except Exception as e:
            logger.error(f"❌ Feição inválida em {path}: {str(e)}")
    return features


def _bezier(p0, p1, p2, samples=40):
    t = np.linspace(0.0, 1.0, samples)[:, None]
    return (1 - t) ** 2 * p0 + 2 * (1 - t) * t * p1 + t ** 2 * p2


def _random_line(rng, width, height):
    size = min(width, height)
    center = np.array([rng.uniform(0.3, 0.7) * width, rng.uniform(0.3, 0.7) * height])
    theta = rng.uniform(-math.pi / 2, math.pi / 2)
    half = rng.uniform(0.35, 0.45) * size
    direction = np.array([math.cos(theta), math.sin(theta)])
    normal = np.array([-direction[1], direction[0]])
    p0 = center - half * direction
    p2 = center + half * direction
    p1 = center + rng.uniform(-0.4, 0.4) * half * normal
    pts = _bezier(p0, p1, p2)
    return np.clip(pts, [2.0, 2.0], [width - 2.0, height - 2.0])


def _random_blob(rng, width, height):
    rx = rng.uniform(0.15, 0.3) * width
    ry = rng.uniform(0.1, 0.2) * height
    r = max(rx, ry)
    cx = rng.uniform(r, width - r) if width > 2 * r else width / 2
    cy = rng.uniform(r, height - r) if height > 2 * r else height / 2
    rot = rng.uniform(-math.pi / 6, math.pi / 6)
    angles = np.linspace(0.0, 2 * math.pi, 24, endpoint=False)
    radial = 1.0 + rng.uniform(-0.1, 0.1, size=len(angles))
    local = np.stack([rx * radial * np.cos(angles), ry * radial * np.sin(angles)], axis=1)
    c, s = math.cos(rot), math.sin(rot)
    return local @ np.array([[c, s], [-s, c]]) + np.array([cx, cy])


def _random_rectangle(rng, width, height):
    w = rng.uniform(0.35, 0.6) * width
    h = rng.uniform(0.15, 0.3) * height
    r = math.hypot(w, h) / 2
    cx = rng.uniform(r, width - r) if width > 2 * r else width / 2
    cy = rng.uniform(r, height - r) if height > 2 * r else height / 2
    rot = rng.uniform(-math.pi / 6, math.pi / 6)
    local = np.array([[-w / 2, -h / 2], [w / 2, -h / 2], [w / 2, h / 2], [-w / 2, h / 2]])
    c, s = math.cos(rot), math.sin(rot)
    return local @ np.array([[c, s], [-s, c]]) + np.array([cx, cy])


def _pick_name(rng, names, numeric_labels):
    name = str(names[rng.integers(len(names))])
    if not numeric_labels:
        name = ' '.join(w for w in name.split() if not w.isdigit())
    return name


def random_features(rng, width, height, count, rules, numeric_labels=True):
    """
    Feições procedurais: estradas/ferrovias/rios suaves e lagos/áreas

    Args:
        rng: numpy Generator
        width, height: Dimensões da cena
        count: Número de feições
        rules: Regras cartográficas (classes e gazetteer)

    Returns:
        list[GeoFeature]
    """
    classes = sorted(rules['classes'])
    gazetteer = rules.get('gazetteer', {})
    features = []
    for _ in range(count):
        cls = classes[rng.integers(len(classes))]
        kind = rules['classes'][cls]['kind']
        names = gazetteer.get(cls) or ['']
        name = _pick_name(rng, names, numeric_labels)
        if kind == 'line':
            vertices = _random_line(rng, width, height)
        elif cls == 'lake':
            vertices = _random_blob(rng, width, height)
        else:
            vertices = _random_rectangle(rng, width, height)
        features.append(GeoFeature(kind, vertices, cls, name))
    return features
