"""
Testes de geometria: IoU de polígonos, linha central e alvos de centros
"""
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from hlspot.errors import ContractError
from hlspot.models import BoundaryPolygon, TextInstance
from hlspot.monitor.checks import random_convex_polygon, raster_iou
from hlspot.utils.geometry import (centerline, char_center_targets, denormalize_points,
                                   is_simple, normalize_points, point_in_polygon, polygon_area,
                                   polygon_iou, resample_polyline, rotation_angle)

UNIT_SQUARE = [[0, 0], [1, 0], [1, 1], [0, 1]]


class TestPolygonIoU:
    """IoU exato"""

    def test_shifted_square(self):
        """Quadrado unitário contra deslocamento de 0.5 → 1/3"""
        shifted = [[0.5, 0], [1.5, 0], [1.5, 1], [0.5, 1]]
        assert polygon_iou(UNIT_SQUARE, shifted) == pytest.approx(1.0 / 3.0)

    def test_identical(self):
        assert polygon_iou(UNIT_SQUARE, UNIT_SQUARE) == pytest.approx(1.0)

    def test_disjoint(self):
        far = [[5, 5], [6, 5], [6, 6], [5, 6]]
        assert polygon_iou(UNIT_SQUARE, far) == 0.0

    def test_degenerate_is_zero(self):
        """Polígono de área nula não quebra o cálculo"""
        line = [[0, 0], [1, 1], [2, 2], [3, 3]]
        assert polygon_iou(UNIT_SQUARE, line) == 0.0

    def test_against_raster(self):
        """Convexos aleatórios concordam com a rasterização"""
        rng = np.random.default_rng(7)
        for _ in range(10):
            a, b = random_convex_polygon(rng), random_convex_polygon(rng)
            assert abs(polygon_iou(a, b) - raster_iou(a, b, 256)) < 2e-2


class TestBoundary:
    """Polígono de contorno"""

    def test_odd_points_rejected(self):
        with pytest.raises(ContractError):
            BoundaryPolygon([[0, 0], [1, 0], [1, 1]])

    def test_centerline_unit_square(self):
        """Linha central do quadrado unitário"""
        np.testing.assert_allclose(centerline(UNIT_SQUARE), [[0, 0.5], [1, 0.5]])

    def test_self_intersecting_not_simple(self):
        bow = [[0, 0], [1, 1], [1, 0], [0, 1]]
        assert not is_simple(bow)
        assert is_simple(UNIT_SQUARE)

    def test_point_on_edge_inside(self):
        assert point_in_polygon((1.0, 0.5), UNIT_SQUARE)
        assert not point_in_polygon((1.5, 0.5), UNIT_SQUARE)

    def test_rotation_angle(self):
        """Ângulo da corda superior"""
        flat = TextInstance(UNIT_SQUARE, "A")
        tilted = TextInstance([[0, 0], [1, 1], [1, 2], [0, 1]], "A")
        assert rotation_angle(flat) == pytest.approx(0.0)
        assert rotation_angle(tilted) == pytest.approx(45.0)

    def test_resample_spacing(self):
        """Pontos igualmente espaçados no comprimento de arco"""
        pts = resample_polyline([[0, 0], [2, 0], [2, 2]], 5)
        np.testing.assert_allclose(pts, [[0, 0], [1, 0], [2, 0], [2, 1], [2, 2]])


class TestCenterTargets:
    """Alvos dos M slots de caracteres"""

    def test_padding_uses_tail(self):
        """Slots além de |C| recebem a cauda da linha central"""
        inst = TextInstance([[0, 0], [4, 0], [4, 2], [0, 2]], "AB", [[1, 1], [3, 1]])
        targets = char_center_targets(inst, 4)
        np.testing.assert_allclose(targets[:2], [[1, 1], [3, 1]])
        np.testing.assert_allclose(targets[2:], [[4, 1], [4, 1]])

    def test_without_centers(self):
        inst = TextInstance([[0, 0], [4, 0], [4, 2], [0, 2]], "AB")
        assert not inst.centers_available
        np.testing.assert_allclose(char_center_targets(inst, 3), [[4, 1]] * 3)

    def test_too_long(self):
        inst = TextInstance(UNIT_SQUARE, "ABCDE")
        with pytest.raises(ContractError):
            char_center_targets(inst, 3)

    def test_area(self):
        assert polygon_area([[0, 0], [4, 0], [4, 2], [0, 2]]) == pytest.approx(8.0)

    def test_normalized_coordinates(self):
        """Pixels → [0, 1]² relativo à largura e altura"""
        norm = normalize_points([[32, 8], [64, 16]], 64, 32)
        np.testing.assert_allclose(norm, [[0.5, 0.25], [1.0, 0.5]])
        np.testing.assert_allclose(denormalize_points(norm, 64, 32), [[32, 8], [64, 16]])
