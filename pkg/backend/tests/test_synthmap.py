"""
Testes do gerador SynthMap+: estilos de fundo, posicionamento de rótulos e cenas
"""
import json
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from hlspot.config import build_config
from hlspot.errors import ContractError, DataError, PlacementSkipped
from hlspot.models import GeoFeature, TextInstance
from hlspot.synthmap.background import (build_style_profiles, bundled_samples,
                                        extract_background_cells, kmeans, tile_background)
from hlspot.synthmap.features import load_features, load_rules
from hlspot.synthmap.glyphs import GlyphAtlas
from hlspot.synthmap.placement import (LabelStyle, longest_straight_run, place_label_on_line,
                                       place_label_on_polygon, place_words_on_line)
from hlspot.synthmap.scene import (check_scene_annotations, compose_scene, generate_scene,
                                   style_profiles_for)
from hlspot.utils.geometry import point_in_polygon


@pytest.fixture
def atlas():
    return GlyphAtlas()


@pytest.fixture
def micro():
    return build_config('micro')


class TestBackground:
    """Células de fundo e k-means"""

    def test_cells_around_region(self):
        """Retângulo (24,24,40,40) com buffer 8 numa imagem 64×64 → 16 células"""
        image = np.zeros((64, 64, 3), dtype=np.uint8)
        cells = extract_background_cells(image, [(24, 24, 40, 40)])
        assert cells.shape == (16, 8, 8, 3)

    def test_no_regions(self):
        cells = extract_background_cells(np.zeros((16, 16, 3), dtype=np.uint8), [])
        assert cells.shape == (0, 8, 8, 3)

    def test_kmeans_separates_clusters(self):
        """Dois grupos afastados ficam em clusters distintos"""
        rng = np.random.default_rng(0)
        points = np.concatenate([rng.normal(0, 0.1, (20, 2)), rng.normal(10, 0.1, (20, 2))])
        result = kmeans(points, 2, seed=1)
        assert len(set(result.assignments[:20])) == 1
        assert len(set(result.assignments[20:])) == 1
        assert result.assignments[0] != result.assignments[20]

    def test_kmeans_sse_non_increasing(self):
        rng = np.random.default_rng(2)
        result = kmeans(rng.uniform(0, 1, (60, 3)), 4, seed=0)
        history = result.sse_history
        assert all(b <= a + 1e-9 for a, b in zip(history, history[1:]))

    def test_kmeans_deterministic(self):
        points = np.random.default_rng(3).uniform(0, 1, (30, 3))
        a, b = kmeans(points, 3, seed=5), kmeans(points, 3, seed=5)
        np.testing.assert_array_equal(a.assignments, b.assignments)

    def test_kmeans_too_few_points(self):
        with pytest.raises(ContractError):
            kmeans(np.zeros((2, 3)), 3, seed=0)

    def test_style_profiles(self):
        """Perfis vêm das células claras (fundo)"""
        profiles = build_style_profiles(bundled_samples(0, count=4, size=64), 2, seed=0)
        assert 1 <= len(profiles) <= 2
        for profile in profiles:
            assert profile.cells.shape[1:] == (8, 8, 3)

    def test_tile_background(self):
        profiles = build_style_profiles(bundled_samples(0, count=4, size=64), 2, seed=0)
        tiles = tile_background(profiles[0], 32, 24, np.random.default_rng(0))
        assert tiles.shape == (24, 32, 3)
        assert tiles.dtype == np.uint8


class TestPlacement:
    """Posicionamento de rótulos"""

    def test_line_label(self, atlas):
        """Um centro por caractere, dentro do polígono de contorno"""
        placed = place_label_on_line([[10, 50], [210, 50]], "MAP", LabelStyle(), atlas, 8)
        inst = placed.instance
        assert inst.transcription == "MAP"
        assert inst.polygon.n == 8
        assert len(inst.char_centers) == 3
        assert len(placed.glyphs) == 3
        for c in inst.char_centers:
            assert point_in_polygon(c, inst.polygon)
        np.testing.assert_allclose(inst.char_centers[:, 1], 50.0)

    def test_reading_direction(self, atlas):
        """Linha da direita para a esquerda é lida da esquerda para a direita"""
        forward = place_label_on_line([[10, 50], [210, 50]], "MAP", LabelStyle(), atlas, 8)
        backward = place_label_on_line([[210, 50], [10, 50]], "MAP", LabelStyle(), atlas, 8)
        np.testing.assert_allclose(forward.instance.char_centers,
                                   backward.instance.char_centers)
        assert backward.instance.char_centers[0, 0] < backward.instance.char_centers[-1, 0]

    def test_too_short(self, atlas):
        with pytest.raises(PlacementSkipped):
            place_label_on_line([[0, 0], [10, 0]], "RIVER", LabelStyle(), atlas, 8)

    def test_unsupported_characters(self, atlas):
        with pytest.raises(PlacementSkipped):
            place_label_on_line([[0, 50], [300, 50]], "río", LabelStyle(), atlas, 8)

    def test_out_of_bounds(self, atlas):
        with pytest.raises(PlacementSkipped):
            place_label_on_line([[10, 2], [210, 2]], "MAP", LabelStyle(), atlas, 8,
                                bounds=(256, 256))

    def test_words_in_order(self, atlas):
        """Palavras separadas viram instâncias na ordem de leitura"""
        placed = place_words_on_line([[0, 60], [250, 60]], "OLD MILL", LabelStyle(), atlas, 8)
        assert [p.instance.transcription for p in placed] == ["OLD", "MILL"]
        assert placed[0].instance.char_centers[-1, 0] < placed[1].instance.char_centers[0, 0]

    def test_polygon_label(self, atlas):
        """Rótulo de área acompanha o trecho reto mais longo, recuado para dentro"""
        square = [[20, 20], [220, 20], [220, 120], [20, 120]]
        placed = place_label_on_polygon(square, "PARK", LabelStyle(), atlas, 8, bounds=(256, 256))
        assert len(placed) == 1
        for c in placed[0].instance.char_centers:
            assert point_in_polygon(c, square)

    def test_longest_run(self):
        ring = np.array([[0, 0], [10, 0], [10, 2], [0, 2]], dtype=np.float64)
        run = longest_straight_run(ring)
        assert len(run) == 2
        assert abs(run[1, 0] - run[0, 0]) == pytest.approx(10.0)


class TestScene:
    """Composição de cenas"""

    def test_compose_deterministic(self, micro, atlas):
        """Mesmo seed → mesma imagem e mesmas anotações"""
        rules = load_rules()
        profiles = style_profiles_for(micro.synthmap, 0)
        a = generate_scene(micro, profiles, rules, atlas, 3, 0)
        b = generate_scene(micro, profiles, rules, atlas, 3, 0)
        np.testing.assert_array_equal(a.raster, b.raster)
        assert [i.to_dict() for i in a.annotations] == [i.to_dict() for i in b.annotations]

    def test_annotations_valid(self, micro, atlas):
        """Todas as cenas satisfazem os invariantes de anotação"""
        rules = load_rules()
        profiles = style_profiles_for(micro.synthmap, 1)
        for index in range(5):
            scene = generate_scene(micro, profiles, rules, atlas, 1, index)
            assert scene.raster.shape == (128, 128, 3)
            assert check_scene_annotations(scene) == []

    def test_numeric_label_is_dont_care(self, micro, atlas):
        """Rótulos só com dígitos ficam marcados como DON'T CARE"""
        profiles = style_profiles_for(micro.synthmap, 0)
        road = GeoFeature('line', [[4, 64], [124, 64]], 'road', '1907')
        scene = compose_scene([road], profiles[0], 0, 128, 128, config=micro.synthmap,
                              max_len=micro.model.max_text_len, atlas=atlas,
                              charset=micro.model.charset)
        assert len(scene.annotations) == 1
        assert scene.annotations[0].dont_care

    def test_checker_flags_bad_center(self):
        """O verificador acusa centro fora do polígono"""
        from hlspot.models import MapScene

        inst = TextInstance([[0, 0], [10, 0], [10, 10], [0, 10]], "AB", [[2, 5], [50, 5]])
        scene = MapScene(64, 64, [], None, np.zeros((64, 64, 3), dtype=np.uint8), [inst])
        violations = check_scene_annotations(scene)
        assert len(violations) == 1
        assert "fora do polígono" in violations[0]


class TestFeatures:
    """Feições de entrada"""

    def test_geojson(self, tmp_path):
        """LineString e Polygon lidos; o anel fechado perde o ponto repetido"""
        path = tmp_path / 'features.json'
        path.write_text(json.dumps({'type': 'FeatureCollection', 'features': [
            {'geometry': {'type': 'LineString', 'coordinates': [[4, 60], [120, 60]]},
             'properties': {'name': 'MAIN', 'class': 'road'}},
            {'geometry': {'type': 'Polygon',
                          'coordinates': [[[10, 10], [60, 10], [60, 40], [10, 10]]]},
             'properties': {'name': 'POND', 'class': 'lake'}},
            {'geometry': {'type': 'Point', 'coordinates': [1, 1]}, 'properties': {}},
        ]}))
        features = load_features(str(path))
        assert [f.kind for f in features] == ['line', 'polygon']
        assert features[1].vertices.shape == (3, 2)
        assert features[0].name == 'MAIN'

    def test_unreadable(self, tmp_path):
        with pytest.raises(DataError):
            load_features(str(tmp_path / 'missing.json'))
