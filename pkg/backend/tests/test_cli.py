"""
Testes do CLI: códigos de saída e artefatos gravados
"""
import json
import os
import sys

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

import app
from hlspot.config import ModelConfig
from hlspot.model.spotter import Spotter
from hlspot.monitor import alerts, runner
from hlspot.monitor.checks import CheckResult
from hlspot.utils.dataset import list_scene_ids, read_annotations


@pytest.fixture
def dataset(tmp_path):
    out = str(tmp_path / 'data')
    assert app.main(['generate', '--preset', 'micro', '--scenes', '2', '--seed', '1',
                     '--out', out]) == 0
    return out


class TestGenerate:
    """Subcomando generate"""

    def test_writes_scenes_and_manifest(self, dataset):
        assert list_scene_ids(dataset) == ['00000', '00001']
        assert os.path.exists(os.path.join(dataset, 'scene_00000.png'))
        assert os.path.exists(os.path.join(dataset, 'resolved_config.json'))

    def test_deterministic(self, dataset, tmp_path):
        """Mesmo seed → mesmos hashes no manifesto"""
        again = str(tmp_path / 'again')
        assert app.main(['generate', '--preset', 'micro', '--scenes', '2', '--seed', '1',
                         '--out', again]) == 0
        with open(os.path.join(dataset, 'manifest.json')) as f:
            first = json.load(f)
        with open(os.path.join(again, 'manifest.json')) as f:
            second = json.load(f)
        assert first['sha256'] == second['sha256']

    def test_features_file(self, tmp_path):
        """Feições do usuário substituem as aleatórias"""
        path = tmp_path / 'features.json'
        path.write_text(json.dumps({'type': 'FeatureCollection', 'features': [
            {'geometry': {'type': 'LineString', 'coordinates': [[4, 64], [124, 64]]},
             'properties': {'name': 'MAIN', 'class': 'road'}}]}))
        out = str(tmp_path / 'custom')
        assert app.main(['generate', '--preset', 'micro', '--scenes', '1', '--seed', '2',
                         '--features', str(path), '--out', out]) == 0
        texts = [inst.transcription
                 for inst in read_annotations(os.path.join(out, 'scene_00000.json'))]
        assert set(texts) <= {'MAIN'}

    def test_threads_capped_by_env(self, tmp_path, monkeypatch):
        """--threads acima de HLSPOT_THREADS é reduzido ao teto"""
        from hlspot.synthmap import scene

        seen = {}

        def fake_generate(config, out, seed, scenes, threads=None):
            seen['threads'] = threads
            return [], []

        monkeypatch.setattr(app, 'HLSPOT_THREADS', 1)
        monkeypatch.setattr(scene, 'generate_dataset', fake_generate)
        assert app.main(['generate', '--preset', 'micro', '--scenes', '1',
                         '--threads', '8', '--out', str(tmp_path / 'capped')]) == 0
        assert seen['threads'] == 1


class TestExitCodes:
    """Tradução de erros em códigos de saída"""

    def test_usage_error(self):
        with pytest.raises(SystemExit) as info:
            app.main([])
        assert info.value.code == 1

    def test_missing_dataset(self, tmp_path):
        assert app.main(['train', '--data', str(tmp_path / 'absent'),
                         '--out', str(tmp_path / 'run')]) == 2

    def test_bad_config(self, tmp_path):
        path = tmp_path / 'bad.json'
        path.write_text(json.dumps({'model': {'unknown': 1}}))
        assert app.main(['verify', '--config', str(path), '--out', str(tmp_path)]) == 1

    def test_alias_preset_accepted(self, tmp_path):
        args = app.build_parser().parse_args(['verify', '--preset', 'paper', '--out',
                                              str(tmp_path)])
        assert args.preset == 'paper'

    def test_missing_checkpoint(self, tmp_path):
        assert app.main(['infer', '--checkpoint', str(tmp_path / 'none.hlspot'),
                         '--out', str(tmp_path)]) == 2


class TestInfer:
    """Subcomando infer"""

    def test_overlay_and_sampling(self, dataset, tmp_path):
        """Limiar 0 devolve as Q propostas, com overlay e locais de amostragem"""
        checkpoint = str(tmp_path / 'model.hlspot')
        Spotter(ModelConfig.gradcheck()).save(checkpoint)
        image = os.path.join(dataset, 'scene_00000.png')
        out = str(tmp_path / 'infer')
        assert app.main(['infer', '--checkpoint', checkpoint, '--images', image,
                         '--threshold', '0', '--overlay', '--debug-sampling', '--out', out]) == 0
        with open(os.path.join(out, 'predictions.jsonl')) as f:
            row = json.loads(f.readline())
        assert row['scene_id'] == '00000'
        assert len(row['predictions']) == ModelConfig.gradcheck().num_proposals
        assert 'sampling' in row['predictions'][0]
        assert os.path.exists(os.path.join(out, 'scene_00000.overlay.png'))


class TestEval:
    """Subcomando eval"""

    def test_perfect_predictions(self, dataset, tmp_path):
        """Verdades usadas como predições → recall de detecção 1"""
        preds_path = tmp_path / 'predictions.jsonl'
        with open(preds_path, 'w') as f:
            for scene_id in list_scene_ids(dataset):
                instances = read_annotations(os.path.join(dataset, f"scene_{scene_id}.json"))
                preds = [dict(inst.to_dict(), score=1.0) for inst in instances]
                f.write(json.dumps({'scene_id': scene_id, 'predictions': preds}) + "\n")
        out = str(tmp_path / 'eval')
        assert app.main(['eval', '--preset', 'micro', '--gt', dataset, '--preds',
                         str(preds_path), '--out', out]) == 0
        with open(os.path.join(out, 'report.json')) as f:
            report = json.load(f)
        if report['detection']['n_gt']:
            assert report['detection']['recall'] == pytest.approx(1.0)
            assert report['e2e_none']['recall'] == pytest.approx(1.0)

    def test_missing_predictions(self, dataset, tmp_path):
        assert app.main(['eval', '--gt', dataset, '--preds', str(tmp_path / 'none.jsonl'),
                         '--out', str(tmp_path / 'eval')]) == 2


class TestVerify:
    """Subcomando verify"""

    def test_pass_and_fail(self, monkeypatch, tmp_path):
        def good():
            return CheckResult('good', True, 1)

        def bad():
            return CheckResult('bad', False, 1, worst=1.0)

        monkeypatch.setattr(runner, 'SUITES', {'good': (good,), 'bad': (bad,)})
        assert app.main(['verify', '--suite', 'good', '--out', str(tmp_path)]) == 0
        assert app.main(['verify', '--suite', 'bad', '--out', str(tmp_path)]) == 3
        with open(tmp_path / 'verify_report.json') as f:
            assert json.load(f)['bad']['ok'] is False

    def test_exception_is_failure(self, monkeypatch, tmp_path):
        def boom():
            raise RuntimeError("falhou")

        monkeypatch.setattr(runner, 'SUITES', {'boom': (boom,)})
        assert app.main(['verify', '--out', str(tmp_path)]) == 3

    def test_alert_log(self, monkeypatch, tmp_path):
        """Alertas vão para o JSONL configurado"""
        path = tmp_path / 'alerts.jsonl'
        monkeypatch.setattr(alerts, 'ALERT_LOG', str(path))
        record = alerts.alert("Verificação iou falhou", "pior erro 0.5", "crit")
        assert record['severity'] == 'crit'
        with open(path) as f:
            assert json.loads(f.readline())['title'] == "Verificação iou falhou"
