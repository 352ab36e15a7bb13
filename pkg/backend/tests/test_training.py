"""
Testes do treino: schedule, Adam, aumento de dados, CSV, determinismo e aceitação de centros
"""
import csv
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from hlspot.config import MatchWeights, ModelConfig, TrainConfig
from hlspot.errors import ContractError, TrainingError
from hlspot.model.spotter import Spotter
from hlspot.models import TextInstance
from hlspot.training import trainer
from hlspot.training.augment import augment_sample
from hlspot.training.iterative import accept_centers, iterative_finetune
from hlspot.training.optimizer import Adam, step_decay
from hlspot.training.trainer import CSV_COLUMNS, train
from hlspot.utils import tensor as T
from hlspot.utils.dataset import Sample

BOX = [[3, 5], [12, 5], [12, 10], [3, 10]]


def _sample(scene_id='00000', centers=None):
    raster = np.random.default_rng(0).integers(0, 255, (16, 16, 3)).astype(np.uint8)
    return Sample(scene_id, raster, [TextInstance(BOX, "AB", centers)])


class TestSchedule:
    """Taxa de aprendizado e otimizador"""

    def test_step_decay(self):
        assert step_decay(1e-3, 0.1, 100, 0) == pytest.approx(1e-3)
        assert step_decay(1e-3, 0.1, 100, 99) == pytest.approx(1e-3)
        assert step_decay(1e-3, 0.1, 100, 100) == pytest.approx(1e-4)
        assert step_decay(1e-3, 0.1, 100, 250) == pytest.approx(1e-5)

    def test_adam_first_step(self):
        """Primeiro passo move cada parâmetro por ~lr no sentido oposto ao gradiente"""
        p = T.parameter([1.0, -1.0])
        p.grad = np.array([2.0, -0.5])
        Adam([('p', p)]).step(0.01)
        np.testing.assert_allclose(p.data, [0.99, -0.99], atol=1e-8)

    def test_adam_skips_without_grad(self):
        p = T.parameter([1.0])
        Adam([('p', p)]).step(0.1)
        np.testing.assert_array_equal(p.data, [1.0])


class TestAugment:
    """Redimensionamento aleatório com recorte"""

    def test_identity_scale(self):
        sample = _sample(centers=[[5.5, 7.5], [9.5, 7.5]])
        raster, instances = augment_sample(sample.raster, sample.instances,
                                           np.random.default_rng(0), (1.0, 1.0))
        np.testing.assert_array_equal(raster, sample.raster)
        np.testing.assert_allclose(instances[0].polygon.points, sample.instances[0].polygon.points)
        np.testing.assert_allclose(instances[0].char_centers, [[5.5, 7.5], [9.5, 7.5]])

    def test_shape_preserved(self):
        sample = _sample()
        rng = np.random.default_rng(4)
        for _ in range(5):
            raster, instances = augment_sample(sample.raster, sample.instances, rng)
            assert raster.shape == (16, 16, 3)
            for inst in instances:
                assert inst.dont_care or (inst.polygon.points.min() >= 0
                                          and inst.polygon.points.max() <= 16)

    def test_source_untouched(self):
        sample = _sample()
        before = sample.instances[0].polygon.points.copy()
        augment_sample(sample.raster, sample.instances, np.random.default_rng(1), (1.5, 1.5))
        np.testing.assert_array_equal(sample.instances[0].polygon.points, before)


class TestTrain:
    """Laço de treino"""

    def _config(self, **kw):
        base = dict(iterations=3, batch_size=1, log_interval=1, snapshot_interval=2,
                    augment=False)
        base.update(kw)
        return TrainConfig(**base)

    def test_csv_and_checkpoints(self, tmp_path):
        """Uma linha por registro, colunas fixas, snapshot e checkpoint final"""
        result = train([_sample(centers=[[5.5, 7.5], [9.5, 7.5]])], ModelConfig.gradcheck(),
                       self._config(), out_dir=str(tmp_path))
        with open(tmp_path / 'loss_log.csv') as f:
            rows = list(csv.reader(f))
        assert rows[0] == CSV_COLUMNS
        assert [int(r[0]) for r in rows[1:]] == [0, 1, 2]
        assert all(np.isfinite(float(v)) for r in rows[1:] for v in r[1:])
        assert os.path.exists(tmp_path / 'checkpoint_000002.hlspot')
        assert os.path.exists(tmp_path / 'model.hlspot')
        assert result.model.ready
        assert len(result.history) == 3

    def test_same_seed_same_curve(self):
        """Mesmo seed → mesma curva de perda"""
        sample = _sample(centers=[[5.5, 7.5], [9.5, 7.5]])
        first = train([sample], ModelConfig.gradcheck(), self._config())
        second = train([sample], ModelConfig.gradcheck(), self._config())
        assert first.history == second.history

    def test_zero_weights_freeze_parameters(self):
        """Com todos os λ zerados os parâmetros não mudam"""
        zero = MatchWeights(loss_cls=0.0, loss_coord=0.0, loss_ct=0.0, loss_char=0.0,
                            loss_giou=0.0)
        model = Spotter(ModelConfig.gradcheck())
        before = {name: p.data.copy() for name, p in model.named_parameters()}
        train([_sample()], train_config=self._config(), weights=zero, model=model)
        for name, p in model.named_parameters():
            np.testing.assert_array_equal(p.data, before[name], err_msg=name)

    def test_finetune_stops_when_stable(self, tmp_path):
        """Dataset todo anotado: contagem estável já na segunda rodada"""
        config = self._config(finetune_iterations=1, max_rounds=5)
        model = train([_sample()], ModelConfig.gradcheck(), config).model
        _, record, _ = iterative_finetune(model, [_sample(centers=[[5.5, 7.5], [9.5, 7.5]])],
                                          config, out_dir=str(tmp_path))
        assert record.history == [1, 1]
        assert os.path.exists(tmp_path / 'acceptance_history.json')

    def test_empty_dataset(self):
        with pytest.raises(ContractError):
            train([], ModelConfig.gradcheck(), self._config())

    def test_non_finite_loss(self, monkeypatch):
        """Loss não finita aborta com o termo e a iteração"""
        terms = {'L_enc': 0.0, 'L_cls': float('nan'), 'L_coord': 0.0, 'L_ct': 0.0,
                 'L_char': 0.0, 'total': float('nan')}
        monkeypatch.setattr(trainer, 'sample_step',
                            lambda *args, **kw: (T.Tensor(0.0), terms, None))
        with pytest.raises(TrainingError) as info:
            train([_sample()], ModelConfig.gradcheck(), self._config())
        assert info.value.term == 'L_cls'
        assert info.value.iteration == 0


class TestAcceptCenters:
    """Aceitação de centros previstos"""

    INSIDE = np.array([[5.0, 7.5], [10.0, 7.5], [12.0, 7.5]])
    OUTSIDE = np.array([[5.0, 7.5], [30.0, 7.5], [12.0, 7.5]])

    def test_accepts_inside(self):
        record, samples = accept_centers({(0, 0): self.INSIDE}, [_sample()])
        inst = samples[0].instances[0]
        assert record.count == 1
        assert inst.center_source == 'predicted'
        np.testing.assert_allclose(inst.char_centers, self.INSIDE[:2])

    def test_rejects_outside(self):
        """Rejeitadas ficam só com a supervisão da cauda"""
        record, samples = accept_centers({(0, 0): self.OUTSIDE}, [_sample()])
        inst = samples[0].instances[0]
        assert record.count == 0
        assert not inst.centers_available
        assert inst.tail_supervision

    def test_idempotent(self):
        record, samples = accept_centers({(0, 0): self.INSIDE}, [_sample()])
        again, samples_again = accept_centers({(0, 0): self.INSIDE}, samples, record)
        assert again.count == 1
        np.testing.assert_allclose(samples_again[0].instances[0].char_centers, self.INSIDE[:2])

    def test_sticky(self):
        """Uma aceitação anterior não é revogada"""
        record, samples = accept_centers({(0, 0): self.INSIDE}, [_sample()])
        record, samples = accept_centers({(0, 0): self.OUTSIDE}, samples, record)
        inst = samples[0].instances[0]
        assert record.count == 1
        assert inst.centers_available
        np.testing.assert_allclose(inst.char_centers, self.INSIDE[:2])

    def test_annotation_always_accepted(self):
        sample = _sample(centers=[[5.5, 7.5], [9.5, 7.5]])
        record, samples = accept_centers({}, [sample])
        assert record.count == 1
        assert samples[0].instances[0].center_source == 'annotation'
