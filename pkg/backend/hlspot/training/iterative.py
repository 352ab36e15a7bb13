"""
Treino iterativo de centros de caracteres - HLSpot

Ciclo: ajuste fino → nova predição → aceitação dos centros "corretos"
(todos os c primeiros centros dentro do polígono verdade), até o número de
aceitos estabilizar (< stability_tol de variação) ou max_rounds rodadas.
"""

import json
import logging
import os

import numpy as np

from hlspot.config import MatchWeights, TrainConfig
from hlspot.matching.costs import build_targets
from hlspot.matching.losses import match_final_layer
from hlspot.training.trainer import train
from hlspot.utils import tensor as T
from hlspot.utils.dataset import Sample
from hlspot.utils.geometry import point_in_polygon

logger = logging.getLogger(__name__)


class CenterAcceptanceRecord:
    def __init__(self):
        self.accepted = {}
        self.history = []

    @property
    def count(self):
        return sum(1 for flag in self.accepted.values() if flag)

    def fraction(self):
        return self.count / len(self.accepted) if self.accepted else 0.0

    def to_dict(self):
        return {'history': list(self.history), 'accepted': self.count,
                'instances': len(self.accepted)}


def predict_dataset(model, samples, weights=None):
    """
    Centros previstos (pixels) para cada verdade emparelhada

    Returns:
        dict: (índice da cena, índice da instância) → ndarray [M, 2]
    """
    weights = weights or MatchWeights()
    predicted = {}
    for s, sample in enumerate(samples):
        chw = model.prepare(sample.raster)
        _, h, w = chw.shape
        targets = build_targets(sample.instances, w, h, model.vocabulary,
                                model.config.max_text_len)
        with T.no_grad():
            output = model.forward(chw)
        match = match_final_layer(output.final, targets, weights)
        centers = output.final['centers'].data
        for g, q in match.pairs:
            predicted[(s, targets[g].index)] = centers[q] * np.array([w, h])
    return predicted


def _centers_inside(centers, inst):
    c = len(inst.transcription)
    return all(point_in_polygon(p, inst.polygon) for p in centers[:c])


def accept_centers(predictions, samples, record=None):
    """
    Aceita centros previstos quando todos os c primeiros caem no polígono verdade

    Aceitas ganham os centros previstos; rejeitadas mantêm só a supervisão
    da cauda nos slots vazios. Centros de anotação são sempre aceitos e
    uma aceitação anterior nunca é revogada.

    Args:
        predictions: Saída de predict_dataset
        samples: list[Sample]
        record: CenterAcceptanceRecord da rodada anterior

    Returns:
        tuple: (CenterAcceptanceRecord, list[Sample] com instâncias atualizadas)
    """
    record = record or CenterAcceptanceRecord()
    updated = []
    for s, sample in enumerate(samples):
        instances = []
        for i, inst in enumerate(sample.instances):
            inst = inst.copy()
            key = (s, i)
            if inst.dont_care:
                instances.append(inst)
                continue
            if inst.center_source == 'annotation':
                record.accepted[key] = True
                instances.append(inst)
                continue
            previously = record.accepted.get(key, False)
            centers = predictions.get(key)
            if centers is not None and _centers_inside(centers, inst):
                inst.char_centers = np.asarray(centers)[:len(inst.transcription)].copy()
                inst.centers_available = True
                inst.center_source = 'predicted'
                inst.tail_supervision = False
                record.accepted[key] = True
            elif previously:
                record.accepted[key] = True
            else:
                inst.char_centers = None
                inst.centers_available = False
                inst.center_source = None
                inst.tail_supervision = True
                record.accepted[key] = False
            instances.append(inst)
        updated.append(Sample(sample.scene_id, sample.raster, instances, sample.image_path))
    return record, updated


def iterative_finetune(model, samples, train_config=None, weights=None, out_dir=None):
    """
    Ajuste fino iterativo com aceitação de centros

    Cada rodada reinicia o schedule em finetune_lr.

    Returns:
        tuple: (modelo, CenterAcceptanceRecord, amostras finais)
    """
    train_config = train_config or TrainConfig()
    weights = weights or MatchWeights()
    record = CenterAcceptanceRecord()
    current = samples
    for round_index in range(1, train_config.max_rounds + 1):
        round_dir = os.path.join(out_dir, f"round_{round_index}") if out_dir else None
        train(current, train_config=train_config, weights=weights, out_dir=round_dir,
              model=model, base_lr=train_config.finetune_lr,
              iterations=train_config.finetune_iterations, tag=f"finetune rodada {round_index}")
        predictions = predict_dataset(model, current, weights)
        record, current = accept_centers(predictions, current, record)
        record.history.append(record.count)
        logger.info(f"📊 Rodada {round_index}: {record.count}/{len(record.accepted)} "
                    f"instâncias com centros aceitos")
        if round_index >= 2:
            previous = record.history[-2]
            change = abs(record.count - previous) / max(previous, 1)
            if change < train_config.stability_tol:
                logger.info(f"✅ Contagem estável ({change:.2%}) após {round_index} rodadas")
                break

    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, 'acceptance_history.json'), 'w') as f:
            json.dump(record.to_dict(), f, indent=2)
        model.save(os.path.join(out_dir, 'model.hlspot'))
    return model, record, current
