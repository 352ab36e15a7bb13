"""
Treinamento - HLSpot
Laço de otimização com Adam, decaimento em degraus, log CSV e checkpoints
"""

import csv
import logging
import math
import os

import numpy as np

from hlspot.config import MatchWeights, TrainConfig
from hlspot.errors import ContractError, TrainingError
from hlspot.matching.costs import build_targets
from hlspot.matching.losses import LOSS_TERMS, compute_losses
from hlspot.model.spotter import Spotter
from hlspot.training.augment import augment_sample
from hlspot.training.optimizer import Adam, step_decay
from hlspot.utils import tensor as T

logger = logging.getLogger(__name__)

CSV_COLUMNS = ['iter', 'total', 'L_enc'] + list(LOSS_TERMS)
TERM_ORDER = ['L_enc'] + list(LOSS_TERMS) + ['total']


class TrainResult:
    def __init__(self, model, history, checkpoints):
        self.model = model
        self.history = history
        self.checkpoints = checkpoints

    @property
    def final_loss(self):
        return self.history[-1]['total'] if self.history else float('nan')


def sample_step(model, sample, weights, rng=None, train_config=None):
    """Forward + perdas de uma amostra; aumento opcional quando rng é dado"""
    raster, instances = sample.raster, sample.instances
    if rng is not None and train_config is not None and train_config.augment:
        raster, instances = augment_sample(raster, instances, rng, train_config.scale_range)
    chw = model.prepare(raster)
    _, h, w = chw.shape
    targets = build_targets(instances, w, h, model.vocabulary, model.config.max_text_len)
    output = model.forward(chw)
    return compute_losses(output, targets, weights)


def _check_finite(terms, iteration):
    for term in TERM_ORDER:
        if not math.isfinite(terms[term]):
            raise TrainingError(term, iteration)


def train(samples, model_config=None, train_config=None, weights=None, out_dir=None, model=None,
          base_lr=None, iterations=None, log_name='loss_log.csv', tag='train'):
    """
    Treina (ou continua treinando) o spotter

    Args:
        samples: list[Sample] (não vazia)
        model_config: ModelConfig para um modelo novo (ignorado se model for dado)
        train_config: TrainConfig
        weights: MatchWeights
        out_dir: Diretório para CSV e checkpoints (None = nada em disco)
        model: Spotter existente (ajuste fino)
        base_lr, iterations: Sobrescrevem o TrainConfig (ajuste fino reinicia o schedule)

    Returns:
        TrainResult
    """
    if not samples:
        raise ContractError("train exige um dataset não vazio")
    train_config = train_config or TrainConfig()
    weights = weights or MatchWeights()
    model = model or Spotter(model_config)
    base_lr = train_config.base_lr if base_lr is None else base_lr
    iterations = train_config.iterations if iterations is None else iterations

    rng = np.random.default_rng(train_config.seed)
    optimizer = Adam(model.named_parameters(), train_config.beta1, train_config.beta2,
                     train_config.adam_eps)
    history, checkpoints = [], []
    writer = log_file = None
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        log_file = open(os.path.join(out_dir, log_name), 'w', newline='')
        writer = csv.writer(log_file)
        writer.writerow(CSV_COLUMNS)

    logger.info("=" * 60)
    logger.info(f"🚀 {tag}: {len(samples)} cenas, {iterations} iterações, lr {base_lr:g}")
    logger.info("=" * 60)

    order, cursor = rng.permutation(len(samples)), 0
    try:
        for it in range(iterations):
            lr = step_decay(base_lr, train_config.decay_factor, train_config.decay_step, it)
            batch = []
            for _ in range(train_config.batch_size):
                if cursor == len(order):
                    order, cursor = rng.permutation(len(samples)), 0
                batch.append(samples[order[cursor]])
                cursor += 1

            sums = {term: 0.0 for term in TERM_ORDER}
            optimizer.zero_grad()
            for sample in batch:
                total, terms, _ = sample_step(model, sample, weights, rng, train_config)
                _check_finite(terms, it)
                T.mul(total, 1.0 / len(batch)).backward()
                for term in TERM_ORDER:
                    sums[term] += terms[term] / len(batch)
            optimizer.step(lr)

            row = {'iter': it, **sums}
            history.append(row)
            if it % train_config.log_interval == 0:
                logger.info(f"📊 iter {it:6d} | loss {sums['total']:.4f} | lr {lr:.2e}")
                if writer:
                    writer.writerow([it] + [f"{sums[c]:.8g}" for c in CSV_COLUMNS[1:]])
            if out_dir and (it + 1) % train_config.snapshot_interval == 0:
                path = os.path.join(out_dir, f"checkpoint_{it + 1:06d}.hlspot")
                model.save(path)
                checkpoints.append(path)
    finally:
        if log_file:
            log_file.close()

    model.mark_ready()
    if out_dir:
        final = os.path.join(out_dir, 'model.hlspot')
        model.save(final)
        checkpoints.append(final)
        logger.info(f"✅ Checkpoint final: {final}")
    return TrainResult(model, history, checkpoints)
