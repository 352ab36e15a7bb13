"""
Spotter - HLSpot
Backbone + encoder com propostas + decoder hiper-local, ponta a ponta
"""

import json
import logging

import numpy as np

from hlspot.config import ModelConfig
from hlspot.errors import CheckpointError, ContractError
from hlspot.model.attention import SamplingTrace
from hlspot.model.backbone import Backbone
from hlspot.model.decoder import DecoderLayer, init_decoder_state
from hlspot.model.encoder import Encoder
from hlspot.model.layers import Module
from hlspot.models import Proposal
from hlspot.utils import tensor as T
from hlspot.utils.checkpoint import load_checkpoint, save_checkpoint
from hlspot.utils.geometry import denormalize_points
from hlspot.utils.image_io import to_chw
from hlspot.utils.tensor import parameter
from hlspot.utils.vocabulary import Vocabulary

logger = logging.getLogger(__name__)


class SpotterOutput:
    def __init__(self, encoder, state, proposals):
        self.encoder = encoder
        self.state = state
        self.proposals = proposals

    @property
    def layers(self):
        return self.state.predictions

    @property
    def final(self):
        return self.state.predictions[-1]


class Spotter(Module):
    def __init__(self, config=None):
        self.config = config or ModelConfig()
        rng = np.random.default_rng(self.config.init_seed)
        cfg = self.config
        self.backbone = Backbone(cfg.n_levels, cfg.d_model, cfg.backbone_width, rng)
        self.encoder = Encoder(cfg, rng)
        self.query_embed = parameter(rng.normal(0.0, 1.0, (cfg.num_boundary, cfg.d_model)))
        self.decoder = [DecoderLayer(cfg, rng) for _ in range(cfg.n_dec_layers)]
        self.vocabulary = Vocabulary(cfg.charset)
        # só spot() exige pesos treinados ou carregados
        self._ready = False

    @property
    def ready(self):
        return self._ready

    def mark_ready(self):
        self._ready = True

    @property
    def size_factor(self):
        return 2 ** (self.config.n_levels + 1)

    def forward(self, image, trace=None):
        """
        Passo completo

        Args:
            image: ndarray ou Tensor [3, H, W] em [0, 1]
            trace: SamplingTrace opcional

        Returns:
            SpotterOutput
        """
        pyramid = self.backbone(image)
        enc = self.encoder(pyramid)
        boxes = T.constant(enc.boxes.data[enc.topk])
        scores = T.constant(enc.scores[enc.topk])
        proposals = [Proposal(*box, score) for box, score in zip(boxes, scores)]
        state = init_decoder_state(boxes[:, :2], self.query_embed, self.config.max_text_len,
                                   scores=scores, trace=trace)
        for layer in self.decoder:
            layer(state, enc.memory)
        return SpotterOutput(enc, state, proposals)

    def prepare(self, raster):
        """uint8 [H, W, 3] → [3, H', W'] com H', W' múltiplos do stride máximo"""
        chw = to_chw(raster)
        _, h, w = chw.shape
        f = self.size_factor
        ph, pw = -h % f, -w % f
        if ph or pw:
            chw = np.pad(chw, ((0, 0), (0, ph), (0, pw)))
        return chw

    def spot(self, raster, threshold=None, trace=None):
        """
        Detecta e transcreve

        Returns:
            list[dict]: {polygon, transcription, score, char_centers} em pixels,
            ordenado por score decrescente
        """
        if not self._ready:
            raise ContractError("spot() exige um modelo treinado ou carregado de checkpoint")
        threshold = self.config.score_threshold if threshold is None else threshold
        chw = self.prepare(raster)
        _, h, w = chw.shape
        with T.no_grad():
            out = self.forward(chw, trace=trace)
        final = out.final
        scores = T.sigmoid(final['logits']).data
        polygons = denormalize_points(final['boundary'].data, w, h)
        centers = denormalize_points(final['centers'].data, w, h)
        labels = final['char_logits'].data.argmax(axis=-1)
        order = np.argsort(-scores, kind='stable')
        results = []
        for i in order:
            if scores[i] < threshold:
                continue
            text = self.vocabulary.decode(labels[i])
            results.append({
                'polygon': polygons[i].tolist(),
                'transcription': text,
                'text': text,
                'score': float(scores[i]),
                'char_centers': centers[i].tolist(),
                'index': int(i),
            })
        return results

    def save(self, path):
        save_checkpoint(path, self.state_dict(), {'model': json.loads(self.config.json())})

    @classmethod
    def from_checkpoint(cls, path):
        params, metadata = load_checkpoint(path)
        if 'model' not in metadata:
            raise CheckpointError(path, "metadados sem configuração do modelo")
        try:
            model = cls(ModelConfig.parse_obj(metadata['model']))
            model.load_state_dict(params)
        except (ContractError, ValueError) as e:
            raise CheckpointError(path, str(e))
        model.mark_ready()
        logger.info(f"✅ Modelo carregado de {path}")
        return model


def new_trace():
    return SamplingTrace()
