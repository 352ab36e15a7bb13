"""
Encoder deformável e gerador de propostas - HLSpot
"""

import numpy as np

from hlspot.model.attention import MSDeformAttn
from hlspot.model.layers import MLP, FeedForward, LayerNorm, Linear, Module, sine_embedding
from hlspot.utils import tensor as T
from hlspot.utils.tensor import parameter

# escala inicial (w, h) das âncoras no nível l
ANCHOR_SCALE = 0.05


def level_grid(h, w):
    """Centros normalizados das posições de um mapa [h, w], em ordem de varredura"""
    ys, xs = np.meshgrid((np.arange(h) + 0.5) / h, (np.arange(w) + 0.5) / w, indexing='ij')
    return np.stack([xs.reshape(-1), ys.reshape(-1)], axis=1)


class EncoderLayer(Module):
    def __init__(self, config, rng):
        self.attn = MSDeformAttn(config.d_model, config.n_heads, config.n_levels,
                                 config.n_points, rng)
        self.norm = LayerNorm(config.d_model)
        self.ffn = FeedForward(config.d_model, config.d_ffn, rng)

    def __call__(self, tokens, pos, refs, shapes):
        maps = split_levels(tokens, shapes)
        attended = self.attn(T.add(tokens, pos), refs, maps)
        return self.ffn(self.norm(T.add(tokens, attended)))


def flatten_levels(pyramid):
    """Lista de [d, H_l, W_l] → tokens [S, d]"""
    parts = [T.transpose(T.reshape(x, (x.shape[0], -1)), (1, 0)) for x in pyramid]
    return T.concat(parts, axis=0)


def split_levels(tokens, shapes):
    maps, start = [], 0
    for h, w in shapes:
        part = tokens[start:start + h * w]
        maps.append(T.reshape(T.transpose(part, (1, 0)), (tokens.shape[1], h, w)))
        start += h * w
    return maps


class EncoderOutput:
    def __init__(self, memory, shapes, logits, boxes, topk):
        self.memory = memory
        self.shapes = shapes
        self.logits = logits
        self.boxes = boxes
        self.topk = topk

    @property
    def scores(self):
        return T.sigmoid(self.logits).data


class Encoder(Module):
    """
    n_enc_layers de autoatenção deformável por posição (referência = a própria
    posição) e cabeças que pontuam cada posição e regridem (x, y, w, h)
    """

    def __init__(self, config, rng):
        self.config = config
        self.layers = [EncoderLayer(config, rng) for _ in range(config.n_enc_layers)]
        self.level_embed = parameter(rng.normal(0.0, 1.0, (config.n_levels, config.d_model)))
        self.output_proj = Linear(config.d_model, config.d_model, rng)
        self.output_norm = LayerNorm(config.d_model)
        self.score_head = Linear(config.d_model, 1, rng)
        self.score_head.bias.data[:] = -2.0
        self.box_head = MLP([config.d_model, config.d_model, config.d_model, 4], rng,
                            zero_last=True)

    def __call__(self, pyramid):
        shapes = [(x.shape[1], x.shape[2]) for x in pyramid]
        refs = np.concatenate([level_grid(h, w) for h, w in shapes])
        anchors = np.concatenate([
            np.concatenate([level_grid(h, w), np.full((h * w, 2), ANCHOR_SCALE * 2 ** l)], axis=1)
            for l, (h, w) in enumerate(shapes)])
        level_ids = np.concatenate([np.full(h * w, l) for l, (h, w) in enumerate(shapes)])
        pos = T.add(sine_embedding(refs, self.config.d_model),
                    T.embedding_lookup(self.level_embed, level_ids))

        tokens = flatten_levels(pyramid)
        for layer in self.layers:
            tokens = layer(tokens, pos, refs, shapes)

        hidden = self.output_norm(self.output_proj(tokens))
        logits = T.reshape(self.score_head(hidden), (-1,))
        boxes = T.sigmoid(T.add(self.box_head(hidden), T.inverse_sigmoid(anchors)))
        q = min(self.config.num_proposals, logits.shape[0])
        # ordenação estável: empates ficam com o menor índice
        topk = T.constant(np.argsort(-logits.data, kind='stable')[:q])
        return EncoderOutput(split_levels(tokens, shapes), shapes, logits, boxes, topk)


def encoder_forward(encoder, pyramid):
    return encoder(pyramid)
