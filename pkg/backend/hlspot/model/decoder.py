"""
Decoder hiper-local - HLSpot

Cada camada executa, nesta ordem:
1. boundary_decoder_layer: atenção deformável em cada ponto de contorno,
   autoatenção fatorada (dentro da instância e entre instâncias), refinamento
   das coordenadas em espaço sigmoide inverso
2. char_center_predictor: centros de caracteres por atenção dos caracteres
   sobre os pontos de contorno
3. char_decoder_layer: atenção deformável em cada centro de caractere e
   autoatenção entre os caracteres da mesma instância
4. predict_heads: classe, contorno e logits de caracteres (supervisão intermediária)
"""

import math

import numpy as np

from hlspot.model.attention import MSDeformAttn
from hlspot.model.layers import (MLP, FeedForward, LayerNorm, Linear, Module,
                                 MultiHeadSelfAttention, sine_embedding)
from hlspot.utils import tensor as T
from hlspot.utils.tensor import Tensor


class DecoderState:
    """
    Estado do decoder para Q propostas

    q_n [Q, N, d] e q_m [Q, M, d] são Tensors; as referências são ndarrays
    (sem gradiente entre camadas).
    """

    def __init__(self, q_n, q_m, boundary_refs, char_refs, centers, scores=None, trace=None):
        self.q_n = q_n
        self.q_m = q_m
        self.boundary_refs = boundary_refs
        self.char_refs = char_refs
        self.centers = centers
        self.scores = scores
        self.trace = trace
        self.layer = 0
        self.predictions = []
        self.ref_history = []

    @property
    def num_proposals(self):
        return self.q_n.shape[0]


def init_decoder_state(proposal_centers, query_embed, max_len, scores=None, trace=None):
    """
    Estado inicial a partir das propostas

    Args:
        proposal_centers: ndarray [Q, 2]
        query_embed: Tensor [N, d] de embeddings por ponto (compartilhado entre propostas)
        max_len: M

    Returns:
        DecoderState: refs de contorno e de caracteres no centro da proposta,
        consultas de caractere zeradas
    """
    centers = np.asarray(proposal_centers, dtype=np.float64).reshape(-1, 2)
    q = len(centers)
    n, d = query_embed.shape
    q_n = T.broadcast_to(query_embed, (q, n, d))
    q_m = Tensor(np.zeros((q, max_len, d)))
    boundary_refs = np.repeat(centers[:, None, :], n, axis=1)
    char_refs = np.repeat(centers[:, None, :], max_len, axis=1)
    return DecoderState(q_n, q_m, boundary_refs, char_refs, centers, scores, trace)


def _center_refs(state, count):
    return np.repeat(state.centers[:, None, :], count, axis=1)


class DecoderLayer(Module):
    def __init__(self, config, rng):
        d = config.d_model
        self.config = config
        # contorno
        self.boundary_attn = MSDeformAttn(d, config.n_heads, config.n_levels, config.n_points, rng)
        self.boundary_norm1 = LayerNorm(d)
        self.intra_attn = MultiHeadSelfAttention(d, config.n_heads, rng)
        self.boundary_norm2 = LayerNorm(d)
        self.inter_attn = MultiHeadSelfAttention(d, config.n_heads, rng)
        self.boundary_norm3 = LayerNorm(d)
        self.boundary_ffn = FeedForward(d, config.d_ffn, rng)
        self.coord_head = MLP([d, d, 2], rng, zero_last=True)
        # preditor de centros
        self.center_q = Linear(d, d, rng)
        self.center_k = Linear(d, d, rng)
        self.center_v = Linear(d, d, rng)
        self.center_mlp = MLP([d, d, d, 2], rng, zero_last=True)
        # caracteres
        self.char_attn = MSDeformAttn(d, config.n_heads, config.n_levels, config.n_points, rng)
        self.char_norm1 = LayerNorm(d)
        self.char_self_attn = MultiHeadSelfAttention(d, config.n_heads, rng)
        self.char_norm2 = LayerNorm(d)
        self.char_ffn = FeedForward(d, config.d_ffn, rng)
        # cabeças
        self.class_head = Linear(d, 1, rng)
        self.class_head.bias.data[:] = -2.0
        self.char_head = Linear(d, config.vocab_size, rng)

    def boundary(self, state, memory):
        cfg = self.config
        q, n, d = state.q_n.shape
        pos_refs = _center_refs(state, n) if cfg.hlpe_off else state.boundary_refs
        pos = sine_embedding(pos_refs, d)
        base = _center_refs(state, n) if cfg.hld_off else state.boundary_refs

        composite = T.reshape(T.add(state.q_n, pos), (q * n, d))
        attended = self.boundary_attn(composite, base.reshape(q * n, 2), memory,
                                      trace=state.trace, stage='boundary', layer=state.layer)
        x = self.boundary_norm1(T.add(state.q_n, T.reshape(attended, (q, n, d))))

        x = self.boundary_norm2(T.add(x, self.intra_attn(T.add(x, pos), x)))
        xt = T.transpose(x, (1, 0, 2))
        post = T.transpose(pos, (1, 0, 2))
        inter = T.transpose(self.inter_attn(T.add(xt, post), xt), (1, 0, 2))
        x = self.boundary_ffn(self.boundary_norm3(T.add(x, inter)))

        coords = T.sigmoid(T.add(T.inverse_sigmoid(state.boundary_refs), self.coord_head(x)))
        state.ref_history.append(('boundary', state.layer, state.boundary_refs.copy()))
        state.q_n = x
        state.boundary_refs = T.constant(coords)
        return coords

    def predict_centers(self, state):
        cfg = self.config
        q, m, d = state.q_m.shape
        char_pos = sine_embedding(_center_refs(state, m) if cfg.hlpe_off else state.char_refs, d)
        n = state.q_n.shape[1]
        bnd_pos = sine_embedding(_center_refs(state, n) if cfg.hlpe_off else state.boundary_refs, d)

        queries = self.center_q(T.add(state.q_m, char_pos))
        keys = self.center_k(T.add(state.q_n, bnd_pos))
        values = self.center_v(state.q_n)
        scores = T.matmul(queries, T.transpose(keys, (0, 2, 1)))
        if cfg.raw_center_attention:
            weights = scores
        else:
            weights = T.softmax(T.mul(scores, 1.0 / math.sqrt(d)), axis=-1)
        offset = self.center_mlp(T.matmul(weights, values))
        if cfg.center_anchor:
            # deslocamento relativo à média dos pontos de contorno ponderada pela atenção
            if cfg.raw_center_attention:
                anchor = Tensor(np.repeat(state.boundary_refs.mean(axis=1, keepdims=True), m,
                                          axis=1))
            else:
                anchor = T.matmul(weights, Tensor(state.boundary_refs))
            offset = T.add(T.inverse_sigmoid(anchor), offset)
        centers = T.sigmoid(offset)
        state.char_refs = T.constant(centers)
        return centers

    def chars(self, state, memory):
        cfg = self.config
        q, m, d = state.q_m.shape
        pos = sine_embedding(_center_refs(state, m) if cfg.hlpe_off else state.char_refs, d)
        base = _center_refs(state, m) if cfg.hlr_off else state.char_refs

        composite = T.reshape(T.add(state.q_m, pos), (q * m, d))
        attended = self.char_attn(composite, base.reshape(q * m, 2), memory,
                                  trace=state.trace, stage='char', layer=state.layer)
        x = self.char_norm1(T.add(state.q_m, T.reshape(attended, (q, m, d))))
        # grupos = propostas: caracteres só atendem à própria instância
        x = self.char_norm2(T.add(x, self.char_self_attn(T.add(x, pos), x)))
        state.q_m = self.char_ffn(x)
        return state.q_m

    def heads(self, state, coords, centers):
        pooled = T.mean(state.q_n, axis=1)
        logits = T.reshape(self.class_head(pooled), (-1,))
        char_logits = self.char_head(state.q_m)
        prediction = {'logits': logits, 'boundary': coords, 'centers': centers,
                      'char_logits': char_logits}
        state.predictions.append(prediction)
        return prediction

    def __call__(self, state, memory):
        coords = self.boundary(state, memory)
        centers = self.predict_centers(state)
        self.chars(state, memory)
        prediction = self.heads(state, coords, centers)
        state.layer += 1
        return prediction


def boundary_decoder_layer(layer, state, memory):
    return layer.boundary(state, memory)


def char_center_predictor(layer, state):
    return layer.predict_centers(state)


def char_decoder_layer(layer, state, memory):
    return layer.chars(state, memory)


def predict_heads(layer, state, coords, centers):
    return layer.heads(state, coords, centers)
