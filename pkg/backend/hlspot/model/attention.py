"""
Atenção deformável multi-escala - HLSpot

Para cada consulta q com ponto de referência p (normalizado em [0, 1]²):

    out(q) = W_o · concat_h Σ_l Σ_k A_hlk(q) · (W_v x_l)_h [p + Δp_hlk(q) / (W_l, H_l)]

Δp e A são lineares em q; A passa por softmax sobre os L·K pontos de cada
cabeça. A leitura usa bilinear_sample (zero fora de [0, 1]²).
"""

import math

import numpy as np

from hlspot.errors import ShapeError
from hlspot.model.layers import Linear, Module, xavier
from hlspot.utils import tensor as T
from hlspot.utils.tensor import Tensor, parameter


class SamplingTrace:
    """Locais de amostragem registrados para o overlay de depuração"""

    def __init__(self):
        self.records = []

    def add(self, stage, layer, base, locations, weights):
        self.records.append({'stage': stage, 'layer': layer, 'base': np.array(base),
                             'locations': np.array(locations), 'weights': np.array(weights)})

    def last(self, stage):
        for record in reversed(self.records):
            if record['stage'] == stage:
                return record
        return None


class MSDeformAttn(Module):
    def __init__(self, d_model, n_heads, n_levels, n_points, rng):
        self.d_model = d_model
        self.n_heads = n_heads
        self.n_levels = n_levels
        self.n_points = n_points
        self.head_dim = d_model // n_heads
        self.value_proj = Linear(d_model, d_model, rng)
        self.output_proj = Linear(d_model, d_model, rng)
        # deslocamentos começam numa grade radial (pixels do nível), pesos uniformes
        self.offset_weight = parameter(np.zeros((d_model, n_heads * n_levels * n_points * 2)))
        angles = 2 * math.pi * np.arange(n_heads) / n_heads
        grid = np.stack([np.cos(angles), np.sin(angles)], axis=1)
        grid = grid / np.abs(grid).max(axis=1, keepdims=True)
        grid = np.tile(grid[:, None, None, :], (1, n_levels, n_points, 1))
        grid *= np.arange(1, n_points + 1)[None, None, :, None]
        self.offset_bias = parameter(grid.reshape(-1))
        self.attn_weight = parameter(np.zeros((d_model, n_heads * n_levels * n_points)))
        self.attn_bias = parameter(np.zeros(n_heads * n_levels * n_points))

    def randomize(self, rng, scale=0.1):
        """Pesos aleatórios para testes e verificações de oráculo"""
        self.offset_weight.data = rng.normal(0.0, scale, self.offset_weight.shape)
        self.offset_bias.data = rng.normal(0.0, 1.0, self.offset_bias.shape)
        self.attn_weight.data = rng.normal(0.0, scale, self.attn_weight.shape)
        self.attn_bias.data = rng.normal(0.0, scale, self.attn_bias.shape)
        d = self.d_model
        self.value_proj.weight.data = xavier(rng, d, d)
        self.output_proj.weight.data = xavier(rng, d, d)
        self.value_proj.bias.data = rng.normal(0.0, scale, d)
        self.output_proj.bias.data = rng.normal(0.0, scale, d)

    def project_values(self, pyramid):
        """x_l [d, H_l, W_l] → por cabeça [H, d_h, H_l, W_l]"""
        values = []
        for x in pyramid:
            d, h, w = x.shape
            if d != self.d_model:
                raise ShapeError('msdeform_attn', x.shape, (self.d_model, h, w))
            tokens = self.value_proj(T.transpose(T.reshape(x, (d, h * w)), (1, 0)))
            per_head = T.reshape(T.transpose(tokens, (1, 0)), (self.n_heads, self.head_dim, h, w))
            values.append(per_head)
        return values

    def __call__(self, query, ref, pyramid, values=None, trace=None, stage='', layer=0):
        """
        Args:
            query: Tensor [Nq, d]
            ref: ndarray [Nq, 2] de pontos de referência (sem gradiente)
            pyramid: Lista de L mapas Tensor [d, H_l, W_l]
            values: Projeção de valores já calculada (reuso entre chamadas)
            trace: SamplingTrace opcional

        Returns:
            Tensor [Nq, d]
        """
        if len(pyramid) != self.n_levels:
            raise ShapeError('msdeform_attn', (len(pyramid),), (self.n_levels,))
        ref = np.asarray(ref.data if isinstance(ref, Tensor) else ref, dtype=np.float64)
        nq = query.shape[0]
        H, L, K = self.n_heads, self.n_levels, self.n_points
        values = values or self.project_values(pyramid)

        offsets = T.reshape(T.add(T.matmul(query, self.offset_weight), self.offset_bias),
                            (nq, H, L, K, 2))
        logits = T.reshape(T.add(T.matmul(query, self.attn_weight), self.attn_bias), (nq, H, L * K))
        weights = T.reshape(T.softmax(logits, axis=-1), (nq, H, L, K))

        norm = np.array([[x.shape[2], x.shape[1]] for x in pyramid], dtype=np.float64)
        norm = np.broadcast_to(norm[:, None, :], (L, K, 2)).copy()
        base = np.broadcast_to(ref[:, None, None, None, :], (nq, H, L, K, 2)).copy()
        locations = T.add(T.div(offsets, norm), base)

        heads = []
        for h in range(H):
            acc = None
            for l in range(L):
                sampled = T.bilinear_sample(values[l][h], locations[:, h, l])
                term = T.reshape(T.matmul(T.reshape(weights[:, h, l], (nq, 1, K)), sampled),
                                 (nq, self.head_dim))
                acc = term if acc is None else T.add(acc, term)
            heads.append(acc)
        if trace is not None:
            trace.add(stage, layer, ref, locations.data, weights.data)
        return self.output_proj(T.concat(heads, axis=-1))


def msdeform_attn(module, query, ref, pyramid, trace=None):
    return module(query, ref, pyramid, trace=trace)
