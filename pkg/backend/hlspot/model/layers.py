"""
Camadas básicas - HLSpot
Registro de parâmetros, Linear, MLP, LayerNorm, FFN, autoatenção e codificação posicional
"""

import math

import numpy as np

from hlspot.errors import ContractError
from hlspot.utils import tensor as T
from hlspot.utils.tensor import Tensor, parameter


def xavier(rng, fan_in, fan_out):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class Module:
    """Base com nomes pontuados para parâmetros (otimizador e checkpoints)"""

    def named_parameters(self, prefix=''):
        found = []
        for name, value in vars(self).items():
            if name.startswith('_'):
                continue
            full = f"{prefix}{name}"
            if isinstance(value, Tensor) and value.requires_grad:
                found.append((full, value))
            elif isinstance(value, Module):
                found.extend(value.named_parameters(full + '.'))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        found.extend(item.named_parameters(f"{full}.{i}."))
        return found

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def state_dict(self):
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state):
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        if missing:
            raise ContractError(f"Parâmetros ausentes no estado: {', '.join(missing[:5])}")
        for name, p in own.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.shape:
                raise ContractError(f"Parâmetro {name}: shape {value.shape} != {p.shape}")
            p.data = value.copy()
            p.grad = None

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()


class Linear(Module):
    def __init__(self, d_in, d_out, rng, zero=False):
        self.weight = parameter(np.zeros((d_in, d_out)) if zero else xavier(rng, d_in, d_out))
        self.bias = parameter(np.zeros(d_out))

    def __call__(self, x):
        # x: [..., d_in] com pelo menos 2 dimensões
        return T.add(T.matmul(x, self.weight), self.bias)


class MLP(Module):
    """Lineares com ReLU entre elas; a última pode começar zerada"""

    def __init__(self, dims, rng, zero_last=False):
        self.layers = [Linear(dims[i], dims[i + 1], rng,
                              zero=zero_last and i == len(dims) - 2)
                       for i in range(len(dims) - 1)]

    def __call__(self, x):
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = T.relu(x)
        return x


class LayerNorm(Module):
    def __init__(self, d):
        self.gamma = parameter(np.ones(d))
        self.beta = parameter(np.zeros(d))

    def __call__(self, x):
        return T.layer_norm(x, self.gamma, self.beta)


class FeedForward(Module):
    """Bloco pós-norma: x + W2 relu(W1 x), seguido de LayerNorm"""

    def __init__(self, d, d_ffn, rng):
        self.linear1 = Linear(d, d_ffn, rng)
        self.linear2 = Linear(d_ffn, d, rng)
        self.norm = LayerNorm(d)

    def __call__(self, x):
        return self.norm(T.add(x, self.linear2(T.relu(self.linear1(x)))))


class MultiHeadSelfAttention(Module):
    """
    Autoatenção multi-cabeça sobre grupos independentes

    Entradas [B, T, d]: cada um dos B grupos atende apenas aos seus T
    elementos, então não há peso de atenção entre grupos.
    """

    def __init__(self, d, n_heads, rng):
        if d % n_heads:
            raise ContractError(f"d_model={d} não divisível por {n_heads} cabeças")
        self.n_heads = n_heads
        self.q_proj = Linear(d, d, rng)
        self.k_proj = Linear(d, d, rng)
        self.v_proj = Linear(d, d, rng)
        self.out_proj = Linear(d, d, rng)

    def _split(self, x):
        B, L, d = x.shape
        return T.transpose(T.reshape(x, (B, L, self.n_heads, d // self.n_heads)), (0, 2, 1, 3))

    def __call__(self, x_qk, x_v):
        B, L, d = x_qk.shape
        q = self._split(self.q_proj(x_qk))
        k = self._split(self.k_proj(x_qk))
        v = self._split(self.v_proj(x_v))
        scores = T.mul(T.matmul(q, T.transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(d // self.n_heads))
        weights = T.softmax(scores, axis=-1)
        out = T.transpose(T.matmul(weights, v), (0, 2, 1, 3))
        return self.out_proj(T.reshape(out, (B, L, d)))


def sine_embedding(points, d_model, temperature=10000.0):
    """
    Codificação senoidal de (x, y) normalizados: d_model/2 canais por eixo

    Args:
        points: ndarray [..., 2]

    Returns:
        Tensor [..., d_model] (constante, sem gradiente)
    """
    points = np.asarray(points.data if isinstance(points, Tensor) else points, dtype=np.float64)
    half = d_model // 2
    dim_t = temperature ** (2 * (np.arange(half) // 2) / half)
    scaled = points[..., None] * 2 * math.pi / dim_t
    emb = np.empty(scaled.shape)
    emb[..., 0::2] = np.sin(scaled[..., 0::2])
    emb[..., 1::2] = np.cos(scaled[..., 1::2])
    # ordem (y, x) como no DETR
    return Tensor(np.concatenate([emb[..., 1, :], emb[..., 0, :]], axis=-1))
