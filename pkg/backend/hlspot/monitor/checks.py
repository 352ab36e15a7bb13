"""
Verificações por oráculo - HLSpot

Cada verificação compara uma peça do sistema contra uma reimplementação
independente (diferenças finitas, laços ingênuos, força bruta, rasterização)
e devolve um CheckResult.
"""

import itertools
import logging
import time

import numpy as np
import shapely
from shapely.geometry import MultiPoint

from hlspot.matching.hungarian import hungarian
from hlspot.model.attention import MSDeformAttn
from hlspot.utils import tensor as T
from hlspot.utils.geometry import polygon_iou

from .alerts import alert

logger = logging.getLogger(__name__)

FD_STEP = 1e-5
GRAD_FLOOR = 1e-6
OP_GRAD_TOL = 1e-4
OP_SEEDS = 100
DEFORM_CONFIGS = 50
DEFORM_TOL = 1e-12
HUNGARIAN_CASES = ((5, 1000), (6, 200))
HUNGARIAN_TIE_CASES = 200
IOU_PAIRS = 500
IOU_RASTER = 512
IOU_TOL = 1e-2


class CheckResult:
    def __init__(self, name, ok, cases, worst=0.0, seconds=0.0, details=None):
        self.name = name
        self.ok = bool(ok)
        self.cases = cases
        self.worst = float(worst)
        self.seconds = float(seconds)
        self.details = details or {}

    def to_dict(self):
        return {'name': self.name, 'ok': self.ok, 'cases': self.cases, 'worst': self.worst,
                'seconds': round(self.seconds, 3), 'details': self.details}


def _finish(name, ok, cases, worst, t0, details, summary):
    result = CheckResult(name, ok, cases, worst, time.time() - t0, details)
    if ok:
        logger.info(f"✅ {name} OK | {cases} casos | pior {worst:.2e} | {result.seconds:.1f}s")
    else:
        alert(f"Verificação {name} falhou", summary, "crit")
    return result


# ---------------------------------------------------------------------------
# gradientes
# ---------------------------------------------------------------------------

def relative_error(autodiff, numeric, floor=GRAD_FLOOR):
    autodiff, numeric = np.asarray(autodiff), np.asarray(numeric)
    scale = np.maximum(np.maximum(np.abs(autodiff), np.abs(numeric)), floor)
    return float(np.max(np.abs(autodiff - numeric) / scale)) if autodiff.size else 0.0


def _contract(fn, inputs, weights):
    return T.tsum(T.mul(fn(*inputs), weights))


def gradient_check(fn, arrays, rng, h=FD_STEP, floor=GRAD_FLOOR):
    """
    Autodiff contra diferenças finitas centrais de Σ fn(arrays)·R, R aleatório

    Returns:
        float: Maior erro relativo entre todas as entradas
    """
    arrays = [np.array(a, dtype=np.float64) for a in arrays]
    with T.no_grad():
        shape = fn(*[T.Tensor(a) for a in arrays]).shape
    weights = rng.normal(size=shape)

    params = [T.parameter(a) for a in arrays]
    _contract(fn, params, weights).backward()
    worst = 0.0
    for i, p in enumerate(params):
        autodiff = p.grad if p.grad is not None else np.zeros_like(p.data)
        numeric = np.zeros_like(arrays[i])
        for idx in np.ndindex(arrays[i].shape):
            values = []
            for sign in (1.0, -1.0):
                shifted = [a.copy() for a in arrays]
                shifted[i][idx] += sign * h
                with T.no_grad():
                    values.append(_contract(fn, [T.Tensor(a) for a in shifted], weights).item())
            numeric[idx] = (values[0] - values[1]) / (2 * h)
        worst = max(worst, relative_error(autodiff, numeric, floor))
    return worst


def _signed(rng, shape, low=0.2):
    return rng.choice([-1.0, 1.0], size=shape) * rng.uniform(low, 1.0, shape)


def _apart(rng, shape):
    a = rng.normal(size=shape)
    return [a, a + _signed(rng, shape)]


# cada caso: rng → (função de Tensors, entradas)
OP_CASES = {
    'add': lambda rng: (T.add, [rng.normal(size=(2, 3, 4)), rng.normal(size=(3, 4))]),
    'sub': lambda rng: (T.sub, [rng.normal(size=(3, 4)), rng.normal(size=(2, 3, 4))]),
    'mul': lambda rng: (T.mul, [rng.normal(size=(2, 3, 4)), rng.normal(size=(4,))]),
    'div': lambda rng: (T.div, [rng.normal(size=(3, 4)), _signed(rng, (3, 4), 0.5)]),
    'maximum': lambda rng: (T.maximum, _apart(rng, (3, 4))),
    'minimum': lambda rng: (T.minimum, _apart(rng, (3, 4))),
    'matmul': lambda rng: (T.matmul, [rng.normal(size=(2, 3, 4)), rng.normal(size=(4, 5))]),
    'neg': lambda rng: (T.neg, [rng.normal(size=(3, 4))]),
    'exp': lambda rng: (T.exp, [0.5 * rng.normal(size=(3, 4))]),
    'log': lambda rng: (T.log, [rng.uniform(0.5, 2.0, (3, 4))]),
    'abs': lambda rng: (T.tabs, [_signed(rng, (3, 4))]),
    'square': lambda rng: (T.square, [rng.normal(size=(3, 4))]),
    'sqrt': lambda rng: (T.sqrt, [rng.uniform(0.5, 2.0, (3, 4))]),
    'power': lambda rng: (lambda x: T.power(x, 2.5), [rng.uniform(0.5, 2.0, (3, 4))]),
    'sigmoid': lambda rng: (T.sigmoid, [3.0 * rng.normal(size=(3, 4))]),
    'log_sigmoid': lambda rng: (T.log_sigmoid, [3.0 * rng.normal(size=(3, 4))]),
    'inverse_sigmoid': lambda rng: (T.inverse_sigmoid, [rng.uniform(0.1, 0.9, (3, 4))]),
    'relu': lambda rng: (T.relu, [_signed(rng, (3, 4))]),
    'sum': lambda rng: (lambda x: T.tsum(x, axis=1), [rng.normal(size=(2, 3, 4))]),
    'mean': lambda rng: (lambda x: T.mean(x, axis=0, keepdims=True), [rng.normal(size=(3, 4))]),
    'softmax': lambda rng: (lambda x: T.softmax(x, axis=-1), [rng.normal(size=(3, 5))]),
    'log_softmax': lambda rng: (lambda x: T.log_softmax(x, axis=-1), [rng.normal(size=(3, 5))]),
    'layer_norm': lambda rng: (T.layer_norm, [rng.normal(size=(3, 6)), rng.normal(size=(6,)),
                                              rng.normal(size=(6,))]),
    'reshape': lambda rng: (lambda x: T.reshape(x, (4, 3)), [rng.normal(size=(3, 4))]),
    'transpose': lambda rng: (lambda x: T.transpose(x, (2, 0, 1)), [rng.normal(size=(2, 3, 4))]),
    'getitem': lambda rng: (lambda x: T.getitem(x, (np.array([0, 2, 2]), slice(1, 3))),
                            [rng.normal(size=(3, 4))]),
    'embedding_lookup': lambda rng: (lambda t: T.embedding_lookup(t, np.array([[1, 0], [3, 1]])),
                                     [rng.normal(size=(4, 3))]),
    'broadcast_to': lambda rng: (lambda x: T.broadcast_to(x, (2, 3, 4)),
                                 [rng.normal(size=(3, 4))]),
    'concat': lambda rng: (lambda a, b: T.concat([a, b], axis=1),
                           [rng.normal(size=(3, 2)), rng.normal(size=(3, 4))]),
    'stack': lambda rng: (lambda a, b: T.stack([a, b], axis=1),
                          [rng.normal(size=(3, 4)), rng.normal(size=(3, 4))]),
    'bilinear_sample': lambda rng: (T.bilinear_sample, [rng.normal(size=(3, 5, 6)),
                                                        rng.uniform(0.05, 0.95, (4, 2))]),
    'conv2d': lambda rng: (lambda x, w, b: T.conv2d(x, w, b, stride=2, padding=1),
                           [rng.normal(size=(2, 6, 6)), rng.normal(size=(3, 2, 3, 3)),
                            rng.normal(size=(3,))]),
}


def check_op_gradients(seeds=OP_SEEDS, ops=None):
    """Diferenças finitas para cada operação diferenciável em `seeds` sementes"""
    t0 = time.time()
    names = ops or list(OP_CASES)
    per_op = {}
    for name in names:
        worst = 0.0
        for seed in range(seeds):
            rng = np.random.default_rng(seed)
            fn, arrays = OP_CASES[name](rng)
            worst = max(worst, gradient_check(fn, arrays, rng))
        per_op[name] = worst
    worst = max(per_op.values()) if per_op else 0.0
    failing = {k: v for k, v in per_op.items() if v >= OP_GRAD_TOL}
    return _finish('gradient.ops', not failing, len(names) * seeds, worst, t0,
                   {'per_op': per_op}, f"Operações fora da tolerância: {failing}")


# ---------------------------------------------------------------------------
# atenção deformável
# ---------------------------------------------------------------------------

def naive_bilinear(fmap, x, y):
    """Leitura bilinear de um ponto com laços explícitos"""
    C, H, W = fmap.shape
    acc = np.zeros(C)
    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
        return acc
    px, py = x * W - 0.5, y * H - 0.5
    x0, y0 = int(np.floor(px)), int(np.floor(py))
    fx, fy = px - x0, py - y0
    for dx in (0, 1):
        for dy in (0, 1):
            xi, yi = x0 + dx, y0 + dy
            if 0 <= xi < W and 0 <= yi < H:
                w = (fx if dx else 1.0 - fx) * (fy if dy else 1.0 - fy)
                acc += w * fmap[:, yi, xi]
    return acc


def naive_msdeform_attn(module, query, ref, pyramid):
    """
    Soma direta sobre consultas, cabeças, níveis e pontos

    Args:
        module: MSDeformAttn (só os pesos são lidos)
        query: ndarray [Nq, d]
        ref: ndarray [Nq, 2]
        pyramid: list de ndarray [d, H_l, W_l]
    """
    H, L, K = module.n_heads, module.n_levels, module.n_points
    dh = module.head_dim
    wv, bv = module.value_proj.weight.data, module.value_proj.bias.data
    values = [np.tensordot(wv, x, axes=([0], [0])) + bv[:, None, None] for x in pyramid]
    out = np.zeros((len(query), module.d_model))
    for q in range(len(query)):
        offsets = (query[q] @ module.offset_weight.data + module.offset_bias.data).reshape(H, L, K, 2)
        logits = (query[q] @ module.attn_weight.data + module.attn_bias.data).reshape(H, L * K)
        heads = []
        for h in range(H):
            a = np.exp(logits[h] - logits[h].max())
            a = a / a.sum()
            acc = np.zeros(dh)
            for l in range(L):
                _, hl, wl = pyramid[l].shape
                for k in range(K):
                    x = ref[q, 0] + offsets[h, l, k, 0] / wl
                    y = ref[q, 1] + offsets[h, l, k, 1] / hl
                    acc += a[l * K + k] * naive_bilinear(values[l][h * dh:(h + 1) * dh], x, y)
            heads.append(acc)
        out[q] = np.concatenate(heads) @ module.output_proj.weight.data \
            + module.output_proj.bias.data
    return out


def random_deform_case(rng):
    H = int(rng.integers(1, 3))
    L = int(rng.integers(1, 4))
    K = int(rng.integers(1, 5))
    d = H * 2 * int(rng.integers(1, 3))
    module = MSDeformAttn(d, H, L, K, rng)
    module.randomize(rng)
    nq = int(rng.integers(1, 6))
    query = rng.normal(size=(nq, d))
    ref = rng.uniform(-0.1, 1.1, (nq, 2))
    pyramid = [rng.normal(size=(d, int(rng.integers(2, 7)), int(rng.integers(2, 7))))
               for _ in range(L)]
    return module, query, ref, pyramid


def check_deform_attn(configs=DEFORM_CONFIGS, seed=0):
    """msdeform_attn contra a soma direta em configurações aleatórias"""
    t0 = time.time()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(configs):
        module, query, ref, pyramid = random_deform_case(rng)
        with T.no_grad():
            fast = module(T.Tensor(query), ref, [T.Tensor(x) for x in pyramid]).data
        slow = naive_msdeform_attn(module, query, ref, pyramid)
        worst = max(worst, float(np.max(np.abs(fast - slow)) / max(1.0, np.abs(slow).max())))
    return _finish('deform_attn', worst <= DEFORM_TOL, configs, worst, t0, {},
                   f"Diferença máxima {worst:.3e} > {DEFORM_TOL:.0e}")


# ---------------------------------------------------------------------------
# emparelhamento
# ---------------------------------------------------------------------------

def brute_force_assignment(cost):
    """Menor custo total; entre empates, a atribuição lexicograficamente menor"""
    G, Q = cost.shape
    best, best_perm = None, None
    for perm in itertools.permutations(range(Q), G):
        total = float(cost[np.arange(G), perm].sum())
        if best is None or total < best - 1e-12:
            best, best_perm = total, perm
    return best, list(best_perm)


def check_hungarian(seed=0, cases=HUNGARIAN_CASES, tie_cases=HUNGARIAN_TIE_CASES):
    """Custo ótimo contra força bruta; atribuição exata em matrizes inteiras com empates"""
    t0 = time.time()
    rng = np.random.default_rng(seed)
    worst, failures, total = 0.0, 0, 0
    for size, count in cases:
        for _ in range(count):
            cost = rng.uniform(0.0, 10.0, (size, size))
            expected, _ = brute_force_assignment(cost)
            got = hungarian(cost).total_cost
            gap = abs(got - expected)
            worst = max(worst, gap)
            failures += gap > 1e-9
            total += 1
    for _ in range(tie_cases):
        G = int(rng.integers(1, 5))
        cost = rng.integers(0, 3, (G, 4)).astype(np.float64)
        _, expected = brute_force_assignment(cost)
        got = [q for _, q in hungarian(cost).pairs]
        failures += got != expected
        total += 1
    return _finish('hungarian', failures == 0, total, worst, t0, {'failures': failures},
                   f"{failures}/{total} casos divergem da força bruta")


# ---------------------------------------------------------------------------
# IoU
# ---------------------------------------------------------------------------

def raster_iou(a, b, resolution=IOU_RASTER):
    """IoU por contagem de pixels numa grade resolution² sobre [0, 1]²"""
    ticks = (np.arange(resolution) + 0.5) / resolution
    xs, ys = np.meshgrid(ticks, ticks)
    ina = shapely.contains_xy(shapely.Polygon(a), xs, ys)
    inb = shapely.contains_xy(shapely.Polygon(b), xs, ys)
    union = np.count_nonzero(ina | inb)
    return np.count_nonzero(ina & inb) / union if union else 0.0


def random_convex_polygon(rng, count=6):
    hull = MultiPoint(rng.uniform(0.1, 0.9, (count, 2))).convex_hull
    return np.asarray(hull.exterior.coords)[:-1]


def check_polygon_iou(pairs=IOU_PAIRS, seed=0):
    """polygon_iou contra rasterização em polígonos convexos aleatórios"""
    t0 = time.time()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(pairs):
        a, b = random_convex_polygon(rng), random_convex_polygon(rng)
        worst = max(worst, abs(polygon_iou(a, b) - raster_iou(a, b)))
    return _finish('iou', worst < IOU_TOL, pairs, worst, t0, {},
                   f"Diferença máxima {worst:.3e} >= {IOU_TOL:.0e}")
