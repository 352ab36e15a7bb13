"""
Custos de emparelhamento - HLSpot

Custo entre a predição q e a verdade g:

    λ_cls · FL(b̂_q) + λ_coord · Σ_n |p_n − p̂_n|₁ + (λ_center / |C|) · Σ_{c<|C|} |p_c − p̂_c|₁

com FL(b̂) = α(1−b̂)^γ(−log b̂) − (1−α)b̂^γ(−log(1−b̂)). O termo de centros
só entra quando a instância tem centros disponíveis e |C| > 0.
"""

import logging

import numpy as np

from hlspot.errors import ContractError
from hlspot.utils.geometry import (bounding_box, char_center_targets, centerline_tail,
                                   normalize_points)

logger = logging.getLogger(__name__)

PROB_EPS = 1e-8


class Target:
    """Verdade normalizada para [0, 1]² pronta para custos e perdas"""

    def __init__(self, boundary, centers, n_chars, labels, centers_available,
                 tail_supervision, box, index):
        self.boundary = boundary
        self.centers = centers
        self.n_chars = n_chars
        self.labels = labels
        self.centers_available = centers_available
        self.tail_supervision = tail_supervision
        self.box = box
        self.index = index


def build_targets(instances, width, height, vocabulary, max_len):
    """
    Converte instâncias (pixels) em alvos normalizados

    Instâncias DON'T CARE, e as que o vocabulário não codifica, ficam de fora.

    Returns:
        list[Target]: `index` aponta para a instância de origem
    """
    scale = np.array([width, height], dtype=np.float64)
    targets = []
    for index, inst in enumerate(instances):
        if inst.dont_care:
            continue
        try:
            labels = vocabulary.encode(inst.transcription, max_len)
            centers = normalize_points(char_center_targets(inst, max_len), width, height)
        except ContractError as e:
            logger.warning(f"⚠️ Instância ignorada no treino: {str(e)}")
            continue
        x0, y0, x1, y1 = bounding_box(inst.polygon) / np.concatenate([scale, scale])
        box = np.array([(x0 + x1) / 2, (y0 + y1) / 2, x1 - x0, y1 - y0])
        boundary = normalize_points(inst.polygon.points, width, height)
        targets.append(Target(boundary, centers, len(inst.transcription), labels,
                              inst.centers_available, inst.tail_supervision, box, index))
    return targets


def tail_point(target):
    return centerline_tail(target.boundary)


def focal_cost(prob, alpha, gamma):
    prob = np.clip(np.asarray(prob, dtype=np.float64), PROB_EPS, 1.0 - PROB_EPS)
    pos = alpha * (1.0 - prob) ** gamma * (-np.log(prob))
    neg = (1.0 - alpha) * prob ** gamma * (-np.log(1.0 - prob))
    return pos - neg


def match_cost(prob, boundary, centers, target, weights, use_centers=True):
    """
    Custo de uma predição contra uma verdade

    Args:
        prob: b̂ da predição
        boundary: [N, 2] pontos previstos (normalizados)
        centers: [M, 2] centros previstos
        target: Target
        weights: MatchWeights
        use_centers: False remove o termo de centros por completo

    Returns:
        float
    """
    cost = weights.cost_cls * float(focal_cost(prob, weights.focal_alpha, weights.focal_gamma))
    cost += weights.cost_coord * float(np.abs(np.asarray(boundary) - target.boundary).sum())
    c = target.n_chars
    if use_centers and target.centers_available and c > 0:
        diff = np.abs(np.asarray(centers)[:c] - target.centers[:c]).sum()
        cost += weights.cost_center / c * float(diff)
    return cost


def cost_matrix(probs, boundaries, centers, targets, weights, use_centers=True):
    """Matriz G×Q vetorizada com os mesmos termos de match_cost"""
    probs = np.asarray(probs, dtype=np.float64)
    G, Q = len(targets), len(probs)
    cost = np.zeros((G, Q))
    if G == 0:
        return cost
    cls = weights.cost_cls * focal_cost(probs, weights.focal_alpha, weights.focal_gamma)
    for g, target in enumerate(targets):
        coord = np.abs(boundaries - target.boundary[None]).sum(axis=(1, 2))
        cost[g] = cls + weights.cost_coord * coord
        c = target.n_chars
        if use_centers and target.centers_available and c > 0:
            diff = np.abs(centers[:, :c] - target.centers[None, :c]).sum(axis=(1, 2))
            cost[g] += weights.cost_center / c * diff
    return cost


def box_cxcywh_to_xyxy(boxes):
    boxes = np.asarray(boxes, dtype=np.float64)
    cx, cy, w, h = boxes[..., 0], boxes[..., 1], boxes[..., 2], boxes[..., 3]
    return np.stack([cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2], axis=-1)


def generalized_box_iou(a, b):
    """gIoU par a par entre caixas xyxy [A, 4] e [B, 4]"""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    lt = np.maximum(a[:, None, :2], b[None, :, :2])
    rb = np.minimum(a[:, None, 2:], b[None, :, 2:])
    wh = np.clip(rb - lt, 0.0, None)
    inter = wh[..., 0] * wh[..., 1]
    union = area_a[:, None] + area_b[None, :] - inter
    iou = inter / np.maximum(union, PROB_EPS)
    lt_c = np.minimum(a[:, None, :2], b[None, :, :2])
    rb_c = np.maximum(a[:, None, 2:], b[None, :, 2:])
    hull = np.prod(np.clip(rb_c - lt_c, 0.0, None), axis=-1)
    return iou - (hull - union) / np.maximum(hull, PROB_EPS)


def encoder_cost_matrix(probs, boxes, targets, weights):
    """Focal + L1 + (1 − gIoU) entre caixas alinhadas aos eixos"""
    G = len(targets)
    if G == 0:
        return np.zeros((0, len(probs)))
    gt_boxes = np.stack([t.box for t in targets])
    cls = weights.cost_cls * focal_cost(probs, weights.focal_alpha, weights.focal_gamma)
    l1 = np.abs(gt_boxes[:, None, :] - np.asarray(boxes)[None, :, :]).sum(axis=-1)
    giou = generalized_box_iou(box_cxcywh_to_xyxy(gt_boxes), box_cxcywh_to_xyxy(boxes))
    return cls[None, :] + weights.cost_coord * l1 + weights.loss_giou * (1.0 - giou)
