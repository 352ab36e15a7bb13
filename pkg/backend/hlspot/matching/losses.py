"""
Perdas - HLSpot

L = L_enc + Σ_j (λ_cls L_cls + λ_coord L_coord + λ_ct L_ct + λ_char L_char)

O emparelhamento é calculado uma vez, com as saídas da última camada, e
reutilizado em todas as camadas do decoder.
"""

import numpy as np

from hlspot.matching.costs import (box_cxcywh_to_xyxy, cost_matrix, encoder_cost_matrix,
                                   tail_point)
from hlspot.matching.hungarian import MatchResult, hungarian
from hlspot.utils import tensor as T
from hlspot.utils.tensor import Tensor

LOSS_TERMS = ('L_cls', 'L_coord', 'L_ct', 'L_char')


def sigmoid_focal_loss(logits, positives, alpha, gamma, normalizer):
    """Focal binária somada sobre todas as posições e dividida pelo normalizador"""
    t = np.zeros(logits.shape)
    t[np.asarray(positives, dtype=np.int64)] = 1.0
    p = T.sigmoid(logits)
    pos = T.mul(T.mul(T.power(T.sub(1.0, p), gamma), T.neg(T.log_sigmoid(logits))), alpha * t)
    neg = T.mul(T.mul(T.power(p, gamma), T.neg(T.log_sigmoid(T.neg(logits)))),
                (1.0 - alpha) * (1.0 - t))
    return T.div(T.tsum(T.add(pos, neg)), float(normalizer))


def _detached(match, q):
    """Pares passados por T.constant: repetidos pela ConstantTape nos passos perturbados"""
    pairs = T.constant(np.array(match.pairs, dtype=np.int64).reshape(-1, 2))
    pairs = [(int(g), int(p)) for g, p in pairs]
    unmatched = sorted(set(range(q)) - {p for _, p in pairs})
    return MatchResult(pairs, unmatched, match.total_cost)


def match_final_layer(prediction, targets, weights, use_centers=True):
    probs = T.sigmoid(prediction['logits']).data
    cost = cost_matrix(probs, prediction['boundary'].data, prediction['centers'].data,
                       targets, weights, use_centers=use_centers)
    return _detached(hungarian(cost), len(probs))


def _center_supervision(targets, gt_idx, max_len):
    """Máscara [G, M, 1] dos slots supervisionados e os alvos [G, M, 2]"""
    mask = np.zeros((len(gt_idx), max_len, 1))
    goal = np.zeros((len(gt_idx), max_len, 2))
    for row, g in enumerate(gt_idx):
        target = targets[g]
        if target.centers_available:
            mask[row] = 1.0
            goal[row] = target.centers
        elif target.tail_supervision:
            mask[row, target.n_chars:] = 1.0
            goal[row] = tail_point(target)[None, :]
    return mask, goal


def decoder_losses(prediction, targets, match, weights):
    """
    Perdas de uma camada do decoder

    Args:
        prediction: dict com logits [Q], boundary [Q, N, 2], centers [Q, M, 2],
            char_logits [Q, M, V]
        targets: list[Target]
        match: MatchResult da última camada
        weights: MatchWeights

    Returns:
        dict: L_cls, L_coord, L_ct, L_char e total (Tensors escalares)
    """
    G = len(match.pairs)
    gt_idx, pred_idx = match.gt_indices, match.pred_indices
    losses = {'L_cls': sigmoid_focal_loss(prediction['logits'], pred_idx, weights.focal_alpha,
                                          weights.focal_gamma, max(G, 1))}
    zero = Tensor(0.0)
    if G == 0:
        losses.update({'L_coord': zero, 'L_ct': zero, 'L_char': zero})
    else:
        q, n, _ = prediction['boundary'].shape
        m = prediction['centers'].shape[1]
        gt_boundary = np.stack([targets[g].boundary for g in gt_idx])
        boundary = T.getitem(prediction['boundary'], pred_idx)
        losses['L_coord'] = T.div(T.tsum(T.tabs(T.sub(boundary, gt_boundary))), float(G * n))

        mask, goal = _center_supervision(targets, gt_idx, m)
        supervised = mask.sum()
        if supervised > 0:
            centers = T.getitem(prediction['centers'], pred_idx)
            diff = T.mul(T.tabs(T.sub(centers, goal)), np.repeat(mask, 2, axis=2))
            losses['L_ct'] = T.div(T.tsum(diff), float(supervised))
        else:
            losses['L_ct'] = zero

        labels = np.stack([targets[g].labels for g in gt_idx])
        onehot = np.zeros(prediction['char_logits'].shape[1:])[None].repeat(G, axis=0)
        np.put_along_axis(onehot, labels[..., None], 1.0, axis=-1)
        log_probs = T.log_softmax(T.getitem(prediction['char_logits'], pred_idx), axis=-1)
        losses['L_char'] = T.div(T.neg(T.tsum(T.mul(log_probs, onehot))), float(G * m))

    losses['total'] = T.add(T.add(T.mul(losses['L_cls'], weights.loss_cls),
                                  T.mul(losses['L_coord'], weights.loss_coord)),
                            T.add(T.mul(losses['L_ct'], weights.loss_ct),
                                  T.mul(losses['L_char'], weights.loss_char)))
    return losses


def _giou_pairs(pred_boxes, gt_boxes):
    """1 − gIoU elemento a elemento entre caixas cxcywh (Tensor [G, 4] vs ndarray)"""
    half_w = T.mul(pred_boxes[:, 2], 0.5)
    half_h = T.mul(pred_boxes[:, 3], 0.5)
    px0, px1 = T.sub(pred_boxes[:, 0], half_w), T.add(pred_boxes[:, 0], half_w)
    py0, py1 = T.sub(pred_boxes[:, 1], half_h), T.add(pred_boxes[:, 1], half_h)
    g = box_cxcywh_to_xyxy(gt_boxes)
    gx0, gy0, gx1, gy1 = g[:, 0], g[:, 1], g[:, 2], g[:, 3]

    iw = T.relu(T.sub(T.minimum(px1, gx1), T.maximum(px0, gx0)))
    ih = T.relu(T.sub(T.minimum(py1, gy1), T.maximum(py0, gy0)))
    inter = T.mul(iw, ih)
    area_p = T.mul(pred_boxes[:, 2], pred_boxes[:, 3])
    area_g = (gx1 - gx0) * (gy1 - gy0)
    union = T.sub(T.add(area_p, area_g), inter)
    hull = T.mul(T.sub(T.maximum(px1, gx1), T.minimum(px0, gx0)),
                 T.sub(T.maximum(py1, gy1), T.minimum(py0, gy0)))
    giou = T.sub(T.div(inter, union), T.div(T.sub(hull, union), hull))
    return T.sub(1.0, giou)


def encoder_losses(logits, boxes, targets, weights):
    """
    Perdas das propostas do encoder contra as caixas alinhadas das verdades

    Emparelhamento húngaro com custo focal + L1 + gIoU; perda
    λ_cls·focal + λ_coord·L1 + λ_giou·(1 − gIoU).

    Returns:
        Tensor escalar
    """
    probs = T.sigmoid(logits).data
    match = _detached(hungarian(encoder_cost_matrix(probs, boxes.data, targets, weights)),
                      len(probs))
    G = len(match.pairs)
    loss = T.mul(sigmoid_focal_loss(logits, match.pred_indices, weights.focal_alpha,
                                    weights.focal_gamma, max(G, 1)), weights.loss_cls)
    if G == 0:
        return loss
    gt_boxes = np.stack([targets[g].box for g in match.gt_indices])
    pred_boxes = T.getitem(boxes, match.pred_indices)
    l1 = T.div(T.tsum(T.tabs(T.sub(pred_boxes, gt_boxes))), float(G))
    giou = T.div(T.tsum(_giou_pairs(pred_boxes, gt_boxes)), float(G))
    return T.add(loss, T.add(T.mul(l1, weights.loss_coord), T.mul(giou, weights.loss_giou)))


def total_loss(layer_losses, enc_loss):
    """Soma literal: L_enc + Σ_j L_dec^(j)"""
    total = enc_loss
    for losses in layer_losses:
        total = T.add(total, losses['total'])
    return total


def compute_losses(output, targets, weights, use_centers=True):
    """
    Perdas de um passo completo do spotter

    Returns:
        tuple: (loss total, dict de termos somados entre camadas, MatchResult)
    """
    match = match_final_layer(output.final, targets, weights, use_centers=use_centers)
    layer_losses = [decoder_losses(pred, targets, match, weights) for pred in output.layers]
    enc = encoder_losses(output.encoder.logits, output.encoder.boxes, targets, weights)
    total = total_loss(layer_losses, enc)
    terms = {'L_enc': enc.item()}
    for term in LOSS_TERMS:
        terms[term] = float(sum(losses[term].item() for losses in layer_losses))
    terms['total'] = total.item()
    return total, terms, match
