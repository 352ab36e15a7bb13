"""
Testes do emparelhamento: húngaro, custos, supervisão de centros e perdas
"""
import math
import os
import sys

import numpy as np
import pytest
from scipy.special import expit, log_softmax

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from hlspot.config import MatchWeights
from hlspot.errors import ContractError
from hlspot.matching.costs import (build_targets, cost_matrix, focal_cost, generalized_box_iou,
                                   match_cost)
from hlspot.matching.hungarian import MatchResult, hungarian
from hlspot.matching.losses import (_center_supervision, decoder_losses, encoder_losses,
                                    match_final_layer, total_loss)
from hlspot.models import TextInstance
from hlspot.monitor.checks import brute_force_assignment
from hlspot.utils import tensor as T
from hlspot.utils.vocabulary import Vocabulary

VOCAB = Vocabulary("AB ")


def _instance(centers=True, tail=False):
    inst = TextInstance([[2, 2], [8, 2], [8, 6], [2, 6]], "AB",
                        [[3.5, 4], [6.5, 4]] if centers else None)
    inst.tail_supervision = tail
    return inst


class TestHungarian:
    """Atribuição de custo mínimo"""

    def test_diagonal(self):
        """Diagonal 1 com 5 fora → identidade com custo 3"""
        cost = np.full((3, 3), 5.0)
        np.fill_diagonal(cost, 1.0)
        result = hungarian(cost)
        assert result.pairs == [(0, 0), (1, 1), (2, 2)]
        assert result.total_cost == pytest.approx(3.0)
        assert result.unmatched == []

    def test_fewer_targets(self):
        """G < Q deixa predições sem par"""
        cost = np.array([[4.0, 1.0, 3.0]])
        result = hungarian(cost)
        assert result.pairs == [(0, 1)]
        assert result.unmatched == [0, 2]

    def test_empty(self):
        result = hungarian(np.zeros((0, 4)))
        assert result.pairs == []
        assert result.unmatched == [0, 1, 2, 3]

    def test_more_targets_than_predictions(self):
        with pytest.raises(ContractError):
            hungarian(np.zeros((3, 2)))

    def test_non_finite(self):
        with pytest.raises(ContractError):
            hungarian(np.array([[np.inf, 1.0]]))

    def test_ties_lexicographic(self):
        """Empates resolvidos pela atribuição lexicograficamente menor"""
        result = hungarian(np.zeros((2, 3)))
        assert result.pairs == [(0, 0), (1, 1)]

    def test_against_brute_force(self):
        """Custo ótimo e, em matrizes inteiras, a mesma atribuição"""
        rng = np.random.default_rng(3)
        for _ in range(50):
            cost = rng.uniform(0.0, 10.0, (4, 5))
            expected, _ = brute_force_assignment(cost)
            assert hungarian(cost).total_cost == pytest.approx(expected)
        for _ in range(50):
            cost = rng.integers(0, 3, (3, 4)).astype(np.float64)
            _, expected = brute_force_assignment(cost)
            assert [q for _, q in hungarian(cost).pairs] == expected


class TestCosts:
    """Custos de emparelhamento"""

    def test_focal_cost_half(self):
        """Em b̂=0.5 o custo é (2α−1)·0.5^γ·log 2"""
        expected = (0.25 - 0.75) * 0.25 * math.log(2.0)
        assert focal_cost(0.5, 0.25, 2.0) == pytest.approx(expected)

    def test_focal_cost_monotone(self):
        """Probabilidade maior → custo menor"""
        costs = focal_cost(np.array([0.1, 0.5, 0.9]), 0.25, 2.0)
        assert costs[0] > costs[1] > costs[2]

    def test_center_term_gated(self):
        """Sem centros disponíveis o termo de centros desaparece"""
        weights = MatchWeights()
        with_c = build_targets([_instance(True)], 10, 10, VOCAB, 3)[0]
        without = build_targets([_instance(False)], 10, 10, VOCAB, 3)[0]
        boundary = with_c.boundary
        centers = np.zeros((3, 2))
        base = match_cost(0.5, boundary, centers, without, weights)
        gated = match_cost(0.5, boundary, centers, with_c, weights, use_centers=False)
        full = match_cost(0.5, boundary, centers, with_c, weights)
        assert base == pytest.approx(gated)
        diff = np.abs(centers[:2] - with_c.centers[:2]).sum()
        assert full - gated == pytest.approx(weights.cost_center / 2 * diff)

    def test_matrix_matches_scalar(self):
        """cost_matrix confere com match_cost entrada a entrada"""
        rng = np.random.default_rng(0)
        weights = MatchWeights()
        targets = build_targets([_instance(True), _instance(False)], 10, 10, VOCAB, 3)
        probs = rng.uniform(0.05, 0.95, 4)
        boundaries = rng.uniform(0, 1, (4, 4, 2))
        centers = rng.uniform(0, 1, (4, 3, 2))
        matrix = cost_matrix(probs, boundaries, centers, targets, weights)
        for g, target in enumerate(targets):
            for q in range(4):
                assert matrix[g, q] == pytest.approx(
                    match_cost(probs[q], boundaries[q], centers[q], target, weights))

    def test_dont_care_not_a_target(self):
        inst = _instance()
        inst.dont_care = True
        assert build_targets([inst], 10, 10, VOCAB, 3) == []

    def test_giou(self):
        """gIoU de caixas iguais é 1 e de caixas afastadas é negativo"""
        a = np.array([[0.0, 0.0, 1.0, 1.0]])
        b = np.array([[0.0, 0.0, 1.0, 1.0], [2.0, 0.0, 3.0, 1.0]])
        giou = generalized_box_iou(a, b)
        assert giou[0, 0] == pytest.approx(1.0)
        assert giou[0, 1] == pytest.approx(-1.0 / 3.0)


class TestCenterSupervision:
    """Supervisão fraca de centros"""

    def test_annotated_centers_all_slots(self):
        targets = build_targets([_instance(True)], 10, 10, VOCAB, 3)
        mask, goal = _center_supervision(targets, [0], 3)
        np.testing.assert_allclose(mask[0, :, 0], [1, 1, 1])
        np.testing.assert_allclose(goal[0, 0], [0.35, 0.4])

    def test_tail_only(self):
        """Instância sem centros aceitos supervisiona só os slots de preenchimento"""
        targets = build_targets([_instance(False, tail=True)], 10, 10, VOCAB, 3)
        mask, goal = _center_supervision(targets, [0], 3)
        np.testing.assert_allclose(mask[0, :, 0], [0, 0, 1])
        np.testing.assert_allclose(goal[0, 2], [0.8, 0.4])

    def test_no_supervision(self):
        targets = build_targets([_instance(False)], 10, 10, VOCAB, 3)
        mask, _ = _center_supervision(targets, [0], 3)
        assert mask.sum() == 0


def _prediction(targets, rng, q=2):
    """Predição com a proposta 0 sobre a primeira verdade e a 1 deslocada"""
    boundary = np.stack([targets[0].boundary, targets[0].boundary + 0.2] if targets else
                        [np.full((4, 2), 0.5)] * q)
    centers = np.stack([targets[0].centers, targets[0].centers + 0.2] if targets else
                       [np.full((3, 2), 0.5)] * q)
    return {'logits': T.Tensor(rng.normal(size=q)), 'boundary': T.Tensor(boundary),
            'centers': T.Tensor(centers),
            'char_logits': T.Tensor(rng.normal(size=(q, 3, len(VOCAB.charset) + 1)))}


class TestLosses:
    """Perdas do decoder e do encoder"""

    def test_perfect_match(self):
        """Contorno e centros exatos: só sobra a entropia cruzada dos caracteres"""
        targets = build_targets([_instance()], 10, 10, VOCAB, 3)
        pred = _prediction(targets, np.random.default_rng(0))
        losses = decoder_losses(pred, targets, MatchResult([(0, 0)], [1]), MatchWeights())
        assert losses['L_coord'].item() == pytest.approx(0.0)
        assert losses['L_ct'].item() == pytest.approx(0.0)
        log_probs = log_softmax(pred['char_logits'].data[0], axis=-1)
        expected = -np.mean(log_probs[np.arange(3), targets[0].labels])
        assert losses['L_char'].item() == pytest.approx(expected)

    def test_no_targets(self):
        """G = 0: apenas o termo negativo da focal"""
        weights = MatchWeights()
        pred = _prediction([], np.random.default_rng(1))
        losses = decoder_losses(pred, [], MatchResult([], [0, 1]), weights)
        p = expit(pred['logits'].data)
        expected = np.sum((1 - weights.focal_alpha) * p ** weights.focal_gamma * -np.log(1 - p))
        assert losses['L_cls'].item() == pytest.approx(expected)
        for term in ('L_coord', 'L_ct', 'L_char'):
            assert losses[term].item() == 0.0
        assert losses['total'].item() == pytest.approx(weights.loss_cls * expected)

    def test_one_target_two_predictions(self):
        """Logits 0 e contorno deslocado 0.1 em x, conferidos à mão"""
        targets = build_targets([_instance()], 10, 10, VOCAB, 3)
        pred = _prediction(targets, np.random.default_rng(2))
        pred['logits'] = T.Tensor(np.zeros(2))
        shifted = targets[0].boundary + np.array([0.1, 0.0])
        pred['boundary'] = T.Tensor(np.stack([shifted, shifted]))
        losses = decoder_losses(pred, targets, MatchResult([(0, 0)], [1]), MatchWeights())
        # α·0.25·ln2 da positiva + (1 − α)·0.25·ln2 da negativa
        assert losses['L_cls'].item() == pytest.approx(0.25 * math.log(2))
        assert losses['L_coord'].item() == pytest.approx(0.1)

    def test_encoder_identical_boxes(self):
        """Caixa idêntica: L1 e gIoU zerados, resta a focal"""
        weights = MatchWeights()
        targets = build_targets([_instance()], 10, 10, VOCAB, 3)
        logits = np.array([2.0, -2.0])
        boxes = np.stack([targets[0].box, [0.9, 0.9, 0.05, 0.05]])
        loss = encoder_losses(T.Tensor(logits), T.Tensor(boxes), targets, weights)
        p = expit(logits)
        alpha, gamma = weights.focal_alpha, weights.focal_gamma
        focal = (alpha * (1 - p[0]) ** gamma * -np.log(p[0])
                 + (1 - alpha) * p[1] ** gamma * -np.log(1 - p[1]))
        assert loss.item() == pytest.approx(weights.loss_cls * focal)

    def test_encoder_disjoint_boxes(self):
        """Caixas disjuntas e distantes: 1 − gIoU > 1"""
        weights = MatchWeights(loss_cls=0.0, loss_coord=0.0, loss_giou=1.0)
        targets = build_targets([_instance()], 10, 10, VOCAB, 3)
        loss = encoder_losses(T.Tensor(np.zeros(1)), T.Tensor(np.array([[0.9, 0.9, 0.1, 0.1]])),
                              targets, weights)
        assert loss.item() > 1.0

    def test_total_zero_weights(self):
        zero = MatchWeights(loss_cls=0.0, loss_coord=0.0, loss_ct=0.0, loss_char=0.0,
                            loss_giou=0.0)
        targets = build_targets([_instance()], 10, 10, VOCAB, 3)
        pred = _prediction(targets, np.random.default_rng(3))
        layer = decoder_losses(pred, targets, MatchResult([(0, 0)], [1]), zero)
        enc = encoder_losses(pred['logits'], T.Tensor(np.full((2, 4), 0.5)), targets, zero)
        assert total_loss([layer], enc).item() == 0.0

    def test_total_sums_layers(self):
        """Soma de três camadas igual ao recálculo camada a camada"""
        weights = MatchWeights()
        targets = build_targets([_instance()], 10, 10, VOCAB, 3)
        rng = np.random.default_rng(4)
        match = MatchResult([(0, 0)], [1])
        preds = [_prediction(targets, rng) for _ in range(3)]
        layers = [decoder_losses(p, targets, match, weights) for p in preds]
        enc = encoder_losses(preds[0]['logits'], T.Tensor(np.full((2, 4), 0.5)), targets,
                             weights)
        expected = enc.item() + sum(
            decoder_losses(p, targets, match, weights)['total'].item() for p in preds)
        assert total_loss(layers, enc).item() == pytest.approx(expected)

    def test_replayed_match_is_fixed(self):
        """Sob a fita, o emparelhamento gravado se repete mesmo com custos novos"""
        weights = MatchWeights()
        targets = build_targets([_instance()], 10, 10, VOCAB, 3)
        pred = _prediction(targets, np.random.default_rng(5))
        pred['logits'] = T.Tensor(np.zeros(2))
        swapped = dict(pred, boundary=T.Tensor(pred['boundary'].data[::-1].copy()),
                       centers=T.Tensor(pred['centers'].data[::-1].copy()))
        assert match_final_layer(swapped, targets, weights).pairs == [(0, 1)]

        tape = T.ConstantTape()
        with T.constant_tape(tape):
            recorded = match_final_layer(pred, targets, weights)
        tape.replay()
        with T.constant_tape(tape):
            replayed = match_final_layer(swapped, targets, weights)
        assert recorded.pairs == [(0, 0)]
        assert replayed.pairs == recorded.pairs
        assert replayed.unmatched == [1]
