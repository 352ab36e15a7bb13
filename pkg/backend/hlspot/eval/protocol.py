"""
Protocolo de avaliação - HLSpot

Detecção por IoU de polígonos com emparelhamento guloso por score,
DON'T CARE, E2E sem léxico (None) e com léxico completo (Full), e recall
por faixas de comprimento e de ângulo.
"""

import logging
from concurrent.futures import ThreadPoolExecutor

import editdistance

from hlspot.config import HLSPOT_THREADS, EvalConfig
from hlspot.errors import ContractError
from hlspot.utils.geometry import polygon_iou, rotation_angle

logger = logging.getLogger(__name__)


class Score:
    def __init__(self, tp=0, n_pred=0, n_gt=0):
        self.tp = tp
        self.n_pred = n_pred
        self.n_gt = n_gt

    def __add__(self, other):
        return Score(self.tp + other.tp, self.n_pred + other.n_pred, self.n_gt + other.n_gt)

    @property
    def precision(self):
        return self.tp / self.n_pred if self.n_pred else 0.0

    @property
    def recall(self):
        return self.tp / self.n_gt if self.n_gt else 0.0

    @property
    def f(self):
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0

    def to_dict(self):
        return {'precision': self.precision, 'recall': self.recall, 'f': self.f,
                'tp': self.tp, 'n_pred': self.n_pred, 'n_gt': self.n_gt}


class DetectionResult:
    def __init__(self, pairs, false_positives, false_negatives, ignored, n_care):
        self.pairs = pairs
        self.false_positives = false_positives
        self.false_negatives = false_negatives
        self.ignored = ignored
        self.n_care = n_care

    @property
    def score(self):
        return Score(len(self.pairs), len(self.pairs) + len(self.false_positives), self.n_care)


def _polygon(item):
    return item['polygon'] if isinstance(item, dict) else item.polygon


def _text(pred):
    return pred.get('transcription', pred.get('text', ''))


def match_detections(preds, gts, iou_thresh=0.5):
    """
    Emparelhamento guloso um-para-um em ordem decrescente de score

    Empates de score seguem o índice da predição. Uma predição com
    IoU > iou_thresh contra uma verdade DON'T CARE sai da contagem; verdades
    DON'T CARE nunca contam como FN.

    Args:
        preds: list[dict] com polygon e score
        gts: list[TextInstance]

    Returns:
        DetectionResult: pares (predição, verdade), FPs, FNs e ignoradas
    """
    order = sorted(range(len(preds)), key=lambda i: (-preds[i]['score'], i))
    care = [g for g, inst in enumerate(gts) if not inst.dont_care]
    dont_care = [g for g, inst in enumerate(gts) if inst.dont_care]
    taken = set()
    pairs, false_positives, ignored = [], [], []
    for i in order:
        best, best_iou = None, iou_thresh
        for g in care:
            if g in taken:
                continue
            iou = polygon_iou(_polygon(preds[i]), gts[g].polygon)
            if iou > best_iou:
                best, best_iou = g, iou
        if best is not None:
            taken.add(best)
            pairs.append((i, best))
        elif any(polygon_iou(_polygon(preds[i]), gts[g].polygon) > iou_thresh for g in dont_care):
            ignored.append(i)
        else:
            false_positives.append(i)
    false_negatives = [g for g in care if g not in taken]
    return DetectionResult(pairs, false_positives, false_negatives, ignored, len(care))


def correct_with_lexicon(word, lexicon):
    """Palavra do léxico com menor distância de edição; empate → menor lexicograficamente"""
    if not lexicon:
        raise ContractError("Modo Full exige um léxico não vazio")
    word = word.upper()
    return min(lexicon, key=lambda w: (editdistance.eval(word, w), w))


def e2e_matches(detection, preds, gts, lexicon=None):
    """Pares de detecção cuja transcrição também confere (maiúsculas)"""
    matched = []
    for i, g in detection.pairs:
        text = _text(preds[i]).upper()
        if lexicon is not None:
            text = correct_with_lexicon(text, lexicon)
        if text == gts[g].transcription.upper():
            matched.append((i, g))
    return matched


def e2e_score(detection, preds, gts, lexicon_mode=None, lexicon=None):
    """
    P/R/F ponta a ponta

    Args:
        lexicon_mode: None ou 'full'
        lexicon: Palavras (obrigatório em 'full')

    Returns:
        Score
    """
    if lexicon_mode == 'full':
        words = sorted({w.upper() for w in (lexicon or [])})
        matched = e2e_matches(detection, preds, gts, words)
    elif lexicon_mode is None:
        matched = e2e_matches(detection, preds, gts)
    else:
        raise ContractError(f"Modo de léxico desconhecido: {lexicon_mode}")
    return Score(len(matched), detection.score.n_pred, detection.n_care)


def _in_angle_slice(angle, lo, hi):
    return lo <= angle < hi or (hi >= 90.0 and angle == hi)


def slice_counts(detection, preds, gts, config=None):
    """
    Recall E2E (None) restrito a faixas de comprimento e de ângulo

    Returns:
        dict: nome da faixa → Score (n_gt = população)
    """
    config = config or EvalConfig()
    recognized = {g for _, g in e2e_matches(detection, preds, gts)}
    care = [g for g, inst in enumerate(gts) if not inst.dont_care]
    slices = {}
    for length in config.length_slices:
        members = [g for g in care if len(gts[g].transcription) >= length]
        slices[f"len>={length}"] = Score(sum(g in recognized for g in members), 0, len(members))
    for lo, hi in config.angle_slices:
        closing = ']' if hi >= 90.0 else ')'
        members = [g for g in care if _in_angle_slice(rotation_angle(gts[g]), lo, hi)]
        slices[f"angle[{lo:g},{hi:g}{closing}"] = Score(sum(g in recognized for g in members), 0,
                                                         len(members))
    return slices


def slice_report(detection, preds, gts, config=None):
    """Recall por faixa (None quando a faixa está vazia) e população"""
    return {name: {'recall': score.recall if score.n_gt else None, 'population': score.n_gt}
            for name, score in slice_counts(detection, preds, gts, config).items()}


class EvalReport:
    def __init__(self, detection, e2e_none, e2e_full, slices, images):
        self.detection = detection
        self.e2e_none = e2e_none
        self.e2e_full = e2e_full
        self.slices = slices
        self.images = images

    def to_dict(self):
        return {
            'images': self.images,
            'detection': self.detection.to_dict(),
            'e2e_none': self.e2e_none.to_dict(),
            'e2e_full': self.e2e_full.to_dict() if self.e2e_full is not None else None,
            'slices': {name: {'recall': s.recall if s.n_gt else None, 'population': s.n_gt}
                       for name, s in self.slices.items()},
        }


def lexicon_from_ground_truth(gt_sets):
    return sorted({inst.transcription.upper() for gts in gt_sets for inst in gts
                   if not inst.dont_care and inst.transcription})


def evaluate(pred_sets, gt_sets, config=None, lexicon=None, threads=None):
    """
    Avalia várias imagens somando TP/FP/FN antes de calcular P/R/F

    Args:
        pred_sets: list[list[dict]] por imagem
        gt_sets: list[list[TextInstance]] por imagem
        lexicon: Léxico do modo Full (padrão: todas as palavras do conjunto de teste)

    Returns:
        EvalReport
    """
    config = config or EvalConfig()
    if len(pred_sets) != len(gt_sets):
        raise ContractError(f"{len(pred_sets)} conjuntos de predições para {len(gt_sets)} imagens")
    lexicon = lexicon_from_ground_truth(gt_sets) if lexicon is None else lexicon

    def one(index):
        preds, gts = pred_sets[index], gt_sets[index]
        detection = match_detections(preds, gts, config.iou_threshold)
        full = e2e_score(detection, preds, gts, 'full', lexicon) if lexicon else None
        return (detection.score, e2e_score(detection, preds, gts), full,
                slice_counts(detection, preds, gts, config))

    with ThreadPoolExecutor(max_workers=threads or HLSPOT_THREADS) as pool:
        results = list(pool.map(one, range(len(gt_sets))))

    det, none, full, slices = Score(), Score(), Score() if lexicon else None, {}
    for d, n, f, s in results:
        det, none = det + d, none + n
        if full is not None:
            full = full + f
        for name, score in s.items():
            slices[name] = slices.get(name, Score()) + score
    logger.info(f"📊 Avaliação: {len(gt_sets)} imagens | Det F {det.f:.4f} | "
                f"E2E None F {none.f:.4f}")
    return EvalReport(det, none, full, slices, len(gt_sets))
