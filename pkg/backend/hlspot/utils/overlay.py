"""
Overlay de resultados - HLSpot
Polígonos, centros de caracteres e (depuração) locais de amostragem
sombreados pelo peso de atenção
"""

import numpy as np
from PIL import Image, ImageDraw

POLYGON_COLOR = (220, 30, 30, 255)
CENTER_COLOR = (30, 90, 220, 255)
SAMPLE_COLOR = (255, 140, 0)
CENTER_RADIUS = 2
SAMPLE_RADIUS = 1


def sampling_for_prediction(record, prediction, max_len, width, height):
    """
    Locais de amostragem dos caracteres de uma predição, em pixels

    Args:
        record: Registro 'char' de SamplingTrace (última camada)
        prediction: dict de Spotter.spot (usa index e transcription)
        max_len: M
        width, height: Tamanho da imagem preparada (com preenchimento)

    Returns:
        dict: base [c, 2], locations [c, P, 2], weights [c, P]
    """
    q = prediction['index']
    count = max(1, len(prediction['transcription']))
    rows = slice(q * max_len, q * max_len + min(count, max_len))
    scale = np.array([width, height], dtype=np.float64)
    base = record['base'][rows] * scale
    locations = record['locations'][rows]
    weights = record['weights'][rows]
    c = locations.shape[0]
    return {
        'base': base.tolist(),
        'locations': (locations.reshape(c, -1, 2) * scale).tolist(),
        'weights': weights.reshape(c, -1).tolist(),
    }


def draw_overlay(raster, predictions):
    """
    Desenha as predições sobre a imagem

    Args:
        raster: uint8 [H, W, 3]
        predictions: list[dict] com polygon, char_centers, transcription e,
            opcionalmente, sampling

    Returns:
        ndarray uint8 [H, W, 3]
    """
    base = Image.fromarray(np.asarray(raster, dtype=np.uint8), mode='RGB').convert('RGBA')
    layer = Image.new('RGBA', base.size, (0, 0, 0, 0))
    draw = ImageDraw.Draw(layer)
    for pred in predictions:
        sampling = pred.get('sampling')
        if sampling:
            weights = np.asarray(sampling['weights'], dtype=np.float64)
            peak = weights.max() if weights.size and weights.max() > 0 else 1.0
            for slot, points in enumerate(sampling['locations']):
                for (x, y), w in zip(points, weights[slot]):
                    alpha = int(round(255 * w / peak))
                    draw.ellipse([x - SAMPLE_RADIUS, y - SAMPLE_RADIUS, x + SAMPLE_RADIUS,
                                  y + SAMPLE_RADIUS], fill=SAMPLE_COLOR + (alpha,))
        polygon = [tuple(p) for p in pred['polygon']]
        draw.line(polygon + polygon[:1], fill=POLYGON_COLOR, width=1)
        count = len(pred['transcription'])
        for x, y in pred['char_centers'][:count]:
            draw.ellipse([x - CENTER_RADIUS, y - CENTER_RADIUS, x + CENTER_RADIUS,
                          y + CENTER_RADIUS], outline=CENTER_COLOR)
        if polygon:
            draw.text(polygon[0], pred['transcription'], fill=POLYGON_COLOR)
    return np.asarray(Image.alpha_composite(base, layer).convert('RGB'), dtype=np.uint8).copy()
