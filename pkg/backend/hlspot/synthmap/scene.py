"""
Composição de cenas - HLSpot
Fundo em células + feições pintadas por regras cartográficas + rótulos anotados
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from PIL import Image, ImageDraw

from hlspot.config import HLSPOT_THREADS, SynthMapConfig
from hlspot.errors import PlacementSkipped
from hlspot.models import MapScene
from hlspot.synthmap.background import (bundled_samples, build_style_profiles, load_sample_dir,
                                        tile_background)
from hlspot.synthmap.features import load_features, load_rules, random_features
from hlspot.synthmap.glyphs import GlyphAtlas
from hlspot.synthmap.placement import (LabelStyle, place_label_on_polygon,
                                       place_words_on_line)
from hlspot.utils.dataset import is_all_numeric, scene_names, write_annotations, write_manifest
from hlspot.utils.geometry import is_simple, point_in_polygon, polygon_iou
from hlspot.utils.hash_utils import hash_directory
from hlspot.utils.image_io import write_png

logger = logging.getLogger(__name__)


def _random_style(rng, config, color):
    lo, hi = config.stroke_width_range
    return LabelStyle(font_size=rng.uniform(*config.font_size_range),
                      letter_spacing=rng.uniform(*config.letter_spacing_range),
                      word_spacing=rng.uniform(*config.word_spacing_range),
                      stroke_width=int(rng.integers(lo, hi + 1)),
                      slant=rng.uniform(*config.slant_range),
                      color=color)


def _label_words(name, config, atlas, max_len, charset):
    words = []
    for word in name.split():
        if not config.min_word_len <= len(word) <= min(config.max_word_len, max_len):
            continue
        if not atlas.supports(word):
            continue
        if charset is not None and not is_all_numeric(word) and any(c not in charset for c in word):
            continue
        words.append(word)
    return words


def _place_feature(feature, words, style, atlas, num_boundary, bounds):
    place = place_words_on_line if feature.kind == 'line' else place_label_on_polygon
    try:
        return place(feature.vertices, ' '.join(words), style, atlas, num_boundary, bounds=bounds)
    except PlacementSkipped as first:
        if len(words) < 2:
            raise first
        longest = max(words, key=len)
        return place(feature.vertices, longest, style, atlas, num_boundary, bounds=bounds)


def _paint_features(draw, features, rules):
    for feature in features:
        rule = rules['classes'].get(feature.feature_class)
        if rule is None:
            logger.warning(f"⚠️ Classe sem regra cartográfica: {feature.feature_class}")
            continue
        pts = [tuple(p) for p in feature.vertices]
        if feature.kind == 'line':
            if rule.get('casing'):
                draw.line(pts, fill=tuple(rule['casing']), width=rule['width'] + 2, joint='curve')
            draw.line(pts, fill=tuple(rule['color']), width=rule['width'], joint='curve')
        else:
            draw.polygon(pts, fill=tuple(rule['fill']), outline=tuple(rule['outline']))


def compose_scene(features, style, rng_seed, width, height, config=None, num_boundary=8,
                  max_len=12, rules=None, atlas=None, charset=None):
    """
    Gera uma cena sintética de mapa

    Args:
        features: Lista de GeoFeature
        style: StyleProfile do fundo
        rng_seed: Semente (a cena é determinística dado o seed)
        width, height: Canvas em pixels
        config: SynthMapConfig (faixas de fonte/espaçamento, colisão)
        num_boundary: N pontos por polígono
        max_len: M; palavras mais longas são descartadas
        charset: Caracteres reconhecíveis (palavras só com dígitos passam e viram DON'T CARE)

    Returns:
        MapScene
    """
    config = config or SynthMapConfig()
    rules = rules or load_rules(config.rules_path)
    atlas = atlas or GlyphAtlas()
    rng = np.random.default_rng(rng_seed)

    raster = tile_background(style, width, height, rng)
    placed = []
    for feature in features:
        if len(placed) >= config.max_labels:
            break
        rule = rules['classes'].get(feature.feature_class, {})
        label_style = _random_style(rng, config, rule.get('label_color', (30, 30, 30)))
        words = _label_words(feature.name, config, atlas, max_len, charset)
        if not words:
            continue
        try:
            labels = _place_feature(feature, words, label_style, atlas, num_boundary,
                                    (width, height))
        except PlacementSkipped as e:
            logger.debug(f"Rótulo descartado ({feature.name}): {str(e)}")
            continue
        for label in labels:
            if len(placed) >= config.max_labels:
                break
            overlap = max((polygon_iou(label.instance.polygon, other.instance.polygon)
                           for other in placed), default=0.0)
            if overlap > config.max_label_iou:
                logger.debug(f"Rótulo '{label.instance.transcription}' colide (IoU {overlap:.2f})")
                continue
            placed.append(label)

    canvas = Image.fromarray(raster, mode='RGB')
    draw = ImageDraw.Draw(canvas)
    _paint_features(draw, features, rules)
    for label in placed:
        for glyph in label.glyphs:
            atlas.draw(draw, glyph, label.style.font_size, label.style.stroke_width,
                       label.style.slant, label.style.color)

    annotations = [label.instance for label in placed]
    for inst in annotations:
        if is_all_numeric(inst.transcription):
            inst.dont_care = True
    return MapScene(width, height, features, style, np.asarray(canvas, dtype=np.uint8).copy(),
                    annotations, glyphs=[label.glyphs for label in placed])


def check_scene_annotations(scene):
    """
    Verifica os invariantes de uma MapScene

    Returns:
        list[str]: Violações encontradas (vazia quando a cena é válida)
    """
    violations = []
    for k, inst in enumerate(scene.annotations):
        pts = inst.polygon.points
        if pts.min() < 0 or np.any(pts[:, 0] > scene.width) or np.any(pts[:, 1] > scene.height):
            violations.append(f"instância {k}: polígono fora da cena")
        if not is_simple(pts):
            violations.append(f"instância {k}: polígono não simples")
        centers = inst.char_centers if inst.char_centers is not None else np.zeros((0, 2))
        if len(centers) != len(inst.transcription):
            violations.append(f"instância {k}: {len(centers)} centros para "
                              f"'{inst.transcription}'")
        for c in centers:
            if not point_in_polygon(c, pts):
                violations.append(f"instância {k}: centro {tuple(c)} fora do polígono")
        if scene.glyphs and len(scene.glyphs[k]) != len(inst.transcription):
            violations.append(f"instância {k}: {len(scene.glyphs[k])} glifos para "
                              f"'{inst.transcription}'")
    return violations


def style_profiles_for(config, seed):
    """Perfis a partir do diretório configurado ou das texturas procedurais"""
    if config.background_dir:
        samples = load_sample_dir(config.background_dir)
    else:
        samples = bundled_samples(seed, count=max(config.k_styles, 2) * config.style_samples)
    return build_style_profiles(samples, config.k_styles, seed)


def _scene_seed(seed, index):
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def generate_scene(run_config, profiles, rules, atlas, seed, index, features=None):
    """Cena `index`; sem `features` as feições são procedurais"""
    synth = run_config.synthmap
    scene_seed = _scene_seed(seed, index)
    rng = np.random.default_rng(scene_seed)
    if features is None:
        features = random_features(rng, synth.canvas_width, synth.canvas_height,
                                   synth.num_features, rules, numeric_labels=synth.numeric_labels)
    style = profiles[int(rng.integers(len(profiles)))]
    return compose_scene(features, style, scene_seed, synth.canvas_width, synth.canvas_height,
                         config=synth, num_boundary=run_config.model.num_boundary,
                         max_len=run_config.model.max_text_len, rules=rules, atlas=atlas,
                         charset=run_config.model.charset)


def generate_dataset(run_config, out_dir, seed, scenes, threads=None):
    """
    Gera `scenes` cenas em out_dir com manifesto (seed + sha256 dos arquivos)

    Returns:
        tuple: (ids gerados, lista de falhas)
    """
    os.makedirs(out_dir, exist_ok=True)
    synth = run_config.synthmap
    rules = load_rules(synth.rules_path)
    atlas = GlyphAtlas()
    profiles = style_profiles_for(synth, seed)
    features = load_features(synth.features_path) if synth.features_path else None
    ids = [f"{i:05d}" for i in range(scenes)]

    def work(index):
        scene = generate_scene(run_config, profiles, rules, atlas, seed, index, features)
        png, ann = scene_names(ids[index])
        write_png(os.path.join(out_dir, png), scene.raster)
        write_annotations(os.path.join(out_dir, ann), scene.annotations,
                          run_config.model.max_text_len)
        return check_scene_annotations(scene)

    written, failures = [], []
    with ThreadPoolExecutor(max_workers=threads or HLSPOT_THREADS) as pool:
        futures = [pool.submit(work, i) for i in range(scenes)]
        for index, future in enumerate(futures):
            try:
                violations = future.result()
                if violations:
                    failures.extend(f"scene_{ids[index]}: {v}" for v in violations)
                written.append(ids[index])
            except Exception as e:
                logger.error(f"❌ Erro ao gerar cena {ids[index]}: {str(e)}")
                failures.append(f"scene_{ids[index]}: {str(e)}")

    names = [n for i in written for n in scene_names(i)]
    write_manifest(out_dir, seed, written, hash_directory(out_dir, names))
    logger.info(f"✅ {len(written)} cenas geradas em {out_dir}")
    return written, failures
