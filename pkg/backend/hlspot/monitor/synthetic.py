"""
Testes Sintéticos - HLSpot
Exercita o sistema ponta a ponta com entradas geradas: gradiente da perda
total do modelo mínimo e invariantes das cenas SynthMap+
"""

import logging
import time

import numpy as np

from hlspot.config import MatchWeights, ModelConfig, RunConfig
from hlspot.matching.costs import build_targets
from hlspot.matching.losses import compute_losses
from hlspot.model.spotter import Spotter
from hlspot.models import TextInstance
from hlspot.synthmap.features import load_rules
from hlspot.synthmap.glyphs import GlyphAtlas
from hlspot.synthmap.scene import check_scene_annotations, generate_scene, style_profiles_for
from hlspot.utils import tensor as T

from .alerts import alert
from .checks import FD_STEP, CheckResult, relative_error

logger = logging.getLogger(__name__)

MODEL_GRAD_TOL = 1e-3
MODEL_GRAD_FLOOR = 1e-5
MODEL_SEEDS = 100
ENTRIES_PER_PARAM = 1
# sementes iniciais varrem todas as entradas de todos os parâmetros
FULL_SWEEP_SEEDS = 2
GRADCHECK_SIZE = 16
SYNTH_SCENES = 50


def gradcheck_sample(rng, size=GRADCHECK_SIZE):
    """Imagem aleatória [3, size, size] com uma palavra "AB" anotada"""
    image = rng.uniform(0.0, 1.0, (3, size, size))
    s = size / 16.0
    polygon = np.array([[3, 5], [12, 5], [12, 10], [3, 10]], dtype=np.float64) * s
    centers = np.array([[5.5, 7.5], [9.5, 7.5]]) * s
    return image, [TextInstance(polygon, "AB", centers)]


def model_gradient_error(seed, config=None, weights=None, entries=ENTRIES_PER_PARAM):
    """
    Maior erro relativo entre autodiff e diferenças finitas da perda total

    Valores desligados do grafo (referências, top-k, pares do Hungarian) são
    gravados no primeiro passo e repetidos nos passos perturbados.
    entries=None confere todas as entradas de cada parâmetro.
    """
    config = (config or ModelConfig.gradcheck()).copy(update={'init_seed': seed})
    weights = weights or MatchWeights()
    rng = np.random.default_rng(seed)
    model = Spotter(config)
    image, instances = gradcheck_sample(rng)
    _, h, w = image.shape
    targets = build_targets(instances, w, h, model.vocabulary, config.max_text_len)

    tape = T.ConstantTape()
    with T.constant_tape(tape):
        total, _, _ = compute_losses(model.forward(image), targets, weights)
    total.backward()

    def loss():
        tape.replay()
        with T.constant_tape(tape), T.no_grad():
            return compute_losses(model.forward(image), targets, weights)[1]['total']

    worst = 0.0
    for name, p in model.named_parameters():
        autodiff = p.grad if p.grad is not None else np.zeros_like(p.data)
        if entries is None:
            flat = np.arange(p.data.size)
        else:
            flat = rng.choice(p.data.size, size=min(entries, p.data.size), replace=False)
        for index in flat:
            idx = np.unravel_index(index, p.data.shape)
            original = p.data[idx]
            p.data[idx] = original + FD_STEP
            up = loss()
            p.data[idx] = original - FD_STEP
            down = loss()
            p.data[idx] = original
            numeric = (up - down) / (2 * FD_STEP)
            error = relative_error(autodiff[idx], numeric, MODEL_GRAD_FLOOR)
            if error > worst:
                worst = error
                logger.debug(f"🔍 {name}{idx}: autodiff {autodiff[idx]:.6e} | "
                             f"numérico {numeric:.6e}")
    return worst


def synthetic_model_gradients(seeds=MODEL_SEEDS):
    """Verificação de gradiente ponta a ponta no modelo mínimo"""
    t0 = time.time()
    worst, failing = 0.0, []
    for seed in range(seeds):
        try:
            error = model_gradient_error(
                seed, entries=None if seed < FULL_SWEEP_SEEDS else ENTRIES_PER_PARAM)
        except Exception as e:
            logger.error(f"❌ Gradiente do modelo (seed {seed}) falhou: {str(e)}")
            failing.append(seed)
            continue
        worst = max(worst, error)
        if error >= MODEL_GRAD_TOL:
            failing.append(seed)
    result = CheckResult('gradient.model', not failing, seeds, worst, time.time() - t0,
                         {'failing_seeds': failing})
    if result.ok:
        logger.info(f"✅ gradient.model OK | {seeds} sementes | pior {worst:.2e} | "
                    f"{result.seconds:.1f}s")
    else:
        alert("Verificação gradient.model falhou",
              f"Sementes fora da tolerância {MODEL_GRAD_TOL:.0e}: {failing}", "crit")
    return result


def synthetic_scenes(scenes=SYNTH_SCENES, seed=0, run_config=None):
    """Gera cenas em memória e confere todos os invariantes de anotação"""
    t0 = time.time()
    run_config = run_config or RunConfig()
    synth = run_config.synthmap
    rules = load_rules(synth.rules_path)
    atlas = GlyphAtlas()
    profiles = style_profiles_for(synth, seed)
    violations, labels = [], 0
    for index in range(scenes):
        try:
            scene = generate_scene(run_config, profiles, rules, atlas, seed, index)
        except Exception as e:
            logger.error(f"❌ Cena {index} falhou: {str(e)}")
            violations.append(f"cena {index}: {str(e)}")
            continue
        labels += len(scene.annotations)
        violations.extend(f"cena {index}: {v}" for v in check_scene_annotations(scene))
    result = CheckResult('synthmap', not violations, scenes, len(violations), time.time() - t0,
                         {'labels': labels, 'violations': violations[:20]})
    if result.ok:
        logger.info(f"✅ synthmap OK | {scenes} cenas | {labels} rótulos | "
                    f"{result.seconds:.1f}s")
    else:
        alert("Verificação synthmap falhou",
              f"{len(violations)} violações; primeira: {violations[0]}", "crit")
    return result
