"""
HLSpot - CLI
Gera dados SynthMap+, treina, faz ajuste fino iterativo, infere, avalia e
executa as suítes de verificação

Uso: python app.py <generate|train|finetune|infer|eval|verify> [opções]
"""

import argparse
import json
import logging
import os
import sys

from dotenv import load_dotenv

# Carregar variáveis de ambiente do .env
load_dotenv()

from hlspot.config import HLSPOT_LOG_LEVEL, HLSPOT_THREADS, build_config, save_resolved  # noqa: E402
from hlspot.errors import (CheckpointError, ConfigError, ContractError, DataError,  # noqa: E402
                           TrainingError)

logging.basicConfig(
    level=getattr(logging, HLSPOT_LOG_LEVEL.upper(), logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_FAILURE = 3


class _Parser(argparse.ArgumentParser):
    """Erros de uso saem com código 1"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: erro: {message}\n")


def _resolve(args):
    overrides = {}
    if args.seed is not None:
        overrides['train'] = {'seed': args.seed}
    if getattr(args, 'features', None):
        overrides['synthmap'] = {'features_path': args.features}
    config = build_config(args.preset, args.config, overrides)
    save_resolved(config, args.out)
    return config


def _seed(args, config):
    return args.seed if args.seed is not None else config.train.seed


def _banner(title):
    logger.info("=" * 60)
    logger.info(f"🚀 {title}")
    logger.info("=" * 60)


def cmd_generate(args):
    from hlspot.synthmap.scene import generate_dataset

    config = _resolve(args)
    seed = _seed(args, config)
    _banner(f"generate: {args.scenes} cenas, seed {seed}")
    # --threads nunca passa do teto de HLSPOT_THREADS
    threads = min(args.threads, HLSPOT_THREADS) if args.threads else None
    written, failures = generate_dataset(config, args.out, seed, args.scenes, threads=threads)
    for failure in failures:
        logger.error(f"❌ {failure}")
    if failures:
        logger.error(f"❌ {len(failures)} violações de anotação")
        return EXIT_FAILURE
    logger.info(f"✅ {len(written)} cenas em {args.out}")
    return EXIT_OK


def cmd_train(args):
    from hlspot.training.trainer import train
    from hlspot.utils.dataset import load_dataset

    config = _resolve(args)
    samples = load_dataset(args.data)
    _banner(f"train: {len(samples)} cenas de {args.data}")
    result = train(samples, config.model, config.train, config.match, args.out)
    logger.info(f"✅ Treino concluído | loss final {result.final_loss:.4f}")
    return EXIT_OK


def cmd_finetune(args):
    from hlspot.model.spotter import Spotter
    from hlspot.training.iterative import iterative_finetune
    from hlspot.utils.dataset import load_dataset

    config = _resolve(args)
    samples = load_dataset(args.data, withhold_centers=args.withhold_centers)
    model = Spotter.from_checkpoint(args.checkpoint)
    _banner(f"finetune: {len(samples)} cenas, até {config.train.max_rounds} rodadas")
    _, record, _ = iterative_finetune(model, samples, config.train, config.match, args.out)
    logger.info(f"✅ Ajuste fino concluído | histórico de aceitos {record.history}")
    return EXIT_OK


def _image_paths(images):
    paths = []
    for item in images:
        if os.path.isdir(item):
            paths.extend(os.path.join(item, name) for name in sorted(os.listdir(item))
                         if name.lower().endswith('.png'))
        elif os.path.exists(item):
            paths.append(item)
        else:
            raise DataError(f"Imagem não encontrada: {item}")
    return paths


def scene_id_for(path):
    stem = os.path.splitext(os.path.basename(path))[0]
    return stem[len('scene_'):] if stem.startswith('scene_') else stem


def cmd_infer(args):
    from hlspot.model.spotter import Spotter, new_trace
    from hlspot.utils.image_io import read_png, write_png
    from hlspot.utils.overlay import draw_overlay, sampling_for_prediction

    _resolve(args)
    model = Spotter.from_checkpoint(args.checkpoint)
    paths = _image_paths(args.images)
    threshold = args.threshold if args.threshold is not None else model.config.score_threshold
    _banner(f"infer: {len(paths)} imagens | limiar {threshold}")

    errors = 0
    target = os.path.join(args.out, 'predictions.jsonl')
    with open(target, 'w') as f:
        for path in paths:
            try:
                raster = read_png(path)
                trace = new_trace() if args.debug_sampling else None
                predictions = model.spot(raster, threshold=threshold, trace=trace)
                if trace is not None:
                    _, h, w = model.prepare(raster).shape
                    record = trace.last('char')
                    for pred in predictions:
                        pred['sampling'] = sampling_for_prediction(
                            record, pred, model.config.max_text_len, w, h)
                f.write(json.dumps({'scene_id': scene_id_for(path), 'image': path,
                                    'predictions': predictions}) + "\n")
                if args.overlay:
                    name = os.path.splitext(os.path.basename(path))[0] + '.overlay.png'
                    write_png(os.path.join(args.out, name), draw_overlay(raster, predictions))
                logger.info(f"✅ {path}: {len(predictions)} palavras")
            except Exception as e:
                errors += 1
                logger.error(f"❌ Erro ao processar {path}: {str(e)}")
    logger.info(f"📊 Predições em {target}")
    return EXIT_DATA if errors else EXIT_OK


def read_predictions(path):
    """predictions.jsonl → {scene_id: list[dict]}"""
    if not os.path.exists(path):
        raise DataError(f"Arquivo de predições não encontrado: {path}")
    by_scene = {}
    with open(path, 'r') as f:
        for number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                by_scene[str(row['scene_id'])] = row['predictions']
            except (ValueError, KeyError) as e:
                raise DataError(f"{path}:{number}: linha inválida ({str(e)})")
    return by_scene


def read_lexicon(path):
    if not os.path.exists(path):
        raise DataError(f"Léxico não encontrado: {path}")
    with open(path, 'r') as f:
        return [line.strip().upper() for line in f if line.strip()]


def cmd_eval(args):
    from hlspot.eval.protocol import evaluate
    from hlspot.eval.report import format_table, write_report
    from hlspot.utils.dataset import load_dataset

    config = _resolve(args)
    samples = load_dataset(args.gt)
    predictions = read_predictions(args.preds)
    lexicon_path = args.lexicon or config.eval.lexicon_path
    lexicon = read_lexicon(lexicon_path) if lexicon_path else None
    missing = [s.scene_id for s in samples if s.scene_id not in predictions]
    if missing:
        logger.warning(f"⚠️ {len(missing)} cenas sem predições (contam como vazias)")
    _banner(f"eval: {len(samples)} cenas")
    report = evaluate([predictions.get(s.scene_id, []) for s in samples],
                      [s.instances for s in samples], config.eval, lexicon)
    write_report(report, args.out)
    print(format_table(report))
    return EXIT_OK


def cmd_verify(args):
    from hlspot.monitor.runner import run_verification

    _resolve(args)
    _banner("verify")
    ok = run_verification(args.suite, args.out)
    return EXIT_OK if ok else EXIT_FAILURE


def build_parser():
    from hlspot.monitor.runner import SUITES

    common = _Parser(add_help=False)
    common.add_argument('--config', help='Arquivo TOML ou JSON')
    common.add_argument('--preset', choices=['desk', 'micro', 'full', 'paper'], default='desk')
    common.add_argument('--seed', type=int)
    common.add_argument('--out', required=True, help='Diretório de saída')

    parser = _Parser(prog='hlspot', description='Text spotting hiper-local em mapas históricos')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('generate', parents=[common], help='Gera cenas SynthMap+')
    p.add_argument('--scenes', type=int, default=10)
    p.add_argument('--threads', type=int)
    p.add_argument('--features', help='GeoJSON com LineString/Polygon (name, class)')
    p.set_defaults(handler=cmd_generate)

    p = sub.add_parser('train', parents=[common], help='Treina o spotter')
    p.add_argument('--data', required=True)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser('finetune', parents=[common], help='Ajuste fino iterativo de centros')
    p.add_argument('--data', required=True)
    p.add_argument('--checkpoint', required=True)
    p.add_argument('--withhold-centers', action='store_true',
                   help='Ignora os centros anotados do dataset')
    p.set_defaults(handler=cmd_finetune)

    p = sub.add_parser('infer', parents=[common], help='Detecta e transcreve')
    p.add_argument('--checkpoint', required=True)
    p.add_argument('--images', nargs='*', default=[])
    p.add_argument('--threshold', type=float)
    p.add_argument('--overlay', action='store_true')
    p.add_argument('--debug-sampling', action='store_true')
    p.set_defaults(handler=cmd_infer)

    p = sub.add_parser('eval', parents=[common], help='Avalia predições')
    p.add_argument('--gt', required=True)
    p.add_argument('--preds', required=True)
    p.add_argument('--lexicon')
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser('verify', parents=[common], help='Suítes de verificação')
    p.add_argument('--suite', action='append', choices=list(SUITES))
    p.set_defaults(handler=cmd_verify)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as e:
        logger.error(f"❌ {str(e)}")
        return EXIT_USAGE
    except (DataError, CheckpointError) as e:
        logger.error(f"❌ {str(e)}")
        return EXIT_DATA
    except TrainingError as e:
        logger.error(f"❌ Treino abortado: {str(e)}")
        return EXIT_FAILURE
    except ContractError as e:
        logger.error(f"❌ {str(e)}")
        return EXIT_USAGE
    except OSError as e:
        logger.error(f"❌ Erro de E/S: {str(e)}")
        return EXIT_DATA


if __name__ == '__main__':
    sys.exit(main())
