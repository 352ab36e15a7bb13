"""
Runner das Verificações - HLSpot
Executa as suítes selecionadas e imprime o relatório final
"""

import json
import logging
import os

from .checks import CheckResult, check_deform_attn, check_hungarian, check_op_gradients, \
    check_polygon_iou
from .synthetic import synthetic_model_gradients, synthetic_scenes

logger = logging.getLogger(__name__)

SUITES = {
    'gradient': (check_op_gradients, synthetic_model_gradients),
    'deform_attn': (check_deform_attn,),
    'hungarian': (check_hungarian,),
    'iou': (check_polygon_iou,),
    'synthmap': (synthetic_scenes,),
}


def run_suite(name):
    """Executa uma suíte; exceções viram resultado com falha"""
    logger.info(f"🔍 Suíte {name}...")
    results = []
    for check in SUITES[name]:
        try:
            results.append(check())
        except Exception as e:
            logger.error(f"❌ Erro em {name}/{check.__name__}: {str(e)}")
            results.append(CheckResult(f"{name}.{check.__name__}", False, 0,
                                       details={'error': str(e)}))
    ok = all(r.ok for r in results)
    logger.info(f"{'✅' if ok else '❌'} {name}")
    return ok, results


def print_report(summary):
    logger.info("=" * 60)
    logger.info("📊 RELATÓRIO DE VERIFICAÇÃO")
    logger.info("=" * 60)
    for name, (ok, results) in summary.items():
        logger.info(f"{'✅' if ok else '❌'} {name}")
        for r in results:
            logger.info(f"    {r.name}: {r.cases} casos | pior {r.worst:.2e} | {r.seconds:.1f}s")
    passed = sum(1 for ok, _ in summary.values() if ok)
    logger.info(f"{passed}/{len(summary)} suítes aprovadas")
    logger.info("=" * 60)


def run_verification(suites=None, out_dir=None):
    """
    Executa as suítes (todas por padrão)

    Args:
        suites: Nomes das suítes
        out_dir: Diretório para verify_report.json

    Returns:
        bool: True quando todas passaram
    """
    names = suites or list(SUITES)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise KeyError(f"Suítes desconhecidas: {unknown}")
    summary = {name: run_suite(name) for name in names}
    print_report(summary)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, 'verify_report.json'), 'w') as f:
            json.dump({name: {'ok': ok, 'checks': [r.to_dict() for r in results]}
                       for name, (ok, results) in summary.items()}, f, indent=2)
    return all(ok for ok, _ in summary.values())
