"""
Relatório de avaliação - HLSpot
Grava report.json e uma tabela em texto
"""

import json
import logging
import os

logger = logging.getLogger(__name__)


def _fmt(value):
    return "   -  " if value is None else f"{value:6.4f}"


def format_table(report):
    """Tabela P/R/F e recall por faixa"""
    data = report.to_dict()
    lines = [f"{'metric':<16} {'P':>6} {'R':>6} {'F':>6}", "-" * 37]
    for name in ('detection', 'e2e_none', 'e2e_full'):
        row = data[name]
        if row is None:
            lines.append(f"{name:<16} {'-':>6} {'-':>6} {'-':>6}")
            continue
        lines.append(f"{name:<16} {_fmt(row['precision'])} {_fmt(row['recall'])} {_fmt(row['f'])}")
    lines.append("")
    lines.append(f"{'slice':<16} {'recall':>6} {'n':>6}")
    lines.append("-" * 30)
    for name, row in data['slices'].items():
        lines.append(f"{name:<16} {_fmt(row['recall'])} {row['population']:>6d}")
    return "\n".join(lines)


def write_report(report, out_dir):
    """
    Grava o relatório

    Returns:
        tuple: (caminho do JSON, caminho do texto)
    """
    os.makedirs(out_dir, exist_ok=True)
    json_path = os.path.join(out_dir, 'report.json')
    text_path = os.path.join(out_dir, 'report.txt')
    with open(json_path, 'w') as f:
        json.dump(report.to_dict(), f, indent=2)
    with open(text_path, 'w') as f:
        f.write(format_table(report) + "\n")
    logger.info(f"✅ Relatório salvo em {json_path}")
    return json_path, text_path
