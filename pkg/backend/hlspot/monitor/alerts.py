"""
Sistema de Alertas - HLSpot
Registra falhas das verificações no log e, opcionalmente, num arquivo JSONL
"""

import json
import logging
import os
import time

logger = logging.getLogger(__name__)

ALERT_LOG = os.getenv("HLSPOT_ALERT_LOG")


def alert(title, detail, severity="warn"):
    """
    Emite um alerta

    Args:
        title: Título do alerta
        detail: Detalhes do problema
        severity: Nível de severidade (info, warn, crit)

    Returns:
        dict: O alerta emitido
    """
    emoji_map = {
        "info": "ℹ️",
        "warn": "⚠️",
        "crit": "🚨"
    }
    emoji = emoji_map.get(severity, "⚠️")
    message = f"{emoji} [{severity.upper()}] {title}\n{detail}"
    record = {'time': time.time(), 'severity': severity, 'title': title, 'detail': detail}

    if ALERT_LOG:
        try:
            with open(ALERT_LOG, 'a') as f:
                f.write(json.dumps(record) + "\n")
        except Exception as e:
            logger.error(f"❌ Erro ao gravar alerta em {ALERT_LOG}: {str(e)}")

    if severity == "info":
        logger.info(message)
    else:
        logger.warning(f"🚨 ALERTA: {message}")
    return record
