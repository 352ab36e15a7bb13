"""
Dataset em disco - HLSpot
scene_{id}.png + scene_{id}.json (uma instância JSON por linha) + manifest.json
"""

import json
import logging
import os

from hlspot.errors import DataError
from hlspot.models import TextInstance
from hlspot.utils.geometry import char_center_targets
from hlspot.utils.image_io import read_png

logger = logging.getLogger(__name__)

MANIFEST_NAME = 'manifest.json'


class Sample:
    def __init__(self, scene_id, raster, instances, image_path=None):
        self.scene_id = scene_id
        self.raster = raster
        self.instances = instances
        self.image_path = image_path

    @property
    def height(self):
        return self.raster.shape[0]

    @property
    def width(self):
        return self.raster.shape[1]


def is_all_numeric(text):
    stripped = ''.join(c for c in text if not c.isspace())
    return bool(stripped) and stripped.isdigit()


def annotation_lines(instances, max_len):
    """Serializa instâncias; char_centers ocupa M slots com a cauda nos vazios"""
    lines = []
    for inst in instances:
        record = inst.to_dict()
        if inst.centers_available and len(inst.transcription) <= max_len:
            record['char_centers'] = [[float(x), float(y)]
                                      for x, y in char_center_targets(inst, max_len)]
        lines.append(json.dumps(record, sort_keys=True))
    return lines


def write_annotations(path, instances, max_len):
    with open(path, 'w') as f:
        for line in annotation_lines(instances, max_len):
            f.write(line + '\n')


def read_annotations(path):
    """
    Lê um arquivo de anotações

    Transcrições só com dígitos viram DON'T CARE; os centros são cortados
    para os c slots reais.
    """
    instances = []
    try:
        with open(path, 'r') as f:
            for number, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                    inst = TextInstance.from_dict(record)
                except (ValueError, KeyError, TypeError) as e:
                    raise DataError(f"Anotação inválida em {path}:{number}: {str(e)}")
                if inst.char_centers is not None:
                    inst.char_centers = inst.char_centers[:len(inst.transcription)]
                if is_all_numeric(inst.transcription):
                    inst.dont_care = True
                instances.append(inst)
    except FileNotFoundError:
        raise DataError(f"Arquivo de anotações não encontrado: {path}")
    return instances


def scene_names(scene_id):
    return f"scene_{scene_id}.png", f"scene_{scene_id}.json"


def list_scene_ids(directory):
    if not os.path.isdir(directory):
        raise DataError(f"Diretório do dataset não encontrado: {directory}")
    manifest_path = os.path.join(directory, MANIFEST_NAME)
    if os.path.exists(manifest_path):
        with open(manifest_path, 'r') as f:
            return list(json.load(f).get('scenes', []))
    ids = sorted(name[len('scene_'):-len('.png')] for name in os.listdir(directory)
                 if name.startswith('scene_') and name.endswith('.png'))
    return ids


def load_dataset(directory, withhold_centers=False):
    """
    Carrega todas as cenas de um diretório

    Args:
        directory: Diretório gerado por `generate`
        withhold_centers: Remove os centros (treino iterativo sem anotação de centros)

    Returns:
        list[Sample]
    """
    samples = []
    for scene_id in list_scene_ids(directory):
        png, ann = scene_names(scene_id)
        raster = read_png(os.path.join(directory, png))
        instances = read_annotations(os.path.join(directory, ann))
        if withhold_centers:
            for inst in instances:
                inst.char_centers = None
                inst.centers_available = False
                inst.center_source = None
        samples.append(Sample(scene_id, raster, instances, os.path.join(directory, png)))
    if not samples:
        raise DataError(f"Dataset vazio: {directory}")
    logger.info(f"📊 Dataset carregado: {len(samples)} cenas de {directory}")
    return samples


def write_manifest(directory, seed, scene_ids, hashes, extra=None):
    manifest = {'seed': seed, 'scene_count': len(scene_ids), 'scenes': list(scene_ids),
                'sha256': hashes}
    if extra:
        manifest.update(extra)
    path = os.path.join(directory, MANIFEST_NAME)
    with open(path, 'w') as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    return path
