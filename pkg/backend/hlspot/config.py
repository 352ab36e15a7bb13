"""
Configuração - HLSpot
Seções tipadas (pydantic), presets e leitura de arquivo TOML/JSON
"""

import json
import logging
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from typing import List, Optional, Tuple

from pydantic import BaseModel, ValidationError, validator

from hlspot.errors import ConfigError

logger = logging.getLogger(__name__)

HLSPOT_THREADS = max(1, int(os.getenv("HLSPOT_THREADS", "1")))
HLSPOT_LOG_LEVEL = os.getenv("HLSPOT_LOG_LEVEL", "INFO")

UPPERCASE_CHARSET = "ABCDEFGHIJKLMNOPQRSTUVWXYZ "
PRINTABLE_CHARSET = "".join(chr(c) for c in range(32, 127))


class _Section(BaseModel):
    class Config:
        extra = "forbid"
        validate_assignment = True


class ModelConfig(_Section):
    d_model: int = 64
    n_heads: int = 4
    n_levels: int = 3
    n_points: int = 4
    n_enc_layers: int = 3
    n_dec_layers: int = 3
    num_proposals: int = 20
    num_boundary: int = 8
    max_text_len: int = 12
    charset: str = UPPERCASE_CHARSET
    vocab_size: int = 28
    d_ffn: int = 128
    backbone_width: int = 16
    score_threshold: float = 0.4
    # A_{j,k} literal (sem softmax) no preditor de centros
    raw_center_attention: bool = False
    # centros como deslocamento sobre a média ponderada do contorno
    center_anchor: bool = False
    hld_off: bool = False
    hlr_off: bool = False
    hlpe_off: bool = False
    init_seed: int = 0

    @validator("n_heads")
    def _heads_divide(cls, v, values):
        if v <= 0 or values.get("d_model", 0) % v:
            raise ValueError("d_model deve ser divisível por n_heads")
        return v

    @validator("num_boundary")
    def _even_boundary(cls, v):
        if v < 4 or v % 2:
            raise ValueError("num_boundary deve ser par e >= 4")
        return v

    @validator("vocab_size")
    def _vocab_matches(cls, v, values):
        charset = values.get("charset")
        if charset is not None and v != len(charset) + 1:
            raise ValueError(f"vocab_size deve ser len(charset)+1 = {len(charset) + 1}")
        return v

    @validator("n_levels", "n_points", "n_enc_layers", "n_dec_layers", "num_proposals",
               "max_text_len", "d_model", "d_ffn", "backbone_width")
    def _positive(cls, v):
        if v <= 0:
            raise ValueError("deve ser positivo")
        return v

    @property
    def empty_class(self):
        return self.vocab_size - 1

    @classmethod
    def gradcheck(cls):
        """Configuração mínima usada pelas verificações de gradiente"""
        return cls(d_model=8, n_heads=1, n_levels=1, n_points=2, n_enc_layers=1,
                   n_dec_layers=1, num_proposals=2, num_boundary=4, max_text_len=3,
                   charset="ABC ", vocab_size=5, d_ffn=8, backbone_width=2)


class MatchWeights(_Section):
    cost_cls: float = 2.0
    cost_coord: float = 5.0
    cost_center: float = 1.0
    loss_cls: float = 2.0
    loss_coord: float = 5.0
    loss_ct: float = 1.0
    loss_char: float = 1.0
    loss_giou: float = 2.0
    focal_alpha: float = 0.25
    focal_gamma: float = 2.0

    @validator("*")
    def _non_negative(cls, v):
        if v < 0:
            raise ValueError("pesos devem ser não negativos")
        return v


class TrainConfig(_Section):
    base_lr: float = 1e-3
    decay_factor: float = 0.1
    decay_step: int = 1500
    iterations: int = 2000
    batch_size: int = 2
    seed: int = 0
    snapshot_interval: int = 500
    log_interval: int = 10
    augment: bool = True
    scale_range: Tuple[float, float] = (0.75, 1.25)
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    finetune_lr: float = 1e-5
    finetune_iterations: int = 200
    max_rounds: int = 5
    stability_tol: float = 0.01

    @validator("base_lr", "finetune_lr")
    def _positive_rate(cls, v):
        if v <= 0:
            raise ValueError("taxa de aprendizado deve ser positiva")
        return v

    @validator("decay_factor")
    def _decay_range(cls, v):
        if not 0 < v <= 1:
            raise ValueError("decay_factor deve estar em (0, 1]")
        return v

    @validator("iterations", "decay_step", "batch_size", "snapshot_interval", "log_interval",
               "max_rounds")
    def _positive_int(cls, v):
        if v <= 0:
            raise ValueError("deve ser positivo")
        return v


class SynthMapConfig(_Section):
    canvas_width: int = 256
    canvas_height: int = 256
    num_features: int = 5
    max_labels: int = 6
    min_word_len: int = 3
    max_word_len: int = 10
    k_styles: int = 3
    style_samples: int = 3
    font_size_range: Tuple[float, float] = (12.0, 18.0)
    letter_spacing_range: Tuple[float, float] = (0.0, 3.0)
    word_spacing_range: Tuple[float, float] = (4.0, 10.0)
    stroke_width_range: Tuple[int, int] = (1, 2)
    slant_range: Tuple[float, float] = (-0.2, 0.2)
    max_label_iou: float = 0.1
    numeric_labels: bool = True
    background_dir: Optional[str] = None
    features_path: Optional[str] = None
    rules_path: Optional[str] = None

    @validator("canvas_width", "canvas_height")
    def _multiple_of_cell(cls, v):
        if v <= 0 or v % 8:
            raise ValueError("dimensões do canvas devem ser múltiplas de 8")
        return v


class EvalConfig(_Section):
    iou_threshold: float = 0.5
    lexicon_path: Optional[str] = None
    length_slices: List[int] = [7, 10]
    angle_slices: List[Tuple[float, float]] = [(30.0, 60.0), (60.0, 90.0)]


class RunConfig(_Section):
    model: ModelConfig = ModelConfig()
    train: TrainConfig = TrainConfig()
    synthmap: SynthMapConfig = SynthMapConfig()
    eval: EvalConfig = EvalConfig()
    match: MatchWeights = MatchWeights()


PRESETS = {
    "desk": {},
    "micro": {
        "model": {"d_model": 32, "n_heads": 2, "n_levels": 2, "n_points": 4, "n_enc_layers": 1,
                  "n_dec_layers": 2, "num_proposals": 10, "num_boundary": 8, "max_text_len": 8,
                  "d_ffn": 64, "backbone_width": 8},
        "train": {"iterations": 2000, "decay_step": 1500, "batch_size": 1, "augment": False,
                  "snapshot_interval": 1000, "finetune_iterations": 100},
        "synthmap": {"canvas_width": 128, "canvas_height": 128, "num_features": 3,
                     "max_labels": 3, "max_word_len": 6, "k_styles": 2, "numeric_labels": False,
                     "font_size_range": (14.0, 18.0)},
    },
    "full": {
        "model": {"d_model": 256, "n_heads": 8, "n_levels": 4, "n_points": 4, "n_enc_layers": 6,
                  "n_dec_layers": 6, "num_proposals": 100, "num_boundary": 16,
                  "max_text_len": 25, "charset": PRINTABLE_CHARSET, "vocab_size": 96,
                  "d_ffn": 1024, "backbone_width": 64},
        "train": {"base_lr": 1e-4, "decay_factor": 0.1, "decay_step": 300000,
                  "iterations": 400000, "batch_size": 4, "snapshot_interval": 10000,
                  "finetune_lr": 1e-5, "finetune_iterations": 10000},
        "synthmap": {"canvas_width": 1000, "canvas_height": 1000, "max_word_len": 25,
                     "max_labels": 40, "num_features": 30},
    },
}

# nomes alternativos aceitos em --preset
PRESET_ALIASES = {"paper": "full"}


def _deep_merge(base, update):
    merged = dict(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _read_file(path):
    try:
        if str(path).endswith(".toml"):
            with open(path, "rb") as f:
                return tomllib.load(f)
        with open(path, "r") as f:
            return json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"Arquivo de configuração não encontrado: {path}")
    except (ValueError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(f"Arquivo de configuração inválido {path}: {str(e)}")


def build_config(preset="desk", path=None, overrides=None):
    """
    Resolve a configuração: preset → arquivo → flags

    Args:
        preset: Nome do preset (desk, micro, full; "paper" é sinônimo de full)
        path: Arquivo TOML ou JSON opcional
        overrides: Dict aninhado com valores vindos do CLI

    Returns:
        RunConfig: Configuração validada
    """
    preset = PRESET_ALIASES.get(preset, preset)
    if preset not in PRESETS:
        raise ConfigError(f"Preset desconhecido: {preset}")
    data = _deep_merge({}, PRESETS[preset])
    if path:
        data = _deep_merge(data, _read_file(path))
    if overrides:
        data = _deep_merge(data, overrides)
    try:
        return RunConfig.parse_obj(data)
    except ValidationError as e:
        raise ConfigError(f"Configuração inválida: {str(e)}")


def save_resolved(config, out_dir):
    """Grava a configuração resolvida no diretório de saída (proveniência)"""
    os.makedirs(out_dir, exist_ok=True)
    target = os.path.join(out_dir, "resolved_config.json")
    with open(target, "w") as f:
        json.dump(json.loads(config.json()), f, indent=2, sort_keys=True)
    logger.debug(f"✅ Configuração resolvida salva em {target}")
    return target
