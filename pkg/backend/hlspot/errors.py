"""
Exceções do HLSpot
Hierarquia única para que o CLI traduza falhas em códigos de saída
"""


class HLSpotError(Exception):
    """Erro base do projeto"""


class ContractError(HLSpotError):
    """Pré-condição de uma operação violada"""


class ShapeError(ContractError):
    """Dimensões incompatíveis entre tensores"""

    def __init__(self, op, *shapes):
        self.op = op
        self.shapes = shapes
        joined = ' vs '.join(str(tuple(s)) for s in shapes)
        super().__init__(f"{op}: dimensões incompatíveis {joined}")


class PlacementSkipped(HLSpotError):
    """Rótulo não pôde ser posicionado (o chamador descarta o rótulo)"""


class CheckpointError(HLSpotError):
    """Checkpoint ilegível ou corrompido"""

    def __init__(self, path, reason):
        self.path = str(path)
        super().__init__(f"Checkpoint inválido em {path}: {reason}")


class DataError(HLSpotError):
    """Dataset ausente ou malformado"""


class TrainingError(HLSpotError):
    """Falha numérica durante o treino"""

    def __init__(self, term, iteration):
        self.term = term
        self.iteration = iteration
        super().__init__(f"Loss não finita no termo '{term}' (iteração {iteration})")


class ConfigError(HLSpotError):
    """Configuração inválida"""
