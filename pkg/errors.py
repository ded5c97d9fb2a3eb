"""Exceções do simulador. Todas derivam de RisError (um ValueError)."""


class RisError(ValueError):
    """Erro base do simulador."""


class CellTableError(RisError):
    """Tabela da célula inválida (vazia, fora de ordem, fase fora de (-180, 180])."""

    def __init__(self, message, index=None):
        super().__init__(message if index is None else f"{message} (índice {index})")
        self.index = index


class VoltageOutOfRangeError(RisError):
    """Tensão fora da faixa tabelada; não há extrapolação."""


class GeometryError(RisError):
    """Geometria inválida (eixos não ortonormais, ponto atrás da RIS, etc.)."""


class SingularityError(RisError):
    """Distância nula entre um ponto e um centro de célula ou a fonte."""

    def __init__(self, message, indices=()):
        self.indices = tuple(indices)
        if self.indices:
            shown = ', '.join(str(i) for i in self.indices[:10])
            more = '' if len(self.indices) <= 10 else f" (+{len(self.indices) - 10})"
            message = f"{message}: {shown}{more}"
        super().__init__(message)


class CodebookError(RisError):
    """Chave duplicada, alvo atrás da RIS ou arquivo de codebook malformado."""

    def __init__(self, message, index=None):
        super().__init__(message if index is None else f"{message} (index_p {index})")
        self.index = index


class ConfigError(RisError):
    """Arquivo de configuração inválido; `key` aponta a chave com problema."""

    def __init__(self, message, key=None):
        super().__init__(message if key is None else f"{key}: {message}")
        self.key = key
