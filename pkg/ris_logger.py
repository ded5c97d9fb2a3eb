"""
RIS AmBC Simulator - Sistema de Logging Centralizado
=====================================================
Logging padronizado para todos os módulos do simulador, sobre o logger "RIS" da stdlib.

Formato de log:
[YYYY-MM-DD HH:MM:SS.mmm] [LEVEL] [MODULE] [EVENT] message | k=v

Níveis:
- INFO: Eventos normais
- DEBUG: Detalhes de cada lote, entrada e arquivo
- WARN: Avisos que não impedem execução (ex.: célula fora do domínio angular)
- ERROR: Falhas de uma entrada ou de um comando
- SUCCESS: Operações concluídas

Eventos:
- START / END / PROGRESS: ciclo de vida de operações longas
- DATA: leitura/escrita de arquivos
- DOMAIN: verificação do domínio angular
- BATCH: processamento paralelo
"""

import os
import sys
import time
import logging
from functools import wraps

SUCCESS = 25
logging.addLevelName(SUCCESS, 'SUCCESS')

LEVELS = {
    'DEBUG': logging.DEBUG,
    'INFO': logging.INFO,
    'SUCCESS': SUCCESS,
    'WARN': logging.WARNING,
    'WARNING': logging.WARNING,
    'ERROR': logging.ERROR,
}

# Nome exibido na linha; WARNING aparece como WARN
LEVEL_LABELS = {
    logging.DEBUG: 'DEBUG',
    logging.INFO: 'INFO',
    SUCCESS: 'SUCCESS',
    logging.WARNING: 'WARN',
    logging.ERROR: 'ERROR',
}

COLORS = {
    'INFO': '\033[94m',
    'DEBUG': '\033[90m',
    'WARN': '\033[93m',
    'ERROR': '\033[91m',
    'SUCCESS': '\033[92m',
}
RESET = '\033[0m'


class RisFormatter(logging.Formatter):
    """Monta a linha padrão a partir dos campos ris_module, ris_event e ris_fields do record."""

    def __init__(self, use_colors=False):
        super().__init__()
        self.use_colors = use_colors

    def formatTime(self, record, datefmt=None):
        stamp = time.strftime('%Y-%m-%d %H:%M:%S', time.localtime(record.created))
        return f"{stamp}.{int(record.msecs):03d}"

    def format(self, record):
        label = LEVEL_LABELS.get(record.levelno, record.levelname)
        module = getattr(record, 'ris_module', 'SYSTEM')
        event = getattr(record, 'ris_event', '-')
        line = (f"[{self.formatTime(record)}] [{label:7}] [{module:11}] [{event:8}] "
                f"{record.getMessage()}")
        fields = getattr(record, 'ris_fields', None)
        if fields:
            line += ' | ' + ' | '.join(f"{k}={v}" for k, v in fields.items())
        if self.use_colors and label in COLORS:
            return f"{COLORS[label]}{line}{RESET}"
        return line


# Saída em stderr; stdout fica para os resumos da CLI
logger = logging.getLogger('RIS')
logger.propagate = False
if not logger.handlers:
    _handler = logging.StreamHandler(sys.stderr)
    _handler.setFormatter(RisFormatter(use_colors=sys.stderr.isatty()))
    logger.addHandler(_handler)
logger.setLevel(LEVELS.get(os.environ.get('RIS_LOG_LEVEL', 'INFO').upper(), logging.INFO))


def _emit(levelno, module, event, message, fields):
    if logger.isEnabledFor(levelno):
        logger.log(levelno, message,
                   extra={'ris_module': module, 'ris_event': event, 'ris_fields': fields})


def set_level(level_name):
    """Ajusta o nível mínimo (DEBUG, INFO, SUCCESS, WARN, ERROR)."""
    logger.setLevel(LEVELS.get(str(level_name).upper(), logging.INFO))


# ============================================
# FUNÇÕES DE LOGGING POR NÍVEL
# ============================================

def info(module, event, message, **fields):
    _emit(logging.INFO, module, event, message, fields)


def debug(module, event, message, **fields):
    _emit(logging.DEBUG, module, event, message, fields)


def warn(module, event, message, **fields):
    _emit(logging.WARNING, module, event, message, fields)


def error(module, event, message, **fields):
    _emit(logging.ERROR, module, event, message, fields)


def success(module, event, message, **fields):
    _emit(SUCCESS, module, event, message, fields)


# ============================================
# FUNÇÕES DE LOGGING POR CONTEXTO
# ============================================

def log_start(module, operation, **fields):
    info(module, 'START', f"Iniciando: {operation}", **fields)


def log_end(module, operation, **fields):
    success(module, 'END', f"Finalizado: {operation}", **fields)


def log_progress(module, operation, current, total, level=logging.DEBUG, **fields):
    percent = 100.0 * current / total if total else 0.0
    _emit(level, module, 'PROGRESS', f"{operation}: {current}/{total} ({percent:.0f}%)", fields)


def log_error(module, operation, error_msg, **fields):
    error(module, 'ERROR', f"{operation}: {error_msg}", **fields)


def log_data(module, operation, entity, **fields):
    info(module, 'DATA', f"{operation}: {entity}", **fields)


def log_operation(module, operation_name):
    """
    Decorator para comandos longos: START, END com a duração, ou ERROR e relança.

    Uso:
        @log_operation(M.CLI, 'Varredura de BER')
        def cmd_ber_sweep(run):
            ...
    """
    def decorator(f):
        @wraps(f)
        def timed(*args, **kwargs):
            log_start(module, operation_name)
            start = time.perf_counter()
            try:
                result = f(*args, **kwargs)
            except Exception as exc:
                log_error(module, operation_name, exc,
                          duracao=f"{time.perf_counter() - start:.2f}s")
                raise
            log_end(module, operation_name, duracao=f"{time.perf_counter() - start:.2f}s")
            return result
        return timed
    return decorator


# ============================================
# MÓDULOS PRÉ-DEFINIDOS
# ============================================

class RISModules:
    CELL = 'CELL'
    GEOMETRY = 'GEOMETRY'
    PROPAGATION = 'PROPAGATION'
    CODEBOOK = 'CODEBOOK'
    LINK = 'LINK'
    SWEEP = 'SWEEP'
    FIELDMAP = 'FIELDMAP'
    BATCH = 'BATCH'
    CLI = 'CLI'
    CONFIG = 'CONFIG'
    SYSTEM = 'SYSTEM'


M = RISModules


# ============================================
# LOGGING ESPECÍFICO POR ÁREA
# ============================================

class CodebookLogger:
    """Logger específico para síntese de codebooks."""

    @staticmethod
    def build_started(targets, psi_values, cells):
        total = targets * psi_values
        return info(M.CODEBOOK, 'START', "Síntese de codebook iniciada",
                    alvos=targets, psi=psi_values, entradas=total, celulas=cells)

    @staticmethod
    def entry_synthesized(index_p, psi_deg, max_error_deg):
        return debug(M.CODEBOOK, 'DATA', "Entrada sintetizada",
                     index_p=index_p, psi=f"{psi_deg:g}", erro_max=f"{max_error_deg:.3f}")

    @staticmethod
    def build_completed(entries, worst_error_deg, duration):
        return success(M.CODEBOOK, 'END', "Codebook concluído", entradas=entries,
                       erro_max=f"{worst_error_deg:.3f}deg", duracao=f"{duration:.1f}s")

    @staticmethod
    def duplicate_key(index_p, psi_deg):
        return error(M.CODEBOOK, 'ERROR', "Chave duplicada no codebook",
                     index_p=index_p, psi=f"{psi_deg:g}")


class SweepLogger:
    """Logger específico para a varredura de BER."""

    @staticmethod
    def sweep_started(entries, method, es_over_n0_db):
        return info(M.SWEEP, 'START', "Varredura de BER iniciada", entradas=entries,
                    metodo=method, es_n0=f"{es_over_n0_db:g}dB")

    @staticmethod
    def baseline(ber, mode):
        return info(M.SWEEP, 'DATA', "BER de referência calculada", ber=f"{ber:.6g}", modo=mode)

    @staticmethod
    def entry_failed(index_p, psi_deg, error_msg):
        return error(M.SWEEP, 'ERROR', "Falha em entrada da varredura",
                     index_p=index_p, psi=f"{psi_deg:g}", erro=error_msg)

    @staticmethod
    def sweep_completed(entries, failures, best_ber, baseline_ber, duration):
        return success(M.SWEEP, 'END', "Varredura concluída", entradas=entries, erros=failures,
                       melhor=f"{best_ber:.6g}", referencia=f"{baseline_ber:.6g}",
                       duracao=f"{duration:.1f}s")


class FieldMapLogger:
    """Logger específico para mapas de campo."""

    @staticmethod
    def map_started(nu, nv, include_direct):
        return info(M.FIELDMAP, 'START', "Mapa de campo iniciado", nu=nu, nv=nv,
                    direto=include_direct)

    @staticmethod
    def domain_warning(nodes_outside, total_nodes, max_deflection_deg):
        return warn(M.FIELDMAP, 'DOMAIN', "Nós com células fora do domínio angular",
                    nos=f"{nodes_outside}/{total_nodes}", limite=f"{max_deflection_deg:g}deg")

    @staticmethod
    def map_completed(nu, nv, peak_db, duration):
        return success(M.FIELDMAP, 'END', "Mapa de campo concluído", nos=nu * nv,
                       pico=f"{peak_db:.2f}dB", duracao=f"{duration:.1f}s")


# ============================================
# INSTÂNCIAS GLOBAIS
# ============================================

codebook_log = CodebookLogger()
sweep_log = SweepLogger()
fieldmap_log = FieldMapLogger()


# ============================================
# INICIALIZAÇÃO
# ============================================

def log_section(title):
    """Cabeçalho de seção no log (um por comando da CLI)."""
    info(M.SYSTEM, 'SECTION', f"{'=' * 16} {title} {'=' * 16}")


def init_logging(level_name=None):
    """Inicializa o sistema de logging (chamado pela CLI, não no import)."""
    if level_name:
        set_level(level_name)
    colors = any(getattr(h.formatter, 'use_colors', False) for h in logger.handlers)
    info(M.SYSTEM, 'START', "Sistema de logging inicializado",
         nivel=logging.getLevelName(logger.level))
    debug(M.SYSTEM, 'INFO', f"Cores: {'habilitadas' if colors else 'desabilitadas'}")
    return True
