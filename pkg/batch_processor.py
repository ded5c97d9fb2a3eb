"""
Batch Processor - Execução paralela de tarefas independentes do simulador
Síntese de codebook, varredura de BER e linhas de mapas de campo rodam em ThreadPoolExecutor.
Os resultados são devolvidos na ordem de submissão, então a saída é idêntica à execução sequencial.
"""

import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Any, NamedTuple

from ris_logger import M, debug, error, info, log_progress, warn

PROGRESS_STEPS = 10


class TaskFailure(NamedTuple):
    key: Any
    message: str


def log_batch(message, level="INFO", module=M.BATCH):
    """Logger centralizado para o processamento em lote."""
    if level == "ERROR":
        error(module, 'BATCH', message)
    elif level == "WARN":
        warn(module, 'BATCH', message)
    elif level == "DEBUG":
        debug(module, 'BATCH', message)
    else:
        info(module, 'BATCH', message)


class BatchProcessor:
    """Executor de tarefas chaveadas com threads.

    Cada tarefa é (key, func, args). As chaves precisam ser únicas.
    """

    def __init__(self, max_workers=None, module=M.BATCH, label="tarefas"):
        if not max_workers:
            # config importa este módulo (via ambc_link); import tardio
            from config import Config
            max_workers = Config.MAX_WORKERS
        self.max_workers = max(1, int(max_workers))
        self.module = module
        self.label = label

    def run(self, tasks, collect_errors=False):
        """
        Executa as tarefas e devolve {key: resultado} na ordem de submissão.

        Args:
            tasks: iterável de (key, func, args)
            collect_errors: se True, falhas viram TaskFailure no lugar do resultado;
                se False, a primeira exceção é relançada ao fim
        """
        tasks = list(tasks)
        keys = [key for key, _, _ in tasks]
        if len(set(keys)) != len(keys):
            raise ValueError("chaves de tarefa duplicadas no lote")

        total = len(tasks)
        if total == 0:
            return {}

        log_batch(f"Processando {total} {self.label} com {self.max_workers} workers", "DEBUG",
                  self.module)
        results = {}
        failures = 0
        first_error = None
        start_time = time.time()
        step = max(1, total // PROGRESS_STEPS)

        def _record(key, func, args, done):
            nonlocal failures, first_error
            try:
                results[key] = func(*args)
            except Exception as e:
                failures += 1
                if collect_errors:
                    results[key] = TaskFailure(key, str(e))
                    log_batch(f"Falha em {key}: {e}", "WARN", self.module)
                elif first_error is None:
                    first_error = e
                    log_batch(f"EXCEÇÃO em {key}: {e}", "ERROR", self.module)
            if done % step == 0 or done == total:
                elapsed = time.time() - start_time
                rate = done / elapsed if elapsed > 0 else 0
                eta = (total - done) / rate if rate > 0 else 0
                log_progress(self.module, self.label, done, total, ok=done - failures,
                             erros=failures, taxa=f"{rate:.1f}it/s", eta=f"{eta:.0f}s")

        if self.max_workers == 1 or total == 1:
            for done, (key, func, args) in enumerate(tasks, start=1):
                _record(key, func, args, done)
                if first_error is not None:
                    break
        else:
            with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
                futures = {executor.submit(_call, func, args): key for key, func, args in tasks}
                for done, future in enumerate(as_completed(futures), start=1):
                    key = futures[future]
                    _record(key, future.result, (), done)

        if first_error is not None:
            raise first_error

        elapsed_total = time.time() - start_time
        log_batch(f"{total} {self.label} concluídas em {elapsed_total:.2f}s ({failures} erros)",
                  "DEBUG", self.module)
        return {key: results[key] for key in keys}


def _call(func, args):
    return func(*args)
