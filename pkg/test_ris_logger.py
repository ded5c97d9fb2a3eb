import logging
import re

import pytest

import ris_logger
from ris_logger import M, RisFormatter, log_operation


def _record(level, message, **extra):
    return ris_logger.logger.makeRecord('RIS', level, __file__, 1, message, (), None,
                                        extra=extra)


def test_line_format_with_fields():
    record = _record(logging.WARNING, "Trecho fora do domínio",
                     ris_module=M.GEOMETRY, ris_event='DOMAIN',
                     ris_fields={'trecho': 'fonte->tag', 'celulas': 3})
    line = RisFormatter().format(record)
    assert re.match(r"^\[\d{4}-\d{2}-\d{2} \d{2}:\d{2}:\d{2}\.\d{3}\] \[WARN   \] "
                    r"\[GEOMETRY   \] \[DOMAIN  \] Trecho fora do domínio", line)
    assert line.endswith(" | trecho=fonte->tag | celulas=3")


def test_success_level_and_colors():
    record = _record(ris_logger.SUCCESS, "ok", ris_module=M.CLI, ris_event='END')
    assert '[SUCCESS]' in RisFormatter().format(record)
    colored = RisFormatter(use_colors=True).format(record)
    assert colored.startswith(ris_logger.COLORS['SUCCESS']) and colored.endswith(ris_logger.RESET)


def test_set_level_accepts_names():
    previous = ris_logger.logger.level
    try:
        ris_logger.set_level('warn')
        assert ris_logger.logger.level == logging.WARNING
        ris_logger.set_level('bogus')
        assert ris_logger.logger.level == logging.INFO
    finally:
        ris_logger.logger.setLevel(previous)


def test_log_operation_returns_and_reraises():
    @log_operation(M.CLI, 'teste')
    def ok(x):
        return x + 1

    @log_operation(M.CLI, 'teste')
    def boom():
        raise RuntimeError("falhou")

    assert ok(1) == 2
    assert ok.__name__ == 'ok'
    with pytest.raises(RuntimeError, match='falhou'):
        boom()
