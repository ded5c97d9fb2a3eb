import json
import logging

import numpy as np
import pytest

import ris_logger
from batch_processor import BatchProcessor
from cell_model import default_model, load_table
from geometry import RisArray, ScenarioGeometry, Vec3, default_scenario

collect_ignore = ['examples']

WAVELENGTH = 0.055

# Modelo sintético com cobertura de fase completa (0 -> 360 graus) e amplitude 0 dB
FULL_COVERAGE_TABLE = [
    (0.0, 0.0, 0.0),
    (1.0, 0.0, 90.0),
    (2.0, 0.0, 180.0),
    (3.0, 0.0, -90.0),
    (4.0, 0.0, 0.0),
]


@pytest.fixture
def table_model():
    return default_model()


@pytest.fixture
def full_coverage_model():
    return load_table(FULL_COVERAGE_TABLE)


@pytest.fixture
def scenario():
    return default_scenario()


@pytest.fixture
def serial():
    return BatchProcessor(max_workers=1)


class _ListHandler(logging.Handler):
    def __init__(self):
        super().__init__(logging.INFO)
        self.records = []

    def emit(self, record):
        self.records.append(record)


@pytest.fixture
def ris_records():
    """Registros do logger RIS (propagate=False, fora do alcance do caplog)."""
    handler = _ListHandler()
    previous = ris_logger.logger.level
    ris_logger.logger.addHandler(handler)
    ris_logger.logger.setLevel(logging.INFO)
    try:
        yield handler.records
    finally:
        ris_logger.logger.removeHandler(handler)
        ris_logger.logger.setLevel(previous)


def random_cone_point(rng, ris, d_min=0.5, d_max=5.0, max_deflection=30.0):
    """Ponto aleatório à frente da RIS, dentro de um cone em torno da normal."""
    return ris.local_point(rng.uniform(d_min, d_max), rng.uniform(0.0, max_deflection),
                           rng.uniform(0.0, 360.0))


def small_scenario(rows=2, cols=2, source=(0.0, 0.0, 1.0), tag=(0.3, 0.1, 1.2),
                   reader=(-0.4, 0.2, 0.9), wavelength=WAVELENGTH):
    ris = RisArray(rows=rows, cols=cols)
    return ScenarioGeometry(ris=ris, source=Vec3.of(source), tag=Vec3.of(tag),
                            reader=Vec3.of(reader), wavelength=wavelength)


def write_config(path, data):
    payload = {'schema_version': 1, **data}
    path.write_text(json.dumps(payload), encoding='utf-8')
    return str(path)


def wrapped_difference(a_deg, b_deg):
    return (np.asarray(a_deg) - np.asarray(b_deg) + 180.0) % 360.0 - 180.0
