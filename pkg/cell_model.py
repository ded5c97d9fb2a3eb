"""
Cell Model - Modelo da célula unitária controlada por tensão
Tabela experimental (amplitude e fase da reflexão em função da tensão nos varactores),
avaliação direta r(v) = g0 * alpha(v) * exp(j*phi(v)) e inversão fase -> tensão.

Interpolação linear por trechos em tensão, feita separadamente sobre a amplitude em dB e
sobre a fase desdobrada (ramo contínuo). A fase só é re-enrolada para (-180, 180] na saída.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np
import pandas as pd

from errors import CellTableError, GeometryError, VoltageOutOfRangeError
from ris_logger import M, debug, log_data

# Caracterização experimental do protótipo: (tensão [V], amplitude [dB], fase [graus])
PROTOTYPE_TABLE = (
    (0.0, -1.517, 32.798),
    (0.25, -1.807, 40.854),
    (0.5, -3.156, 46.807),
    (0.75, -5.59, 53.543),
    (1.0, -9.576, 70.32),
    (1.25, -20.563, -167.158),
    (1.5, -6.615, -73.171),
    (1.75, -3.029, -49.627),
    (2.0, -1.959, -35.908),
    (2.5, -0.874, -23.263),
    (3.0, -0.749, -16.087),
    (3.5, -0.469, -12.663),
    (4.0, -0.528, -9.925),
    (5.0, -0.439, -6.906),
)

TABLE_COLUMNS = ('voltage', 'amplitude_db', 'phase_deg')

# folga numérica ao comparar o alvo desdobrado com o fim do intervalo de fase
_SPAN_TOL = 1e-9


def wrap_deg(angle):
    """Enrola ângulos em graus para o intervalo (-180, 180]."""
    return 180.0 - np.mod(180.0 - np.asarray(angle, dtype=float), 360.0)


@dataclass(frozen=True)
class CellSample:
    voltage: float
    amplitude_db: float
    phase_deg: float


class PhaseInversion(NamedTuple):
    voltage: float
    achieved_phase_deg: float
    achieved_amplitude_db: float
    error_deg: float


class PhaseGap(NamedTuple):
    gap_lo_deg: float
    gap_hi_deg: float
    gap_width_deg: float


@dataclass(frozen=True)
class AngularDomain:
    """Cone de validade do modelo: ângulos de incidência e partida abaixo do limite."""
    max_deflection_deg: float = 40.0

    def __post_init__(self):
        if not (0.0 < self.max_deflection_deg <= 90.0):
            raise GeometryError(
                f"max_deflection_deg deve estar em (0, 90], recebido {self.max_deflection_deg}")

    def contains(self, angle_deg):
        return np.asarray(angle_deg) < self.max_deflection_deg


def _minimal_jump_unwrap(phases_deg):
    """Desdobra a fase escolhendo sempre o salto mínimo entre amostras vizinhas.

    Cada valor desdobrado é a fase original mais um múltiplo exato de 360.
    """
    phases = np.asarray(phases_deg, dtype=float)
    steps = wrap_deg(np.diff(phases))
    running = phases[0] + np.concatenate(([0.0], np.cumsum(steps)))
    turns = np.round((running - phases) / 360.0)
    return phases + 360.0 * turns


@dataclass(frozen=True, eq=False)
class CellResponseModel:
    """Mapa tensão -> (amplitude, fase) da célula, imutável após a construção."""
    samples: tuple
    g0: float = 1.0
    unwrapped_phase_deg: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        samples = tuple(s if isinstance(s, CellSample) else CellSample(*map(float, s))
                        for s in self.samples)
        _validate_samples(samples)
        if not np.isfinite(self.g0) or self.g0 < 0:
            raise CellTableError(f"g0 deve ser finito e >= 0, recebido {self.g0}")
        object.__setattr__(self, 'samples', samples)

        voltages = np.array([s.voltage for s in samples])
        amplitudes = np.array([s.amplitude_db for s in samples])
        phases = np.array([s.phase_deg for s in samples])
        unwrapped = _minimal_jump_unwrap(phases)
        for arr in (voltages, amplitudes, phases, unwrapped):
            arr.setflags(write=False)
        object.__setattr__(self, '_voltages', voltages)
        object.__setattr__(self, '_amplitudes_db', amplitudes)
        object.__setattr__(self, '_phases_deg', phases)
        object.__setattr__(self, 'unwrapped_phase_deg', unwrapped)

    # ------------------------------------------------------------------
    # Propriedades da tabela
    # ------------------------------------------------------------------
    @property
    def voltages(self):
        return self._voltages

    @property
    def amplitudes_db(self):
        return self._amplitudes_db

    @property
    def phases_deg(self):
        return self._phases_deg

    @property
    def v_min(self):
        return float(self._voltages[0])

    @property
    def v_max(self):
        return float(self._voltages[-1])

    def with_gain(self, g0):
        """Mesmo modelo com outro ganho g0 (g0 = 0 representa uma RIS absorvente)."""
        return replace(self, g0=float(g0))

    def voltage_grid(self, step):
        """Grade de tensões de v_min a v_max com passo `step`, sempre incluindo os extremos."""
        if not step > 0:
            raise CellTableError(f"passo de tensão deve ser > 0, recebido {step}")
        span = self.v_max - self.v_min
        intervals = span / step
        n = int(round(intervals))
        if n >= 1 and abs(intervals - n) < 1e-9:
            return np.linspace(self.v_min, self.v_max, n + 1)
        if step > span:
            return np.array([self.v_min, self.v_max])
        grid = self.v_min + step * np.arange(int(np.floor(intervals)) + 1)
        return np.append(grid[grid < self.v_max], self.v_max)

    def sample_grid(self, step):
        """Amplitude e fase interpoladas sobre voltage_grid(step)."""
        volts = self.voltage_grid(step)
        amplitude, phase = self.evaluate(volts)
        return pd.DataFrame({'voltage': volts, 'amplitude_db': amplitude, 'phase_deg': phase})

    # ------------------------------------------------------------------
    # Avaliação direta
    # ------------------------------------------------------------------
    def _check_range(self, v):
        arr = np.asarray(v, dtype=float)
        bad = ~np.isfinite(arr) | (arr < self.v_min) | (arr > self.v_max)
        if np.any(bad):
            first = arr[bad].flat[0] if arr.ndim else float(arr)
            raise VoltageOutOfRangeError(
                f"tensão {first:g} V fora da faixa tabelada [{self.v_min:g}, {self.v_max:g}] V")
        return arr

    def amplitude_db(self, v):
        arr = self._check_range(v)
        return np.interp(arr, self._voltages, self._amplitudes_db)

    def unwrapped_phase(self, v):
        arr = self._check_range(v)
        return np.interp(arr, self._voltages, self.unwrapped_phase_deg)

    def phase_deg(self, v):
        return wrap_deg(self.unwrapped_phase(v))

    def evaluate(self, v):
        """Retorna (amplitude_db, phase_deg) interpolados, exatos nos nós da tabela."""
        return self.amplitude_db(v), self.phase_deg(v)

    def reflection_coefficient(self, v):
        amplitude = self.amplitude_db(v)
        phase = self.unwrapped_phase(v)
        r = self.g0 * np.power(10.0, amplitude / 20.0) * np.exp(1j * np.deg2rad(phase))
        return complex(r) if np.ndim(r) == 0 else r

    # ------------------------------------------------------------------
    # Cobertura de fase e inversão
    # ------------------------------------------------------------------
    @property
    def phase_span(self):
        return float(self.unwrapped_phase_deg.min()), float(self.unwrapped_phase_deg.max())

    def achievable_phase_gap(self):
        umin, umax = self.phase_span
        span = umax - umin
        if span >= 360.0 - _SPAN_TOL:
            edge = float(wrap_deg(umax))
            return PhaseGap(edge, edge, 0.0)
        return PhaseGap(float(wrap_deg(umax)), float(wrap_deg(umin)), 360.0 - span)

    def voltages_for_phases(self, target_phase_deg):
        """Versão vetorizada de voltage_for_phase.

        Retorna (voltages, achieved_phase_deg, achieved_amplitude_db, error_deg) como arrays.
        O erro é o desvio circular com sinal, achieved - target, em (-180, 180].
        """
        targets = np.atleast_1d(np.asarray(target_phase_deg, dtype=float))
        u = self.unwrapped_phase_deg
        v = self._voltages
        umin, umax = self.phase_span

        candidate = umin + np.mod(targets - umin, 360.0)
        hit = candidate <= umax + _SPAN_TOL
        candidate = np.minimum(candidate, umax)

        volts = np.full(targets.shape, np.nan)
        assigned = np.zeros(targets.shape, dtype=bool)
        for i in range(len(u) - 1):
            lo, hi = min(u[i], u[i + 1]), max(u[i], u[i + 1])
            mask = hit & ~assigned & (candidate >= lo) & (candidate <= hi)
            if not mask.any():
                continue
            du = u[i + 1] - u[i]
            if du == 0.0:
                volts[mask] = v[i]
            else:
                volts[mask] = v[i] + (candidate[mask] - u[i]) * (v[i + 1] - v[i]) / du
            assigned |= mask

        # fora da cobertura: extremo mais próximo do arco atingível
        missing = ~assigned
        if missing.any():
            i_lo = int(np.argmin(u))
            i_hi = int(np.argmax(u))
            err_lo = np.abs(wrap_deg(targets[missing] - umin))
            err_hi = np.abs(wrap_deg(targets[missing] - umax))
            prefer_hi = err_hi < err_lo
            if v[i_hi] < v[i_lo]:
                prefer_hi = err_hi <= err_lo
            volts[missing] = np.where(prefer_hi, v[i_hi], v[i_lo])

        achieved_unwrapped = np.interp(volts, v, u)
        achieved = wrap_deg(achieved_unwrapped)
        amplitude = np.interp(volts, v, self._amplitudes_db)
        errors = wrap_deg(achieved - targets)
        return volts, achieved, amplitude, errors

    def voltage_for_phase(self, target_phase_deg):
        volts, achieved, amplitude, errors = self.voltages_for_phases(target_phase_deg)
        return PhaseInversion(float(volts[0]), float(achieved[0]), float(amplitude[0]),
                              float(errors[0]))


def _validate_samples(samples):
    if not samples:
        raise CellTableError("tabela da célula vazia")
    if len(samples) < 2:
        raise CellTableError("a tabela precisa de pelo menos 2 amostras", index=0)
    for i, s in enumerate(samples):
        if not all(np.isfinite([s.voltage, s.amplitude_db, s.phase_deg])):
            raise CellTableError("valor não finito na tabela", index=i)
        if not (-180.0 < s.phase_deg <= 180.0):
            raise CellTableError(f"fase {s.phase_deg} fora de (-180, 180]", index=i)
        if i > 0 and s.voltage <= samples[i - 1].voltage:
            raise CellTableError("tensões duplicadas ou fora de ordem", index=i)


# ============================================
# OPERAÇÕES DO MÓDULO
# ============================================

def load_table(samples: Sequence, g0: float = 1.0) -> CellResponseModel:
    """Constrói o modelo a partir de amostras (CellSample ou tuplas v, amp_db, fase)."""
    model = CellResponseModel(tuple(samples), g0=g0)
    debug(M.CELL, 'DATA', "Tabela da célula carregada", amostras=len(model.samples),
          faixa=f"{model.v_min:g}-{model.v_max:g}V")
    return model


def default_model(g0: float = 1.0) -> CellResponseModel:
    """Tabela experimental do protótipo (14 linhas)."""
    return load_table(PROTOTYPE_TABLE, g0=g0)


def normalize_column_name(name):
    """Normaliza nome de coluna: minúsculas, sem espaços extras, espaços viram '_'."""
    return '_'.join(str(name).strip().lower().split())


def load_table_file(path, g0: float = 1.0) -> CellResponseModel:
    """Lê a tabela de um CSV (voltage,amplitude_db,phase_deg) ou de uma planilha .xlsx."""
    ext = os.path.splitext(str(path))[1].lower()
    try:
        if ext in ('.xlsx', '.xlsm'):
            df = pd.read_excel(path, engine='openpyxl')
        else:
            df = pd.read_csv(path)
    except (OSError, ValueError, pd.errors.ParserError) as exc:
        raise CellTableError(f"não foi possível ler a tabela {path}: {exc}") from exc

    df.columns = [normalize_column_name(c) for c in df.columns]
    missing = [c for c in TABLE_COLUMNS if c not in df.columns]
    if missing:
        raise CellTableError(f"colunas ausentes em {path}: {', '.join(missing)}")

    rows = []
    for i, row in enumerate(df[list(TABLE_COLUMNS)].itertuples(index=False)):
        try:
            rows.append(CellSample(float(row[0]), float(row[1]), float(row[2])))
        except (TypeError, ValueError) as exc:
            raise CellTableError(f"valor inválido na linha: {exc}", index=i) from exc

    model = load_table(rows, g0=g0)
    log_data(M.CELL, "Tabela lida", os.path.basename(str(path)), amostras=len(rows))
    return model


def reflection_coefficient(model: CellResponseModel, v):
    return model.reflection_coefficient(v)


def voltage_for_phase(model: CellResponseModel, target_phase_deg: float) -> PhaseInversion:
    return model.voltage_for_phase(target_phase_deg)


def achievable_phase_gap(model: CellResponseModel) -> PhaseGap:
    return model.achievable_phase_gap()
