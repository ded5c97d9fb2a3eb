"""
Codebook - Síntese de configurações de beamforming passivo
Para cada alvo P e fase uniforme psi: compensação do caminho óptico por célula
b_m = exp(-j 2 pi (d_m^{S-RIS} + d_m^{RIS-P}) / lambda), fase desejada por célula e conversão em
tensões atingíveis pelo modelo da célula (por célula, independente e sem olhar a amplitude).
"""

from __future__ import annotations

import io
import time
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from batch_processor import BatchProcessor
from cell_model import CellResponseModel, wrap_deg
from errors import CodebookError, SingularityError
from geometry import (
    SINGULAR_DISTANCE, RisArray, ScenarioGeometry, Vec3, as_point, path_lengths, scenario_hash,
)
from propagation import RisConfiguration, total_field
from ris_logger import M, codebook_log, log_data

CODEBOOK_MAGIC = "# ris-codebook"
CODEBOOK_SCHEMA_VERSION = 1


class PhaseConvention(str, Enum):
    """ALIGNED: phi_m = psi + arg(b_m), contribuições chegam em P com fase psi.
    LITERAL: phi_m = arg(b_m) - psi, leitura literal de "b_m - psi"."""
    ALIGNED = 'aligned'
    LITERAL = 'literal'


@dataclass(frozen=True)
class BeamTarget:
    position: Vec3
    index_p: int

    def __post_init__(self):
        object.__setattr__(self, 'position', Vec3.of(self.position))
        if int(self.index_p) != self.index_p or self.index_p < 0:
            raise CodebookError("index_p deve ser inteiro >= 0", index=self.index_p)
        object.__setattr__(self, 'index_p', int(self.index_p))


@dataclass(frozen=True, eq=False)
class CodebookEntry:
    target: BeamTarget
    psi_deg: float
    voltages: np.ndarray
    desired_phases_deg: np.ndarray
    achieved_phases_deg: np.ndarray
    phase_errors_deg: np.ndarray
    achieved_amplitudes_db: np.ndarray

    @property
    def index_p(self):
        return self.target.index_p

    @property
    def key(self):
        return (self.target.index_p, float(self.psi_deg))

    @property
    def max_phase_error_deg(self):
        return float(np.max(np.abs(self.phase_errors_deg)))

    def configuration(self):
        return RisConfiguration(self.voltages)


@dataclass(frozen=True, eq=False)
class CodebookRecord:
    """Entrada lida do arquivo: só chave e tensões."""
    index_p: int
    psi_deg: float
    voltages: np.ndarray

    @property
    def key(self):
        return (int(self.index_p), float(self.psi_deg))

    def configuration(self):
        return RisConfiguration(self.voltages)


class Codebook:
    """Entradas indexadas por (index_p, psi_deg), em ordem de inserção."""

    def __init__(self, entries: Iterable = (), header=None):
        self._entries = {}
        self.header = dict(header or {})
        for entry in entries:
            self.add(entry)

    def add(self, entry):
        key = entry.key
        if key in self._entries:
            codebook_log.duplicate_key(*key)
            raise CodebookError(f"chave duplicada psi={key[1]:g}", index=key[0])
        self._entries[key] = entry

    def get(self, index_p, psi_deg):
        return self._entries[(int(index_p), float(psi_deg))]

    def keys(self):
        return list(self._entries)

    @property
    def entries(self):
        return list(self._entries.values())

    def __len__(self):
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries.values())

    def __contains__(self, key):
        return key in self._entries

    @property
    def worst_phase_error_deg(self):
        errors = [e.max_phase_error_deg for e in self if isinstance(e, CodebookEntry)]
        return max(errors) if errors else float('nan')


# ============================================
# OPERAÇÕES POR CÉLULA
# ============================================

def path_phases(scenario: ScenarioGeometry, target):
    """b_m para todas as células, array complexo (M,) de módulo 1."""
    d1, d2 = path_lengths(scenario.ris, scenario.source, target)
    return np.exp(-2j * np.pi * (d1 + d2) / scenario.wavelength)


def path_phase(scenario: ScenarioGeometry, m: int, target):
    ris = scenario.ris
    if not 0 <= int(m) < ris.cell_count:
        raise IndexError(f"célula {m} fora de [0, {ris.cell_count})")
    center = ris.centers[int(m)]
    d1 = float(np.linalg.norm(as_point(scenario.source) - center))
    d2 = float(np.linalg.norm(as_point(target) - center))
    if d1 <= SINGULAR_DISTANCE or d2 <= SINGULAR_DISTANCE:
        raise SingularityError("ponto coincide com o centro da célula", [int(m)])
    return complex(np.exp(-2j * np.pi * (d1 + d2) / scenario.wavelength))


def desired_cell_phase(b_m, psi_deg, convention=PhaseConvention.ALIGNED):
    """Fase (graus, em (-180, 180]) que a célula deve aplicar para a uniforme psi em P."""
    arg_deg = np.angle(b_m, deg=True)
    psi = np.mod(float(psi_deg), 360.0)
    if PhaseConvention(convention) is PhaseConvention.LITERAL:
        phase = wrap_deg(arg_deg - psi)
    else:
        phase = wrap_deg(psi + arg_deg)
    return float(phase) if np.ndim(phase) == 0 else phase


def synthesize_entry(scenario: ScenarioGeometry, model: CellResponseModel, target: BeamTarget,
                     psi_deg: float, convention=PhaseConvention.ALIGNED) -> CodebookEntry:
    b = path_phases(scenario, target.position)
    desired = desired_cell_phase(b, psi_deg, convention)
    volts, achieved, amplitude, errors = model.voltages_for_phases(desired)
    entry = CodebookEntry(target, float(psi_deg), volts, np.asarray(desired), achieved, errors,
                          amplitude)
    codebook_log.entry_synthesized(target.index_p, psi_deg, entry.max_phase_error_deg)
    return entry


# ============================================
# ALVOS E GRADE DE PSI
# ============================================

def line_targets(start, end, count, first_index=1):
    """`count` alvos igualmente espaçados no segmento start -> end."""
    if count < 1:
        raise CodebookError("count deve ser >= 1")
    a = as_point(start)
    b = as_point(end)
    t = np.linspace(0.0, 1.0, int(count)) if count > 1 else np.array([0.5])
    return [BeamTarget(Vec3.of(a + ti * (b - a)), first_index + k) for k, ti in enumerate(t)]


def arc_targets(ris: RisArray, distance, deflection_start_deg, deflection_end_deg, count,
                azimuth_deg=0.0, first_index=1):
    """Alvos num arco de raio `distance` em torno do centro da RIS, no plano de azimute dado."""
    if count < 1:
        raise CodebookError("count deve ser >= 1")
    angles = (np.linspace(deflection_start_deg, deflection_end_deg, int(count)) if count > 1
              else np.array([0.5 * (deflection_start_deg + deflection_end_deg)]))
    return [BeamTarget(ris.local_point(distance, a, azimuth_deg), first_index + k)
            for k, a in enumerate(angles)]


def explicit_targets(positions: Sequence, first_index=1):
    return [BeamTarget(Vec3.of(p), first_index + k) for k, p in enumerate(positions)]


def validate_targets(ris: RisArray, targets: Sequence[BeamTarget]):
    seen = set()
    for target in targets:
        if target.index_p in seen:
            raise CodebookError("index_p repetido", index=target.index_p)
        seen.add(target.index_p)
        if ris.front_distance(target.position) <= 0:
            raise CodebookError("alvo atrás do plano da RIS", index=target.index_p)


def psi_grid(step_deg=10.0, start_deg=0.0, stop_deg=360.0):
    """Grade uniforme de psi em [start, stop)."""
    if not step_deg > 0:
        raise CodebookError(f"passo de psi deve ser > 0, recebido {step_deg}")
    count = int(np.ceil((stop_deg - start_deg) / step_deg - 1e-9))
    return [float(np.round(start_deg + k * step_deg, 9)) for k in range(max(count, 1))]


# ============================================
# CONSTRUÇÃO DO CODEBOOK
# ============================================

def build_codebook(scenario: ScenarioGeometry, model: CellResponseModel,
                   targets: Sequence[BeamTarget], psi_values: Sequence[float],
                   convention=PhaseConvention.ALIGNED,
                   processor: BatchProcessor = None) -> Codebook:
    """Uma entrada por par (alvo, psi), em ordem alvo-major."""
    targets = list(targets)
    psi_values = [float(p) for p in psi_values]
    if not targets or not psi_values:
        raise CodebookError("alvos e grade de psi não podem ser vazios")
    validate_targets(scenario.ris, targets)
    if len(set(psi_values)) != len(psi_values):
        raise CodebookError("valores de psi repetidos na grade")

    start = time.time()
    codebook_log.build_started(len(targets), len(psi_values), scenario.ris.cell_count)
    tasks = [((t.index_p, psi), synthesize_entry, (scenario, model, t, psi, convention))
             for t in targets for psi in psi_values]
    processor = processor or BatchProcessor(module=M.CODEBOOK, label="entradas")
    results = processor.run(tasks)

    codebook = Codebook(results.values(), header=codebook_header(scenario))
    codebook_log.build_completed(len(codebook), codebook.worst_phase_error_deg,
                                 time.time() - start)
    return codebook


def optimal_psi(scenario: ScenarioGeometry, model: CellResponseModel, target: BeamTarget,
                psi_values: Sequence[float], convention=PhaseConvention.ALIGNED, e_source=1.0):
    """psi da grade que maximiza |campo total| em P (RIS somando em fase com o caminho direto).

    Retorna (psi, entrada, |campo|); empates ficam com o primeiro psi.
    """
    best = None
    for psi in psi_values:
        entry = synthesize_entry(scenario, model, target, psi, convention)
        magnitude = abs(total_field(e_source, scenario, model, entry.configuration(),
                                    target.position, include_direct=True))
        if best is None or magnitude > best[2]:
            best = (float(psi), entry, magnitude)
    return best


# ============================================
# PERSISTÊNCIA
# ============================================

def codebook_header(scenario: ScenarioGeometry):
    return {
        'schema_version': CODEBOOK_SCHEMA_VERSION,
        'scenario_hash': scenario_hash(scenario),
        'wavelength': f"{scenario.wavelength:.9g}",
        'array': f"{scenario.ris.rows}x{scenario.ris.cols}",
    }


def save_codebook(codebook: Codebook, path, scenario: ScenarioGeometry = None):
    """Grava o codebook: cabeçalho chave=valor e um registro CSV por entrada.

    Registro: index_p,psi_deg,v_1..v_M com tensões em 3 casas decimais.
    psi_deg vai com precisão completa (repr).
    """
    header = dict(codebook.header)
    if scenario is not None:
        header.update(codebook_header(scenario))
    entries = codebook.entries
    if not entries:
        raise CodebookError("codebook vazio")
    cells = len(entries[0].voltages)
    header['entries'] = len(entries)

    df = pd.DataFrame([[f"{v:.3f}" for v in e.voltages] for e in entries],
                      columns=[f"v_{m + 1}" for m in range(cells)])
    df.insert(0, 'psi_deg', [repr(float(e.psi_deg)) for e in entries])
    df.insert(0, 'index_p', [int(e.index_p) for e in entries])

    with open(path, 'w', encoding='utf-8', newline='') as handle:
        handle.write(f"{CODEBOOK_MAGIC}\n")
        for key in ('schema_version', 'scenario_hash', 'wavelength', 'array', 'entries'):
            if key in header:
                handle.write(f"{key}={header[key]}\n")
        df.to_csv(handle, index=False, lineterminator='\n')
    log_data(M.CODEBOOK, "Codebook gravado", str(path), entradas=len(entries))


def load_codebook(path) -> Codebook:
    with open(path, 'r', encoding='utf-8') as handle:
        lines = handle.read().splitlines()
    if not lines or lines[0].strip() != CODEBOOK_MAGIC:
        raise CodebookError(f"{path} não é um arquivo de codebook")

    header = {}
    body_start = None
    for i, line in enumerate(lines[1:], start=1):
        if line.startswith('index_p,'):
            body_start = i
            break
        key, _, value = line.partition('=')
        header[key.strip()] = value.strip()
    if body_start is None:
        raise CodebookError(f"{path} sem registros")
    try:
        schema = int(header.get('schema_version', CODEBOOK_SCHEMA_VERSION))
    except ValueError:
        schema = None
    if schema != CODEBOOK_SCHEMA_VERSION:
        raise CodebookError(f"schema_version não suportada: {header['schema_version']}")

    df = pd.read_csv(io.StringIO('\n'.join(lines[body_start:])), float_precision='round_trip')
    missing = [c for c in ('index_p', 'psi_deg') if c not in df.columns]
    if missing:
        raise CodebookError(f"{path} sem as colunas {', '.join(missing)}")
    volt_cols = [c for c in df.columns if c.startswith('v_')]
    if 'array' in header:
        rows, _, cols = header['array'].partition('x')
        try:
            cells = int(rows) * int(cols)
        except ValueError:
            raise CodebookError(f"arranjo inválido no cabeçalho: {header['array']}") from None
        if cells != len(volt_cols):
            raise CodebookError(
                f"{len(volt_cols)} colunas de tensão para arranjo {header['array']}")

    try:
        records = [CodebookRecord(int(row.index_p), float(row.psi_deg),
                                  df.loc[i, volt_cols].to_numpy(dtype=float))
                   for i, row in enumerate(df[['index_p', 'psi_deg']].itertuples(index=False))]
    except (TypeError, ValueError) as exc:
        raise CodebookError(f"{path} com registro inválido: {exc}") from exc
    codebook = Codebook(records, header=header)
    log_data(M.CODEBOOK, "Codebook lido", str(path), entradas=len(codebook))
    return codebook
