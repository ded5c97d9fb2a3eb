"""
Propagation - Campo espalhado em espaço livre pela RIS
Cascata fonte -> célula m -> ponto de observação somada sobre as M células, campo total com o
caminho direto e mapas de campo rasterizados sobre um plano.

Convenção de fase: o fator de espaço livre é lambda * exp(+j 2 pi d / lambda) / (4 pi d).
Modelo escalar, frentes de onda esféricas por célula (válido em campo próximo).
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from batch_processor import BatchProcessor
from cell_model import AngularDomain, CellResponseModel
from errors import GeometryError, SingularityError
from geometry import (
    SINGULAR_DISTANCE, RisArray, ScenarioGeometry, Vec3, as_point, deflection_report, distances_to,
    path_lengths,
)
from ris_logger import M, fieldmap_log, warn


def free_space_gain(d, wavelength):
    """lambda * exp(j 2 pi d / lambda) / (4 pi d); escalar ou vetorizado."""
    if not wavelength > 0:
        raise GeometryError(f"comprimento de onda deve ser > 0, recebido {wavelength}")
    dist = np.asarray(d, dtype=float)
    bad = np.flatnonzero(np.atleast_1d(dist) <= 0)
    if bad.size:
        raise SingularityError("distância nula ou negativa no fator de espaço livre",
                               bad.tolist())
    gain = wavelength * np.exp(2j * np.pi * dist / wavelength) / (4.0 * np.pi * dist)
    return complex(gain) if gain.ndim == 0 else gain


@dataclass(frozen=True, eq=False)
class RisConfiguration:
    """Tensão aplicada a cada célula, em ordem row-major."""
    voltages: np.ndarray

    def __post_init__(self):
        volts = np.array(self.voltages, dtype=float).reshape(-1)
        volts.setflags(write=False)
        object.__setattr__(self, 'voltages', volts)

    @classmethod
    def constant(cls, ris: RisArray, voltage: float):
        return cls(np.full(ris.cell_count, float(voltage)))

    def validate(self, ris: RisArray, model: CellResponseModel):
        if self.voltages.size != ris.cell_count:
            raise GeometryError(
                f"configuração com {self.voltages.size} tensões para {ris.cell_count} células")
        model.amplitude_db(self.voltages)
        return self

    def reflection(self, ris: RisArray, model: CellResponseModel):
        self.validate(ris, model)
        return np.asarray(model.reflection_coefficient(self.voltages))


def warn_domain(scenario, src, dst, domain, label):
    if domain is None:
        return
    report = deflection_report(scenario, src, dst, domain)
    if not report.all_in_domain:
        warn(M.PROPAGATION, 'DOMAIN', "Células fora do domínio angular do modelo",
             trecho=label, celulas=f"{report.outside_count}/{len(report.in_domain)}",
             limite=f"{domain.max_deflection_deg:g}deg")


def cascade_terms(ris: RisArray, model: CellResponseModel, config: RisConfiguration, src, dst,
                  wavelength):
    """Parcelas por célula de src -> célula m -> dst (sem o campo da fonte)."""
    reflection = config.reflection(ris, model)
    d1, d2 = path_lengths(ris, src, dst)
    return free_space_gain(d1, wavelength) * reflection * free_space_gain(d2, wavelength)


def cascade_gain(ris, model, config, src, dst, wavelength, cells=None):
    terms = cascade_terms(ris, model, config, src, dst, wavelength)
    if cells is not None:
        terms = terms[np.asarray(cells)]
    return complex(np.sum(terms))


def direct_gain(src, dst, wavelength):
    d = float(np.linalg.norm(as_point(dst) - as_point(src)))
    if d <= SINGULAR_DISTANCE:
        raise SingularityError("ponto de observação coincide com a fonte")
    return free_space_gain(d, wavelength)


def cell_contributions(e_source, scenario: ScenarioGeometry, model, config, observation):
    """Parcelas por célula do campo espalhado no ponto de observação, array (M,)."""
    return complex(e_source) * cascade_terms(scenario.ris, model, config, scenario.source,
                                             observation, scenario.wavelength)


def scattered_field(e_source, scenario: ScenarioGeometry, model: CellResponseModel,
                    config: RisConfiguration, observation, cells=None,
                    domain: AngularDomain = None):
    """Campo espalhado pela RIS no ponto de observação.

    `cells` restringe a soma a um subconjunto de células; `domain` ativa o aviso de domínio.
    """
    warn_domain(scenario, scenario.source, observation, domain, "fonte->observação")
    return complex(e_source) * cascade_gain(scenario.ris, model, config, scenario.source,
                                            observation, scenario.wavelength, cells=cells)


def total_field(e_source, scenario, model, config, observation, include_direct=True,
                domain: AngularDomain = None):
    field = scattered_field(e_source, scenario, model, config, observation, domain=domain)
    if include_direct:
        field += complex(e_source) * direct_gain(scenario.source, observation,
                                                 scenario.wavelength)
    return field


# ============================================
# MAPAS DE CAMPO
# ============================================

@dataclass(frozen=True)
class GridSpec:
    """Plano de observação: nó (i, j) em origin + i*du*axis_u + j*dv*axis_v."""
    origin: Vec3
    axis_u: Vec3
    axis_v: Vec3
    nu: int
    nv: int
    du: float
    dv: float

    def __post_init__(self):
        u = self.axis_u.as_array()
        v = self.axis_v.as_array()
        if abs(np.linalg.norm(u) - 1) > 1e-9 or abs(np.linalg.norm(v) - 1) > 1e-9:
            raise GeometryError("axis_u e axis_v devem ser unitários")
        if abs(float(u @ v)) > 1e-9:
            raise GeometryError("axis_u deve ser ortogonal a axis_v")
        if int(self.nu) < 1 or int(self.nv) < 1:
            raise GeometryError(f"grade inválida {self.nu}x{self.nv}")
        if (self.nu > 1 and not self.du > 0) or (self.nv > 1 and not self.dv > 0):
            raise GeometryError("du e dv devem ser > 0")

    @classmethod
    def facing(cls, center, direction, width_u, width_v, nu, nv, reference=None):
        """Plano centrado em `center`, perpendicular a `direction`.

        axis_u = reference x direction (normalizado); com a normal da RIS como referência,
        axis_u fica paralelo ao plano da RIS.
        """
        n = np.asarray(as_point(direction))
        n = n / np.linalg.norm(n)
        ref = np.array([0.0, 0.0, 1.0]) if reference is None else as_point(reference)
        axis_u = np.cross(ref, n)
        if np.linalg.norm(axis_u) < 1e-9:
            axis_u = np.cross([0.0, 1.0, 0.0], n) if abs(n[1]) < 0.9 else np.cross([1.0, 0, 0], n)
        axis_u = axis_u / np.linalg.norm(axis_u)
        axis_v = np.cross(n, axis_u)
        du = width_u / (nu - 1) if nu > 1 else 0.0
        dv = width_v / (nv - 1) if nv > 1 else 0.0
        origin = (as_point(center) - 0.5 * (nu - 1) * du * axis_u
                  - 0.5 * (nv - 1) * dv * axis_v)
        return cls(Vec3.of(origin), Vec3.of(axis_u), Vec3.of(axis_v), int(nu), int(nv),
                   float(du), float(dv))

    def row_positions(self, i):
        """Posições dos nós da linha i, array (nv, 3)."""
        j = np.arange(self.nv)
        return (self.origin.as_array() + i * self.du * self.axis_u.as_array()
                + j[:, None] * self.dv * self.axis_v.as_array())

    def node_position(self, i, j):
        return Vec3.of(self.row_positions(i)[j])

    def corners(self):
        return np.array([self.row_positions(i)[j]
                         for i in (0, self.nu - 1) for j in (0, self.nv - 1)])


class FieldPeak(NamedTuple):
    u_index: int
    v_index: int
    position: Vec3
    magnitude: float


@dataclass(frozen=True, eq=False)
class FieldMapGrid:
    grid: GridSpec
    values: np.ndarray

    @property
    def origin(self):
        return self.grid.origin

    @property
    def nu(self):
        return self.grid.nu

    @property
    def nv(self):
        return self.grid.nv

    def magnitude(self):
        return np.abs(self.values)

    def magnitude_db(self):
        return 20.0 * np.log10(np.maximum(np.abs(self.values), 1e-300))

    def argmax(self):
        mag = self.magnitude()
        i, j = np.unravel_index(int(np.argmax(mag)), mag.shape)
        return FieldPeak(int(i), int(j), self.grid.node_position(i, j), float(mag[i, j]))


def _check_grid_singularities(scenario, grid, include_direct):
    singular = []
    src = scenario.source.as_array()
    for i in range(grid.nu):
        pts = grid.row_positions(i)
        near_cell = distances_to(scenario.ris, pts).min(axis=1) <= SINGULAR_DISTANCE
        near_src = np.linalg.norm(pts - src, axis=1) <= SINGULAR_DISTANCE
        bad = near_cell | near_src if include_direct else near_cell
        singular.extend((i, int(j)) for j in np.flatnonzero(bad))
    if singular:
        raise SingularityError("nós da grade coincidem com células ou com a fonte", singular)


def field_map(e_source, scenario: ScenarioGeometry, model: CellResponseModel,
              config: RisConfiguration, grid: GridSpec, include_direct=True,
              domain: AngularDomain = None, processor: BatchProcessor = None):
    """Campo (total ou só espalhado) em todos os nós da grade, linha a linha."""
    start = time.time()
    fieldmap_log.map_started(grid.nu, grid.nv, include_direct)
    _check_grid_singularities(scenario, grid, include_direct)

    ris = scenario.ris
    wavelength = scenario.wavelength
    d_source = np.linalg.norm(ris.centers - scenario.source.as_array(), axis=1)
    weights = (complex(e_source) * free_space_gain(d_source, wavelength)
               * config.reflection(ris, model))
    src = scenario.source.as_array()

    def _row(i):
        pts = grid.row_positions(i)
        d_obs = distances_to(ris, pts)
        row = np.sum(free_space_gain(d_obs, wavelength) * weights[None, :], axis=1)
        if include_direct:
            row = row + complex(e_source) * free_space_gain(np.linalg.norm(pts - src, axis=1),
                                                            wavelength)
        return row

    processor = processor or BatchProcessor(module=M.FIELDMAP, label="linhas")
    rows = processor.run([(i, _row, (i,)) for i in range(grid.nu)])
    values = np.stack([rows[i] for i in range(grid.nu)])

    if domain is not None:
        outside = 0
        for i in range(grid.nu):
            pts = grid.row_positions(i)
            outside += sum(not deflection_report(scenario, scenario.source, p, domain).all_in_domain
                           for p in pts)
        if outside:
            fieldmap_log.domain_warning(outside, grid.nu * grid.nv, domain.max_deflection_deg)

    result = FieldMapGrid(grid, values)
    fieldmap_log.map_completed(grid.nu, grid.nv, float(result.magnitude_db().max()),
                               time.time() - start)
    return result
