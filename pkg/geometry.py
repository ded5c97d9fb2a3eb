"""
Geometry - Posicionamento 3-D da fonte, tag, leitor e do arranjo RIS
Centros das células, distâncias por célula e ângulos de deflexão para checar o domínio de validade.

Convenção: o índice de célula m segue ordem row-major (linha i, coluna j -> m = i*cols + j),
começando em 0. O eixo `row_axis` é a direção em que o índice de linha cresce; o eixo das
colunas é normal x row_axis.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np

from cell_model import AngularDomain
from errors import GeometryError, SingularityError

DEFAULT_WAVELENGTH = 0.055   # ~5.45 GHz, meio da banda 5.15-5.75 GHz
DEFAULT_PITCH = 0.014        # células de 14x14 mm
SINGULAR_DISTANCE = 1e-12
_AXIS_TOL = 1e-9


@dataclass(frozen=True)
class Vec3:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not np.all(np.isfinite([self.x, self.y, self.z])):
            raise GeometryError(f"componentes não finitas em Vec3({self.x}, {self.y}, {self.z})")

    @classmethod
    def of(cls, value):
        """Aceita Vec3, sequência de 3 números ou array numpy."""
        if isinstance(value, Vec3):
            return value
        arr = np.asarray(value, dtype=float).reshape(-1)
        if arr.size != 3:
            raise GeometryError(f"esperado vetor com 3 componentes, recebido {value!r}")
        return cls(float(arr[0]), float(arr[1]), float(arr[2]))

    def as_array(self):
        return np.array([self.x, self.y, self.z])

    def norm(self):
        return float(np.linalg.norm(self.as_array()))

    def unit(self):
        n = self.norm()
        if n == 0.0:
            raise GeometryError("vetor nulo não tem direção")
        return Vec3.of(self.as_array() / n)

    def __add__(self, other):
        return Vec3.of(self.as_array() + Vec3.of(other).as_array())

    def __sub__(self, other):
        return Vec3.of(self.as_array() - Vec3.of(other).as_array())

    def __mul__(self, scale):
        return Vec3.of(self.as_array() * float(scale))

    __rmul__ = __mul__

    def to_list(self):
        return [self.x, self.y, self.z]


def as_point(value):
    """Converte Vec3/sequência em array (3,)."""
    if isinstance(value, Vec3):
        return value.as_array()
    return Vec3.of(value).as_array()


@dataclass(frozen=True)
class RisArray:
    rows: int = 14
    cols: int = 14
    pitch: float = DEFAULT_PITCH
    center: Vec3 = field(default_factory=lambda: Vec3(0.0, 0.0, 0.0))
    normal: Vec3 = field(default_factory=lambda: Vec3(0.0, 0.0, 1.0))
    row_axis: Vec3 = field(default_factory=lambda: Vec3(1.0, 0.0, 0.0))

    def __post_init__(self):
        if int(self.rows) < 1 or int(self.cols) < 1:
            raise GeometryError(f"dimensões inválidas {self.rows}x{self.cols}")
        if not self.pitch > 0:
            raise GeometryError(f"pitch deve ser > 0, recebido {self.pitch}")
        n = self.normal.as_array()
        r = self.row_axis.as_array()
        if abs(np.linalg.norm(n) - 1.0) > _AXIS_TOL or abs(np.linalg.norm(r) - 1.0) > _AXIS_TOL:
            raise GeometryError("normal e row_axis devem ser unitários")
        if abs(float(np.dot(n, r))) > _AXIS_TOL:
            raise GeometryError("row_axis deve ser ortogonal à normal")

    @property
    def cell_count(self):
        return int(self.rows) * int(self.cols)

    @property
    def col_axis(self):
        return Vec3.of(np.cross(self.normal.as_array(), self.row_axis.as_array()))

    @property
    def aperture_diagonal(self):
        return self.pitch * float(np.hypot(self.rows, self.cols))

    @cached_property
    def centers(self):
        """Centros das células, array (M, 3) em ordem row-major."""
        i = np.arange(self.rows) - (self.rows - 1) / 2.0
        j = np.arange(self.cols) - (self.cols - 1) / 2.0
        ii, jj = np.meshgrid(i, j, indexing='ij')
        offsets = (ii.reshape(-1, 1) * self.row_axis.as_array()
                   + jj.reshape(-1, 1) * self.col_axis.as_array()) * self.pitch
        centers = self.center.as_array() + offsets
        centers.setflags(write=False)
        return centers

    def front_distance(self, point):
        """Distância com sinal ao plano da RIS (positiva do lado iluminado)."""
        p = np.asarray(point, dtype=float) if not isinstance(point, Vec3) else point.as_array()
        return (p - self.center.as_array()) @ self.normal.as_array()

    def local_point(self, distance, deflection_deg, azimuth_deg=0.0):
        """Ponto a `distance` do centro, a `deflection_deg` da normal e azimute medido a partir
        de row_axis em direção ao eixo das colunas."""
        theta = np.deg2rad(deflection_deg)
        phi = np.deg2rad(azimuth_deg)
        direction = (np.sin(theta) * np.cos(phi) * self.row_axis.as_array()
                     + np.sin(theta) * np.sin(phi) * self.col_axis.as_array()
                     + np.cos(theta) * self.normal.as_array())
        return Vec3.of(self.center.as_array() + distance * direction)


@dataclass(frozen=True)
class ScenarioGeometry:
    ris: RisArray
    source: Vec3
    tag: Vec3
    reader: Vec3
    wavelength: float = DEFAULT_WAVELENGTH

    def __post_init__(self):
        if not self.wavelength > 0:
            raise GeometryError(f"comprimento de onda deve ser > 0, recebido {self.wavelength}")
        for name in ('source', 'tag', 'reader'):
            if self.ris.front_distance(getattr(self, name)) <= 0:
                raise GeometryError(f"{name} não está à frente do plano da RIS")

    def to_dict(self):
        ris = self.ris
        return {
            'ris': {
                'rows': int(ris.rows), 'cols': int(ris.cols), 'pitch': float(ris.pitch),
                'center': ris.center.to_list(), 'normal': ris.normal.to_list(),
                'row_axis': ris.row_axis.to_list(),
            },
            'source': self.source.to_list(),
            'tag': self.tag.to_list(),
            'reader': self.reader.to_list(),
            'wavelength': float(self.wavelength),
        }


def default_scenario(wavelength=DEFAULT_WAVELENGTH):
    """Cenário ilustrativo: fonte a 2 m na normal, tag a 1.5 m com 20 graus de deflexão
    (azimute 45 graus), leitor a 1.2 m com 25 graus (azimute 180 graus)."""
    ris = RisArray()
    return ScenarioGeometry(
        ris=ris,
        source=ris.local_point(2.0, 0.0),
        tag=ris.local_point(1.5, 20.0, 45.0),
        reader=ris.local_point(1.2, 25.0, 180.0),
        wavelength=wavelength,
    )


# ============================================
# OPERAÇÕES DO MÓDULO
# ============================================

def cell_centers(ris: RisArray):
    return ris.centers


def distances_to(ris: RisArray, points):
    """Distâncias de cada ponto (N, 3) a cada centro de célula -> (N, M)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return np.linalg.norm(pts[:, None, :] - ris.centers[None, :, :], axis=-1)


def path_lengths(ris: RisArray, a, b):
    """Retorna (d_a_m, d_m_b), dois arrays (M,) com as distâncias a -> célula e célula -> b."""
    centers = ris.centers
    d_a = np.linalg.norm(centers - as_point(a), axis=1)
    d_b = np.linalg.norm(centers - as_point(b), axis=1)
    singular = np.flatnonzero((d_a <= SINGULAR_DISTANCE) | (d_b <= SINGULAR_DISTANCE))
    if singular.size:
        raise SingularityError("ponto coincide com o centro da(s) célula(s)", singular.tolist())
    return d_a, d_b


class DeflectionReport(NamedTuple):
    incidence_deg: np.ndarray
    departure_deg: np.ndarray
    in_domain: np.ndarray

    @property
    def all_in_domain(self):
        return bool(np.all(self.in_domain))

    @property
    def outside_count(self):
        return int(np.count_nonzero(~self.in_domain))


def _angle_from_normal(ris, point):
    vec = as_point(point) - ris.centers
    n = ris.normal.as_array()
    along = vec @ n
    across = np.linalg.norm(np.cross(vec, n), axis=1)
    return np.rad2deg(np.arctan2(across, along))


def deflection_report(scenario: ScenarioGeometry, src, dst, domain: AngularDomain = None):
    """Ângulos por célula entre (src - célula), (dst - célula) e a normal.

    in_domain exige os dois ângulos estritamente menores que o limite.
    """
    domain = domain or AngularDomain()
    incidence = _angle_from_normal(scenario.ris, src)
    departure = _angle_from_normal(scenario.ris, dst)
    in_domain = domain.contains(incidence) & domain.contains(departure)
    return DeflectionReport(incidence, departure, in_domain)


def fraunhofer_distance(ris: RisArray, wavelength: float):
    """Fronteira convencional de campo distante, 2 D^2 / lambda, com D a diagonal do arranjo."""
    return 2.0 * ris.aperture_diagonal ** 2 / wavelength


def scenario_hash(scenario: ScenarioGeometry):
    payload = json.dumps(scenario.to_dict(), sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(payload.encode('utf-8')).hexdigest()[:16]
