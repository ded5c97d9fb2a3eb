"""
Config - Configuração do simulador
Variáveis de ambiente (carregadas do .env) para o processo e um arquivo JSON versionado
(schema_version = 1) para cada experimento. Ângulos em graus, comprimentos em metros,
potências em dB.

Pontos (source, tag, reader, alvos) aceitam [x, y, z] ou
{"distance": d, "deflection_deg": t, "azimuth_deg": a} relativos ao centro da RIS.
"""

import json
import os
from dataclasses import dataclass, field, replace
from typing import Optional

from dotenv import load_dotenv

from ambc_link import BaselineMode, BerMethod, TagModel
from cell_model import AngularDomain, default_model, load_table_file
from codebook import (
    PhaseConvention, arc_targets, explicit_targets, line_targets, psi_grid,
)
from errors import ConfigError, RisError
from geometry import DEFAULT_PITCH, DEFAULT_WAVELENGTH, RisArray, ScenarioGeometry, Vec3
from propagation import GridSpec
from ris_logger import M, info

load_dotenv()


class Config:
    MAX_WORKERS = int(os.environ.get('RIS_MAX_WORKERS', '5'))
    LOG_LEVEL = os.environ.get('RIS_LOG_LEVEL', 'INFO')
    OUTPUT_DIR = os.environ.get('RIS_OUTPUT_DIR', 'output')
    DEFAULT_SEED = int(os.environ.get('RIS_DEFAULT_SEED', '0'))


SCHEMA_VERSION = 1

# Valores padrão de cada seção; o arquivo JSON só precisa trazer o que muda
DEFAULTS = {
    'scenario': {
        'wavelength': DEFAULT_WAVELENGTH,
        'source': {'distance': 2.0, 'deflection_deg': 0.0, 'azimuth_deg': 0.0},
        'tag': {'distance': 1.5, 'deflection_deg': 20.0, 'azimuth_deg': 45.0},
        'reader': {'distance': 1.2, 'deflection_deg': 25.0, 'azimuth_deg': 180.0},
    },
    'ris': {
        'rows': 14, 'cols': 14, 'pitch': DEFAULT_PITCH,
        'center': [0.0, 0.0, 0.0], 'normal': [0.0, 0.0, 1.0], 'row_axis': [1.0, 0.0, 0.0],
        'max_deflection_deg': 40.0,
    },
    'cell': {'table': None, 'g0': 1.0, 'grid_step_v': 0.1},
    'codebook': {
        'psi_step_deg': 10.0,
        'psi_values': None,
        'convention': PhaseConvention.ALIGNED.value,
        'targets': {
            'layout': 'arc', 'count': 51, 'distance': 1.5,
            'deflection_start_deg': 5.0, 'deflection_end_deg': 30.0, 'azimuth_deg': 45.0,
            'first_index': 1,
        },
    },
    'fieldmap': {
        'target': 'tag', 'psi_deg': None, 'index_p': None, 'voltages': None,
        'width_u': 1.0, 'width_v': 1.0, 'nu': 101, 'nv': 101,
        'include_direct': False, 'absorbing': False, 'e_source': 1.0,
    },
    'link': {
        'gamma_backscatter': [-1.0, 0.0], 'gamma_transparent': [0.0, 0.0],
        'include_ris_at_reader': True, 'e_source': 1.0,
    },
    'ber_sweep': {
        'es_over_n0_db': 95.0, 'method': BerMethod.CLOSED_FORM.value, 'trials': 100000,
        'baseline': BaselineMode.REFERENCE.value, 'codebook': None, 'top_maps': 0,
    },
    'output': {'dir': None},
}


# ============================================
# SEÇÕES TIPADAS
# ============================================

@dataclass(frozen=True)
class CodebookSettings:
    targets: tuple
    psi_values: tuple
    convention: PhaseConvention = PhaseConvention.ALIGNED


@dataclass(frozen=True)
class FieldMapSettings:
    target: Vec3
    psi_deg: Optional[float] = None
    index_p: Optional[int] = None
    voltages: Optional[tuple] = None
    width_u: float = 1.0
    width_v: float = 1.0
    nu: int = 101
    nv: int = 101
    include_direct: bool = False
    absorbing: bool = False
    e_source: complex = 1.0


@dataclass(frozen=True)
class LinkSettings:
    tag: TagModel = field(default_factory=TagModel)
    include_ris_at_reader: bool = True
    e_source: complex = 1.0


@dataclass(frozen=True)
class SweepSettings:
    es_over_n0_db: float = 95.0
    method: BerMethod = BerMethod.CLOSED_FORM
    trials: int = 100000
    baseline: BaselineMode = BaselineMode.REFERENCE
    codebook_path: Optional[str] = None
    top_maps: int = 0


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioGeometry
    domain: AngularDomain
    codebook: CodebookSettings
    fieldmap: FieldMapSettings
    link: LinkSettings
    sweep: SweepSettings
    table_path: Optional[str] = None
    g0: float = 1.0
    grid_step_v: float = 0.1
    output_dir: str = Config.OUTPUT_DIR
    seed: int = Config.DEFAULT_SEED
    source_path: Optional[str] = None

    def with_overrides(self, seed=None, output_dir=None, table_path=None):
        """Aplica as flags da linha de comando (--seed, --out, --table)."""
        changes = {}
        if seed is not None:
            if int(seed) < 0:
                raise ConfigError("seed deve ser >= 0", key='--seed')
            changes['seed'] = int(seed)
        if output_dir is not None:
            changes['output_dir'] = str(output_dir)
        if table_path is not None:
            _check_file(table_path, '--table')
            changes['table_path'] = str(table_path)
        return replace(self, **changes) if changes else self

    def build_model(self):
        if self.table_path:
            return load_table_file(self.table_path, g0=self.g0)
        return default_model(g0=self.g0)

    def ensure_output_dir(self):
        os.makedirs(self.output_dir, exist_ok=True)
        return self.output_dir

    def output_path(self, name):
        return os.path.join(self.output_dir, name)


# ============================================
# PARSING
# ============================================

def _merge(defaults, data, path):
    if data is None:
        return dict(defaults)
    if not isinstance(data, dict):
        raise ConfigError("esperado um objeto", key=path)
    merged = dict(defaults)
    for key, value in data.items():
        if key not in defaults:
            raise ConfigError("chave desconhecida", key=f"{path}.{key}")
        if isinstance(defaults[key], dict) and key != 'targets' and value is not None \
                and not _is_point_spec(defaults[key]):
            merged[key] = _merge(defaults[key], value, f"{path}.{key}")
        else:
            merged[key] = value
    return merged


def _is_point_spec(value):
    return isinstance(value, dict) and 'distance' in value


def _number(section, key, path, minimum=None, maximum=None, strict=False, integer=False):
    value = section.get(key)
    full = f"{path}.{key}"
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"esperado número, recebido {value!r}", key=full)
    if integer and int(value) != value:
        raise ConfigError(f"esperado inteiro, recebido {value!r}", key=full)
    if minimum is not None and (value <= minimum if strict else value < minimum):
        raise ConfigError(f"valor {value} abaixo do mínimo {minimum}", key=full)
    if maximum is not None and value > maximum:
        raise ConfigError(f"valor {value} acima do máximo {maximum}", key=full)
    return int(value) if integer else float(value)


def _bool(section, key, path):
    value = section.get(key)
    if not isinstance(value, bool):
        raise ConfigError(f"esperado true/false, recebido {value!r}", key=f"{path}.{key}")
    return value


def _complex(value, key):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        re_part, im_part = (_number({'v': v}, 'v', key) for v in value)
        return complex(re_part, im_part)
    raise ConfigError(f"esperado número ou [re, im], recebido {value!r}", key=key)


def _enum(enum_cls, value, key):
    try:
        return enum_cls(value)
    except ValueError:
        options = ', '.join(e.value for e in enum_cls)
        raise ConfigError(f"valor {value!r} inválido (opções: {options})", key=key) from None


def _vector(value, key):
    try:
        return Vec3.of(value)
    except (RisError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc), key=key) from exc


def _point(value, ris, key):
    if isinstance(value, dict):
        spec = {'deflection_deg': 0.0, 'azimuth_deg': 0.0, **value}
        unknown = set(spec) - {'distance', 'deflection_deg', 'azimuth_deg'}
        if unknown:
            raise ConfigError(f"chaves desconhecidas {sorted(unknown)}", key=key)
        distance = _number(spec, 'distance', key, minimum=0.0, strict=True)
        return ris.local_point(distance, _number(spec, 'deflection_deg', key),
                               _number(spec, 'azimuth_deg', key))
    return _vector(value, key)


def _check_file(path, key):
    if not os.path.isfile(str(path)):
        raise ConfigError(f"arquivo não encontrado: {path}", key=key)


def _build_ris(section):
    try:
        return RisArray(
            rows=_number(section, 'rows', 'ris', minimum=1, integer=True),
            cols=_number(section, 'cols', 'ris', minimum=1, integer=True),
            pitch=_number(section, 'pitch', 'ris', minimum=0.0, strict=True),
            center=_vector(section['center'], 'ris.center'),
            normal=_vector(section['normal'], 'ris.normal'),
            row_axis=_vector(section['row_axis'], 'ris.row_axis'),
        )
    except ConfigError:
        raise
    except RisError as exc:
        raise ConfigError(str(exc), key='ris') from exc


def _build_scenario(section, ris):
    wavelength = _number(section, 'wavelength', 'scenario', minimum=0.0, strict=True)
    points = {name: _point(section[name], ris, f"scenario.{name}")
              for name in ('source', 'tag', 'reader')}
    try:
        return ScenarioGeometry(ris=ris, wavelength=wavelength, **points)
    except RisError as exc:
        raise ConfigError(str(exc), key='scenario') from exc


def _build_targets(section, ris, scenario):
    key = 'codebook.targets'
    if not isinstance(section, dict):
        raise ConfigError("esperado um objeto", key=key)
    layout = section.get('layout', 'arc')
    spec = {**DEFAULTS['codebook']['targets'], **section} if layout == 'arc' else section
    first = _number(spec, 'first_index', key, minimum=0, integer=True) \
        if 'first_index' in spec else 1
    try:
        if layout == 'arc':
            return arc_targets(ris, _number(spec, 'distance', key, minimum=0.0, strict=True),
                               _number(spec, 'deflection_start_deg', key),
                               _number(spec, 'deflection_end_deg', key),
                               _number(spec, 'count', key, minimum=1, integer=True),
                               _number(spec, 'azimuth_deg', key), first_index=first)
        if layout == 'line':
            return line_targets(_point(spec.get('start'), ris, f"{key}.start"),
                                _point(spec.get('end'), ris, f"{key}.end"),
                                _number(spec, 'count', key, minimum=1, integer=True),
                                first_index=first)
        if layout == 'explicit':
            positions = spec.get('positions') or []
            return explicit_targets([_point(p, ris, f"{key}.positions[{i}]")
                                     for i, p in enumerate(positions)], first_index=first)
        if layout == 'tag':
            return explicit_targets([scenario.tag], first_index=first)
    except ConfigError:
        raise
    except RisError as exc:
        raise ConfigError(str(exc), key=key) from exc
    raise ConfigError(f"layout {layout!r} inválido (arc, line, explicit, tag)",
                      key=f"{key}.layout")


def _build_codebook_settings(section, ris, scenario):
    targets = _build_targets(section['targets'], ris, scenario)
    if section.get('psi_values') is not None:
        values = section['psi_values']
        if not isinstance(values, list) or not values:
            raise ConfigError("esperada lista não vazia", key='codebook.psi_values')
        psi_values = tuple(_number({'psi': v}, 'psi', 'codebook.psi_values') for v in values)
    else:
        step = _number(section, 'psi_step_deg', 'codebook', minimum=0.0, strict=True)
        psi_values = tuple(psi_grid(step))
    convention = _enum(PhaseConvention, section['convention'], 'codebook.convention')
    return CodebookSettings(tuple(targets), psi_values, convention)


def _build_fieldmap_settings(section, ris, scenario):
    path = 'fieldmap'
    target = scenario.tag if section['target'] == 'tag' else \
        _point(section['target'], ris, 'fieldmap.target')
    voltages = section.get('voltages')
    if voltages is not None:
        if not isinstance(voltages, list) or len(voltages) != ris.cell_count:
            raise ConfigError(f"esperadas {ris.cell_count} tensões", key='fieldmap.voltages')
        voltages = tuple(_number({'v': v}, 'v', 'fieldmap.voltages') for v in voltages)
    psi = section.get('psi_deg')
    index_p = section.get('index_p')
    return FieldMapSettings(
        target=target,
        psi_deg=None if psi is None else _number(section, 'psi_deg', path),
        index_p=None if index_p is None else _number(section, 'index_p', path, minimum=0,
                                                     integer=True),
        voltages=voltages,
        width_u=_number(section, 'width_u', path, minimum=0.0),
        width_v=_number(section, 'width_v', path, minimum=0.0),
        nu=_number(section, 'nu', path, minimum=1, integer=True),
        nv=_number(section, 'nv', path, minimum=1, integer=True),
        include_direct=_bool(section, 'include_direct', path),
        absorbing=_bool(section, 'absorbing', path),
        e_source=_complex(section['e_source'], 'fieldmap.e_source'),
    )


def _build_link_settings(section):
    try:
        tag = TagModel(_complex(section['gamma_backscatter'], 'link.gamma_backscatter'),
                       _complex(section['gamma_transparent'], 'link.gamma_transparent'))
    except ConfigError:
        raise
    except RisError as exc:
        raise ConfigError(str(exc), key='link') from exc
    return LinkSettings(tag, _bool(section, 'include_ris_at_reader', 'link'),
                        _complex(section['e_source'], 'link.e_source'))


def _build_sweep_settings(section, base_dir):
    path = 'ber_sweep'
    codebook_path = section.get('codebook')
    if codebook_path is not None:
        codebook_path = _resolve(codebook_path, base_dir)
        _check_file(codebook_path, 'ber_sweep.codebook')
    return SweepSettings(
        es_over_n0_db=_number(section, 'es_over_n0_db', path),
        method=_enum(BerMethod, section['method'], 'ber_sweep.method'),
        trials=_number(section, 'trials', path, minimum=1, integer=True),
        baseline=_enum(BaselineMode, section['baseline'], 'ber_sweep.baseline'),
        codebook_path=codebook_path,
        top_maps=_number(section, 'top_maps', path, minimum=0, integer=True),
    )


def _resolve(path, base_dir):
    if path is None or os.path.isabs(path) or base_dir is None:
        return path
    return os.path.join(base_dir, path)


def parse_run_config(data, base_dir=None, source_path=None):
    """Constrói um RunConfig a partir do dicionário já lido do JSON."""
    if not isinstance(data, dict):
        raise ConfigError("a raiz da configuração deve ser um objeto")
    version = data.get('schema_version', SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"versão {version!r} não suportada (esperado {SCHEMA_VERSION})",
                          key='schema_version')
    unknown = set(data) - set(DEFAULTS) - {'schema_version'}
    if unknown:
        raise ConfigError("seção desconhecida", key=sorted(unknown)[0])

    sections = {name: _merge(DEFAULTS[name], data.get(name), name) for name in DEFAULTS}

    ris = _build_ris(sections['ris'])
    try:
        domain = AngularDomain(_number(sections['ris'], 'max_deflection_deg', 'ris'))
    except RisError as exc:
        raise ConfigError(str(exc), key='ris.max_deflection_deg') from exc
    scenario = _build_scenario(sections['scenario'], ris)

    cell = sections['cell']
    table_path = _resolve(cell.get('table'), base_dir)
    if table_path is not None:
        _check_file(table_path, 'cell.table')
    output_dir = sections['output'].get('dir') or Config.OUTPUT_DIR

    return RunConfig(
        scenario=scenario,
        domain=domain,
        codebook=_build_codebook_settings(sections['codebook'], ris, scenario),
        fieldmap=_build_fieldmap_settings(sections['fieldmap'], ris, scenario),
        link=_build_link_settings(sections['link']),
        sweep=_build_sweep_settings(sections['ber_sweep'], base_dir),
        table_path=table_path,
        g0=_number(cell, 'g0', 'cell', minimum=0.0),
        grid_step_v=_number(cell, 'grid_step_v', 'cell', minimum=0.0, strict=True),
        output_dir=str(output_dir),
        seed=Config.DEFAULT_SEED,
        source_path=source_path,
    )


def load_run_config(path=None):
    """Lê o JSON do experimento; sem caminho, usa só os valores padrão."""
    if path is None:
        return parse_run_config({})
    _check_file(path, '--config')
    try:
        with open(path, 'r', encoding='utf-8') as handle:
            data = json.load(handle)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"JSON inválido: {exc.msg} (linha {exc.lineno})", key=str(path)) from exc
    run = parse_run_config(data, base_dir=os.path.dirname(os.path.abspath(path)),
                           source_path=str(path))
    info(M.CONFIG, 'DATA', "Configuração carregada", arquivo=os.path.basename(str(path)))
    return run


def build_grid(run: RunConfig, center=None) -> GridSpec:
    """Plano de observação do mapa de campo, centrado no alvo e voltado para a RIS.

    Rejeita grades que cruzam ou tocam o plano da RIS.
    """
    ris = run.scenario.ris
    settings = run.fieldmap
    center = Vec3.of(center if center is not None else settings.target)
    direction = center - ris.center
    try:
        grid = GridSpec.facing(center, direction, settings.width_u, settings.width_v,
                               settings.nu, settings.nv, reference=ris.normal)
    except RisError as exc:
        raise ConfigError(str(exc), key='fieldmap') from exc
    if min(ris.front_distance(c) for c in grid.corners()) <= 0:
        raise ConfigError("a grade do mapa de campo cruza o plano da RIS", key='fieldmap')
    return grid
