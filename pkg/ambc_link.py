"""
AmBC Link - Enlace de retroespalhamento ambiente assistido pela RIS
Tag com dois estados (transparente / retroespalhando), hipóteses no leitor, BER em forma fechada
e por Monte Carlo, e a varredura (index_p x psi) sobre um codebook.

Modelo de hipóteses:
    E_tag  = campo total na tag (direto + via RIS)
    E_fwd  = campo total no leitor sem a tag
    G      = ganho tag -> leitor (direto + tag -> RIS -> leitor), tag como fonte isotrópica
    h_s    = E_fwd + Gamma_s * E_tag * G
Uma única interação com a RIS por trecho; sem laços RIS <-> tag.

Ruído: N0 = 1, Es = 10^(Es/N0 [dB] / 10). Como os ganhos do enlace são da ordem de -90 dB,
os valores úteis de Es/N0 ficam em torno de 90 a 100 dB.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Optional

import numpy as np
from scipy.special import erfc

from batch_processor import BatchProcessor, TaskFailure
from cell_model import AngularDomain, CellResponseModel
from errors import CodebookError, RisError, SingularityError
from geometry import SINGULAR_DISTANCE, ScenarioGeometry
from propagation import RisConfiguration, cascade_gain, direct_gain, total_field, warn_domain
from ris_logger import M, debug, sweep_log

MC_CHUNK = 1 << 16


@dataclass(frozen=True)
class TagModel:
    """Estado 0: antena aberta (transparente). Estado 1: antena em curto (retroespalha)."""
    gamma_backscatter: complex = -1.0 + 0.0j
    gamma_transparent: complex = 0.0 + 0.0j

    def __post_init__(self):
        for name in ('gamma_backscatter', 'gamma_transparent'):
            gamma = complex(getattr(self, name))
            if not np.isfinite(gamma) or abs(gamma) > 1.0 + 1e-12:
                raise RisError(f"{name} deve ter módulo <= 1, recebido {gamma}")
            object.__setattr__(self, name, gamma)

    @property
    def gammas(self):
        """(Gamma_0, Gamma_1) na ordem dos bits."""
        return self.gamma_transparent, self.gamma_backscatter

    def swapped(self):
        return TagModel(self.gamma_transparent, self.gamma_backscatter)


class LinkHypotheses(NamedTuple):
    h0: complex
    h1: complex
    e_tag: complex = complex('nan')
    e_fwd: complex = complex('nan')
    g_tag_reader: complex = complex('nan')

    @property
    def distance(self):
        return abs(self.h1 - self.h0)


class BerMethod(str, Enum):
    CLOSED_FORM = 'closed_form'
    MONTE_CARLO = 'monte_carlo'


class BaselineMode(str, Enum):
    """REFERENCE: todas as células em v_max (5 V). ABSORBING: RIS sem reflexão (g0 = 0)."""
    REFERENCE = 'reference'
    ABSORBING = 'absorbing'


@dataclass(frozen=True)
class BerResult:
    ber: float
    method: BerMethod
    trials: int = 0
    seed: int = 0
    errors: int = 0

    def __post_init__(self):
        if not 0.0 <= self.ber <= 1.0:
            raise RisError(f"BER fora de [0, 1]: {self.ber}")


def _check_distinct(scenario: ScenarioGeometry):
    points = {'source': scenario.source, 'tag': scenario.tag, 'reader': scenario.reader}
    names = list(points)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            if (points[a] - points[b]).norm() <= SINGULAR_DISTANCE:
                raise SingularityError(f"{a} e {b} coincidem")


def hypothesis_fields(scenario: ScenarioGeometry, model: CellResponseModel,
                      config: RisConfiguration, tag: TagModel = None, e_source=1.0,
                      include_ris_at_reader=True, domain: AngularDomain = None) -> LinkHypotheses:
    """Ganhos ponta a ponta no leitor para os dois estados da tag.

    Com include_ris_at_reader=False o leitor não recebe nada espalhado pela RIS (nem da fonte
    nem da tag); a RIS continua atuando sobre o campo que ilumina a tag.
    """
    tag = tag or TagModel()
    _check_distinct(scenario)
    wavelength = scenario.wavelength

    e_tag = total_field(e_source, scenario, model, config, scenario.tag, include_direct=True,
                        domain=domain)
    e_fwd = total_field(e_source, scenario, model, config, scenario.reader,
                        include_direct=True, domain=domain) if include_ris_at_reader else \
        complex(e_source) * direct_gain(scenario.source, scenario.reader, wavelength)

    g_tag_reader = direct_gain(scenario.tag, scenario.reader, wavelength)
    if include_ris_at_reader:
        warn_domain(scenario, scenario.tag, scenario.reader, domain, "tag->leitor")
        g_tag_reader += cascade_gain(scenario.ris, model, config, scenario.tag, scenario.reader,
                                     wavelength)

    gamma0, gamma1 = tag.gammas
    h0 = e_fwd + gamma0 * e_tag * g_tag_reader
    h1 = e_fwd + gamma1 * e_tag * g_tag_reader
    return LinkHypotheses(complex(h0), complex(h1), complex(e_tag), complex(e_fwd),
                          complex(g_tag_reader))


# ============================================
# BER
# ============================================

def _es(es_over_n0_db):
    return 10.0 ** (float(es_over_n0_db) / 10.0)


def q_function(x):
    """Cauda da normal padrão, Q(x) = erfc(x / sqrt(2)) / 2."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))


def ber_closed_form(h: LinkHypotheses, es_over_n0_db) -> BerResult:
    """Detecção coerente de distância mínima, símbolos equiprováveis, AWGN com N0 = 1."""
    x = h.distance * np.sqrt(_es(es_over_n0_db) / 2.0)
    return BerResult(float(q_function(x)), BerMethod.CLOSED_FORM)


def ber_monte_carlo(h: LinkHypotheses, es_over_n0_db, trials: int, seed: int = 0,
                    chunk: int = MC_CHUNK) -> BerResult:
    """Simula `trials` bits; empates na decisão ficam com o bit 0."""
    if int(trials) < 1:
        raise RisError(f"trials deve ser >= 1, recebido {trials}")
    trials = int(trials)
    rng = np.random.default_rng(seed)
    amplitude = np.sqrt(_es(es_over_n0_db))
    s0 = complex(h.h0) * amplitude
    s1 = complex(h.h1) * amplitude
    sigma = np.sqrt(0.5)

    errors = 0
    remaining = trials
    while remaining > 0:
        n = min(chunk, remaining)
        bits = rng.integers(0, 2, size=n)
        noise = sigma * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
        received = np.where(bits == 1, s1, s0) + noise
        decided = (np.abs(received - s1) < np.abs(received - s0)).astype(int)
        errors += int(np.count_nonzero(decided != bits))
        remaining -= n
    return BerResult(errors / trials, BerMethod.MONTE_CARLO, trials, int(seed), errors)


def entry_seed(seed: int, index_p: int, psi_deg: float) -> int:
    """Semente por entrada derivada de (seed, index_p, psi mod 360)."""
    psi_millis = int(round(float(np.mod(psi_deg, 360.0)) * 1000.0)) % 360000
    sequence = np.random.SeedSequence([int(seed), int(index_p), psi_millis])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def evaluate_ber(h: LinkHypotheses, es_over_n0_db, method=BerMethod.CLOSED_FORM, trials=0,
                 seed=0) -> BerResult:
    if BerMethod(method) is BerMethod.MONTE_CARLO:
        return ber_monte_carlo(h, es_over_n0_db, trials, seed)
    return ber_closed_form(h, es_over_n0_db)


# ============================================
# VARREDURA
# ============================================

class SweepRecord(NamedTuple):
    index_p: int
    psi_deg: float
    ber: float


@dataclass(frozen=True, eq=False)
class BerSweepResult:
    """Matriz de BER com linhas = index_p e colunas = psi (NaN onde a entrada falhou)."""
    index_values: tuple
    psi_values: tuple
    matrix: np.ndarray
    baseline_ber: float
    records: tuple
    errors: dict = field(default_factory=dict)
    method: BerMethod = BerMethod.CLOSED_FORM
    es_over_n0_db: float = 0.0
    baseline_mode: BaselineMode = BaselineMode.REFERENCE

    def ber_at(self, index_p, psi_deg):
        i = self.index_values.index(int(index_p))
        j = self.psi_values.index(float(psi_deg))
        return float(self.matrix[i, j])

    def top(self, k=3):
        """As k melhores entradas (menor BER), empates na ordem do codebook."""
        valid = [r for r in self.records if np.isfinite(r.ber)]
        return sorted(valid, key=lambda r: r.ber)[:int(k)]

    def best(self) -> Optional[SweepRecord]:
        best = self.top(1)
        return best[0] if best else None

    def improving(self):
        """Entradas com BER abaixo da referência."""
        return [r for r in self.records if np.isfinite(r.ber) and r.ber < self.baseline_ber]


def baseline_setup(scenario: ScenarioGeometry, model: CellResponseModel,
                   mode=BaselineMode.REFERENCE):
    """(modelo, configuração) da RIS de referência."""
    config = RisConfiguration.constant(scenario.ris, model.v_max)
    if BaselineMode(mode) is BaselineMode.ABSORBING:
        return model.with_gain(0.0), config
    return model, config


def ber_sweep(scenario: ScenarioGeometry, model: CellResponseModel, codebook, tag: TagModel = None,
              es_over_n0_db=95.0, method=BerMethod.CLOSED_FORM, trials=100_000, seed=0,
              baseline=BaselineMode.REFERENCE, include_ris_at_reader=True, e_source=1.0,
              processor: BatchProcessor = None, domain: AngularDomain = None) -> BerSweepResult:
    """BER de cada entrada do codebook e da RIS de referência.

    Com `domain`, os trechos fora do domínio angular do modelo geram aviso (uma vez por varredura).

    Falhas por entrada ficam registradas em `errors` e viram NaN na matriz.
    """
    entries = list(codebook)
    if not entries:
        raise CodebookError("codebook vazio")
    tag = tag or TagModel()
    method = BerMethod(method)
    baseline = BaselineMode(baseline)
    if int(seed) < 0:
        raise RisError(f"seed deve ser >= 0, recebido {seed}")

    start = time.time()
    sweep_log.sweep_started(len(entries), method.value, es_over_n0_db)

    base_model, base_config = baseline_setup(scenario, model, baseline)
    h_base = hypothesis_fields(scenario, base_model, base_config, tag, e_source,
                               include_ris_at_reader, domain=domain)
    baseline_ber = evaluate_ber(h_base, es_over_n0_db, method, trials,
                                int(np.random.SeedSequence([int(seed)])
                                    .generate_state(1, dtype=np.uint64)[0])).ber
    sweep_log.baseline(baseline_ber, baseline.value)

    def _entry_ber(entry):
        h = hypothesis_fields(scenario, model, entry.configuration(), tag, e_source,
                              include_ris_at_reader)
        return evaluate_ber(h, es_over_n0_db, method, trials,
                            entry_seed(seed, entry.index_p, entry.psi_deg)).ber

    processor = processor or BatchProcessor(module=M.SWEEP, label="entradas")
    results = processor.run([(entry.key, _entry_ber, (entry,)) for entry in entries],
                            collect_errors=True)

    index_values = tuple(dict.fromkeys(int(e.index_p) for e in entries))
    psi_values = tuple(dict.fromkeys(float(e.psi_deg) for e in entries))
    row_of = {p: i for i, p in enumerate(index_values)}
    col_of = {p: j for j, p in enumerate(psi_values)}
    matrix = np.full((len(index_values), len(psi_values)), np.nan)

    records = []
    errors = {}
    for key, value in results.items():
        if isinstance(value, TaskFailure):
            errors[key] = value.message
            sweep_log.entry_failed(key[0], key[1], value.message)
            ber = float('nan')
        else:
            ber = float(value)
            matrix[row_of[key[0]], col_of[key[1]]] = ber
        records.append(SweepRecord(key[0], key[1], ber))

    result = BerSweepResult(index_values, psi_values, matrix, float(baseline_ber),
                            tuple(records), errors, method, float(es_over_n0_db), baseline)
    best = result.best()
    sweep_log.sweep_completed(len(entries), len(errors),
                              best.ber if best else float('nan'), baseline_ber,
                              time.time() - start)
    debug(M.LINK, 'DATA', "Melhores entradas",
          top=', '.join(f"({r.index_p},{r.psi_deg:g})={r.ber:.3g}" for r in result.top(3)))
    return result
