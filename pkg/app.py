"""
RIS AmBC Simulator - Linha de comando
Subcomandos: cell-model, codebook, fieldmap, ber-sweep, validate.

Uso:
    python app.py codebook --config scenario.example.json --out output
    python app.py ber-sweep --config scenario.example.json --seed 7

Saída 0 em sucesso; 1 com uma linha "erro: ..." em falhas do simulador ou de arquivo;
2 para erros de uso (argparse).
"""

import argparse
import sys

import numpy as np

from ambc_link import BerMethod, ber_sweep
from batch_processor import BatchProcessor
from codebook import BeamTarget, build_codebook, load_codebook, optimal_psi, save_codebook, \
    synthesize_entry
from config import Config, build_grid, load_run_config
from errors import CodebookError, RisError
from exporters import write_ber_sweep, write_cell_model, write_field_map, write_json
from geometry import deflection_report, fraunhofer_distance, scenario_hash
from propagation import RisConfiguration, field_map
from ris_logger import M, init_logging, log_error, log_operation, log_section, warn


def _processor(module, label):
    return BatchProcessor(max_workers=Config.MAX_WORKERS, module=module, label=label)


def _codebook_for(run, model):
    return build_codebook(run.scenario, model, run.codebook.targets, run.codebook.psi_values,
                          run.codebook.convention, processor=_processor(M.CODEBOOK, "entradas"))


# ============================================
# SUBCOMANDOS
# ============================================

@log_operation(M.CLI, 'Modelo da célula')
def cmd_cell_model(run):
    """Amostra a tabela numa grade densa de tensões e grava o relatório do gap de fase."""
    model = run.build_model()
    run.ensure_output_dir()
    df = model.sample_grid(run.grid_step_v)
    write_cell_model(df, run.output_path('cell_model.csv'))

    gap = model.achievable_phase_gap()
    umin, umax = model.phase_span
    write_json({
        'gap_lo_deg': round(gap.gap_lo_deg, 9),
        'gap_hi_deg': round(gap.gap_hi_deg, 9),
        'gap_width_deg': round(gap.gap_width_deg, 9),
        'max_inversion_error_deg': round(gap.gap_width_deg / 2.0, 9),
        'unwrapped_span_deg': [round(umin, 9), round(umax, 9)],
        'samples': len(model.samples),
        'g0': model.g0,
    }, run.output_path('phase_gap.json'))

    print(f"linhas: {len(df)}")
    print(f"gap de fase: ({gap.gap_lo_deg:.3f}, {gap.gap_hi_deg:.3f}) graus, "
          f"largura {gap.gap_width_deg:.3f} graus")
    return 0


@log_operation(M.CLI, 'Codebook')
def cmd_codebook(run):
    model = run.build_model()
    run.ensure_output_dir()
    codebook = _codebook_for(run, model)
    path = run.output_path('codebook.txt')
    save_codebook(codebook, path, run.scenario)

    errors = np.array([e.max_phase_error_deg for e in codebook])
    print(f"entradas: {len(codebook)} ({len(run.codebook.targets)} alvos x "
          f"{len(run.codebook.psi_values)} psi)")
    print(f"erro de fase máximo por entrada: min {errors.min():.3f} / média {errors.mean():.3f}"
          f" / máx {errors.max():.3f} graus")
    print(f"arquivo: {path}")
    return 0


def _fieldmap_configuration(run, model):
    """Tensões do mapa: explícitas, registro de um codebook gravado ou entrada sintetizada."""
    settings = run.fieldmap
    if settings.voltages is not None:
        return RisConfiguration(settings.voltages)

    if run.sweep.codebook_path and settings.index_p is not None and settings.psi_deg is not None:
        codebook = load_codebook(run.sweep.codebook_path)
        key = (settings.index_p, settings.psi_deg)
        if key not in codebook:
            raise CodebookError(f"entrada psi={settings.psi_deg:g} ausente do codebook",
                                index=settings.index_p)
        return codebook.get(*key).configuration()

    target = BeamTarget(settings.target, settings.index_p or 0)
    if settings.psi_deg is not None:
        psi = settings.psi_deg
    elif settings.include_direct:
        psi = optimal_psi(run.scenario, model, target, run.codebook.psi_values,
                          run.codebook.convention, settings.e_source)[0]
    else:
        psi = 0.0
    return synthesize_entry(run.scenario, model, target, psi, run.codebook.convention) \
        .configuration()


@log_operation(M.CLI, 'Mapa de campo')
def cmd_fieldmap(run):
    settings = run.fieldmap
    model = run.build_model()
    grid = build_grid(run)
    config = _fieldmap_configuration(run, model)
    if settings.absorbing:
        model = model.with_gain(0.0)

    run.ensure_output_dir()
    fmap = field_map(settings.e_source, run.scenario, model, config, grid,
                     include_direct=settings.include_direct, domain=run.domain,
                     processor=_processor(M.FIELDMAP, "linhas"))
    write_field_map(fmap, run.output_path('fieldmap.csv'), run.output_path('fieldmap.pgm'))

    peak = fmap.argmax()
    distance = (peak.position - settings.target).norm()
    wavelength = run.scenario.wavelength
    direct = 'sim' if settings.include_direct else 'não'
    print(f"grade: {grid.nu}x{grid.nv}, campo direto: {direct}")
    print(f"máximo: u={peak.u_index} v={peak.v_index} posição=({peak.position.x:.4f}, "
          f"{peak.position.y:.4f}, {peak.position.z:.4f}) |E|={peak.magnitude:.6e}")
    print(f"distância ao alvo: {distance:.4f} m ({distance / wavelength:.2f} lambda)")
    return 0


def _write_top_maps(run, model, codebook, result):
    """Mapas de campo (grade da seção fieldmap) das ber_sweep.top_maps melhores entradas."""
    top = result.top(run.sweep.top_maps)
    if not top:
        return
    grid = build_grid(run)
    for rank, record in enumerate(top, start=1):
        config = codebook.get(record.index_p, record.psi_deg).configuration()
        fmap = field_map(run.fieldmap.e_source, run.scenario, model, config, grid,
                         include_direct=run.fieldmap.include_direct,
                         processor=_processor(M.FIELDMAP, "linhas"))
        write_field_map(fmap, run.output_path(f"fieldmap_top{rank}.csv"),
                        run.output_path(f"fieldmap_top{rank}.pgm"))
        print(f"mapa top{rank}: index_p={record.index_p} psi={record.psi_deg:g} "
              f"ber={record.ber:.6g}")


@log_operation(M.CLI, 'Varredura de BER')
def cmd_ber_sweep(run):
    model = run.build_model()
    sweep = run.sweep
    if sweep.codebook_path:
        codebook = load_codebook(sweep.codebook_path)
        expected = scenario_hash(run.scenario)
        if codebook.header.get('scenario_hash') not in (None, expected):
            warn(M.SWEEP, 'DATA', "Codebook gerado para outro cenário",
                 arquivo=codebook.header.get('scenario_hash'), cenario=expected)
    else:
        codebook = _codebook_for(run, model)
    if len(codebook) == 0:
        raise CodebookError("codebook vazio")

    run.ensure_output_dir()
    result = ber_sweep(run.scenario, model, codebook, run.link.tag, sweep.es_over_n0_db,
                       sweep.method,
                       trials=sweep.trials if sweep.method is BerMethod.MONTE_CARLO else 0,
                       seed=run.seed, baseline=sweep.baseline,
                       include_ris_at_reader=run.link.include_ris_at_reader,
                       e_source=run.link.e_source,
                       processor=_processor(M.SWEEP, "entradas"), domain=run.domain)
    write_ber_sweep(result, run.output_path('ber_sweep.csv'), run.output_path('ber_sweep.pgm'))
    _write_top_maps(run, model, codebook, result)

    best = result.best()
    if best is None:
        print("melhor: nenhuma entrada válida")
    else:
        print(f"melhor: index_p={best.index_p} psi={best.psi_deg:g} ber={best.ber:.6g}")
    print(f"referência ({result.baseline_mode.value}): ber={result.baseline_ber:.6g}")
    print(f"entradas: {len(result.records)}, falhas: {len(result.errors)}")
    return 0


@log_operation(M.CLI, 'Validação do cenário')
def cmd_validate(run):
    """Conta células fora do domínio angular em cada trecho; sai com 1 se houver alguma."""
    scenario = run.scenario
    links = (
        ('fonte->tag', scenario.source, scenario.tag),
        ('fonte->leitor', scenario.source, scenario.reader),
        ('tag->leitor', scenario.tag, scenario.reader),
    )
    outside_total = 0
    for label, src, dst in links:
        report = deflection_report(scenario, src, dst, run.domain)
        outside_total += report.outside_count
        print(f"{label}: {report.outside_count}/{len(report.in_domain)} células fora do domínio"
              f" (incidência máx {report.incidence_deg.max():.2f}, "
              f"partida máx {report.departure_deg.max():.2f} graus)")
        if report.outside_count:
            warn(M.GEOMETRY, 'DOMAIN', "Trecho fora do domínio angular", trecho=label,
                 celulas=report.outside_count)

    far_field = fraunhofer_distance(scenario.ris, scenario.wavelength)
    print(f"distância de Fraunhofer: {far_field:.4f} m")
    for name in ('source', 'tag', 'reader'):
        d = (getattr(scenario, name) - scenario.ris.center).norm()
        regime = 'campo distante' if d >= far_field else 'campo próximo'
        print(f"{name}: {d:.4f} m do centro da RIS ({regime})")
    print(f"hash do cenário: {scenario_hash(scenario)}")
    return 1 if outside_total else 0


COMMANDS = {
    'cell-model': (cmd_cell_model, "amostra a tabela da célula e o gap de fase"),
    'codebook': (cmd_codebook, "sintetiza e grava o codebook"),
    'fieldmap': (cmd_fieldmap, "mapa de campo num plano através do alvo"),
    'ber-sweep': (cmd_ber_sweep, "BER por entrada do codebook"),
    'validate': (cmd_validate, "verifica o domínio angular do cenário"),
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument('--config', help="arquivo JSON do experimento")
    common.add_argument('--seed', type=int, help="semente (inteiro >= 0)")
    common.add_argument('--out', help="diretório de saída")
    common.add_argument('--table', help="tabela da célula (.csv ou .xlsx)")

    parser = argparse.ArgumentParser(prog='ris-ambc', parents=[common],
                                     description="Simulador de AmBC assistido por RIS")
    sub = parser.add_subparsers(dest='command', required=True)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    init_logging(Config.LOG_LEVEL)
    log_section(args.command)
    try:
        run = load_run_config(getattr(args, 'config', None))
        run = run.with_overrides(seed=getattr(args, 'seed', None),
                                 output_dir=getattr(args, 'out', None),
                                 table_path=getattr(args, 'table', None))
        command, _ = COMMANDS[args.command]
        return command(run)
    except (RisError, OSError) as exc:
        message = ' '.join(str(exc).split())
        log_error(M.CLI, args.command, message)
        print(f"erro: {message}", file=sys.stderr)
        return 1


if __name__ == '__main__':
    sys.exit(main())
