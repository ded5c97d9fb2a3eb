import json

import pandas as pd
import pytest
from PIL import Image

from app import main
from codebook import load_codebook
from conftest import write_config

SMALL = {
    'ris': {'rows': 4, 'cols': 4},
    'codebook': {'psi_step_deg': 90.0, 'targets': {'layout': 'arc', 'count': 3}},
}


def _run(*argv):
    return main([str(a) for a in argv])


def _diagnostic(err):
    """A linha `erro: ...` que a CLI escreve no stderr."""
    lines = [line for line in err.splitlines() if line.startswith('erro:')]
    assert len(lines) == 1
    return lines[0]


@pytest.fixture
def small_config(tmp_path):
    return write_config(tmp_path / 'small.json', SMALL)


def test_cell_model_default_table(tmp_path, capsys):
    assert _run('cell-model', '--out', tmp_path) == 0
    df = pd.read_csv(tmp_path / 'cell_model.csv')
    assert list(df.columns) == ['voltage', 'amplitude_db', 'phase_deg']
    assert len(df) == 51
    gap = json.loads((tmp_path / 'phase_gap.json').read_text(encoding='utf-8'))
    assert gap['gap_width_deg'] == pytest.approx(39.704, abs=1e-6)
    assert 'largura 39.704' in capsys.readouterr().out


def test_cell_model_custom_table(tmp_path):
    table = tmp_path / 'cell.csv'
    table.write_text("voltage,amplitude_db,phase_deg\n0,0,0\n1,0,10\n", encoding='utf-8')
    assert _run('cell-model', '--table', table, '--out', tmp_path / 'out') == 0
    gap = json.loads((tmp_path / 'out' / 'phase_gap.json').read_text(encoding='utf-8'))
    assert gap['gap_width_deg'] == pytest.approx(350.0)


def test_cell_model_coarse_grid(tmp_path):
    config = write_config(tmp_path / 'c.json', {'cell': {'grid_step_v': 10.0}})
    assert _run('cell-model', '--config', config, '--out', tmp_path) == 0
    assert len(pd.read_csv(tmp_path / 'cell_model.csv')) == 2


def test_codebook_writes_all_entries(small_config, tmp_path, capsys):
    out = tmp_path / 'a'
    assert _run('codebook', '--config', small_config, '--out', out) == 0
    codebook = load_codebook(out / 'codebook.txt')
    assert len(codebook) == 3 * 4
    assert codebook.header['array'] == '4x4'
    assert all(len(record.voltages) == 16 for record in codebook)
    assert 'entradas: 12' in capsys.readouterr().out


def test_codebook_rerun_is_byte_identical(small_config, tmp_path):
    assert _run('codebook', '--config', small_config, '--out', tmp_path / 'a') == 0
    assert _run('codebook', '--config', small_config, '--out', tmp_path / 'b') == 0
    assert (tmp_path / 'a' / 'codebook.txt').read_bytes() == \
        (tmp_path / 'b' / 'codebook.txt').read_bytes()


def test_codebook_single_request(tmp_path):
    config = write_config(tmp_path / 'c.json', {
        'ris': {'rows': 1, 'cols': 1},
        'codebook': {'psi_values': [30.0], 'targets': {'layout': 'tag'}},
    })
    assert _run('codebook', '--config', config, '--out', tmp_path) == 0
    codebook = load_codebook(tmp_path / 'codebook.txt')
    assert codebook.keys() == [(1, 30.0)]


def test_codebook_target_behind_ris(tmp_path, capsys):
    config = write_config(tmp_path / 'c.json', {
        'ris': {'rows': 2, 'cols': 2},
        'codebook': {'targets': {'layout': 'explicit',
                                 'positions': [[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]}},
    })
    assert _run('codebook', '--config', config, '--out', tmp_path) == 1
    err = capsys.readouterr().err
    assert 'index_p 2' in _diagnostic(err)


def test_fieldmap_grid(tmp_path, capsys):
    config = write_config(tmp_path / 'c.json', {
        **SMALL, 'fieldmap': {'nu': 11, 'nv': 11, 'width_u': 0.5, 'width_v': 0.5},
    })
    assert _run('fieldmap', '--config', config, '--out', tmp_path) == 0
    df = pd.read_csv(tmp_path / 'fieldmap.csv')
    assert list(df.columns) == ['u_index', 'v_index', 're', 'im', 'mag_db']
    assert len(df) == 121
    assert df['u_index'].tolist()[:2] == [0, 0] and df['v_index'].tolist()[:2] == [0, 1]
    with Image.open(tmp_path / 'fieldmap.pgm') as image:
        assert image.size == (11, 11)
        assert image.mode == 'L'
    assert 'grade: 11x11' in capsys.readouterr().out


def test_fieldmap_single_node(tmp_path):
    config = write_config(tmp_path / 'c.json', {**SMALL, 'fieldmap': {'nu': 1, 'nv': 1}})
    assert _run('fieldmap', '--config', config, '--out', tmp_path) == 0
    assert len(pd.read_csv(tmp_path / 'fieldmap.csv')) == 1


def test_fieldmap_from_saved_codebook(small_config, tmp_path):
    assert _run('codebook', '--config', small_config, '--out', tmp_path) == 0
    config = write_config(tmp_path / 'map.json', {
        **SMALL,
        'fieldmap': {'nu': 3, 'nv': 3, 'index_p': 2, 'psi_deg': 90.0},
        'ber_sweep': {'codebook': 'codebook.txt'},
    })
    assert _run('fieldmap', '--config', config, '--out', tmp_path / 'map') == 0
    assert len(pd.read_csv(tmp_path / 'map' / 'fieldmap.csv')) == 9


def test_fieldmap_grid_crossing_ris(tmp_path, capsys):
    config = write_config(tmp_path / 'c.json', {
        **SMALL, 'fieldmap': {'nu': 3, 'nv': 3, 'width_u': 10.0, 'width_v': 10.0},
    })
    assert _run('fieldmap', '--config', config, '--out', tmp_path) == 1
    assert 'fieldmap' in capsys.readouterr().err


def test_ber_sweep_is_deterministic(small_config, tmp_path, capsys):
    assert _run('ber-sweep', '--config', small_config, '--out', tmp_path / 'a') == 0
    assert _run('ber-sweep', '--config', small_config, '--out', tmp_path / 'b') == 0
    first = (tmp_path / 'a' / 'ber_sweep.csv').read_bytes()
    assert first == (tmp_path / 'b' / 'ber_sweep.csv').read_bytes()

    df = pd.read_csv(tmp_path / 'a' / 'ber_sweep.csv')
    assert list(df.columns) == ['index_p', 'psi_deg', 'ber']
    assert len(df) == 12
    assert df['ber'].between(0.0, 1.0).all()
    with Image.open(tmp_path / 'a' / 'ber_sweep.pgm') as image:
        assert image.size == (4, 3)
    assert 'melhor: index_p=' in capsys.readouterr().out


def test_ber_sweep_monte_carlo_seed(tmp_path):
    config = write_config(tmp_path / 'mc.json', {
        **SMALL, 'ber_sweep': {'method': 'monte_carlo', 'trials': 2000},
    })
    for name, seed in (('a', 3), ('b', 3), ('c', 4)):
        assert _run('ber-sweep', '--config', config, '--seed', seed, '--out', tmp_path / name) == 0
    a, b, c = ((tmp_path / name / 'ber_sweep.csv').read_bytes() for name in 'abc')
    assert a == b
    assert a != c


def test_ber_sweep_with_saved_codebook(small_config, tmp_path):
    assert _run('codebook', '--config', small_config, '--out', tmp_path) == 0
    config = write_config(tmp_path / 'sweep.json',
                          {**SMALL, 'ber_sweep': {'codebook': 'codebook.txt'}})
    assert _run('ber-sweep', '--config', config, '--out', tmp_path / 'sweep') == 0
    assert len(pd.read_csv(tmp_path / 'sweep' / 'ber_sweep.csv')) == 12


def test_negative_seed_rejected(small_config, tmp_path, capsys):
    assert _run('ber-sweep', '--config', small_config, '--seed', -1, '--out', tmp_path) == 1
    assert '--seed' in capsys.readouterr().err


def test_validate_default_scenario(capsys):
    assert _run('validate') == 0
    out = capsys.readouterr().out
    assert 'distância de Fraunhofer: 2.79' in out
    assert 'fonte->tag: 0/196' in out


def test_validate_wide_angle_reader(tmp_path, capsys):
    config = write_config(tmp_path / 'c.json', {
        'scenario': {'reader': {'distance': 1.2, 'deflection_deg': 60.0,
                                'azimuth_deg': 180.0}},
    })
    assert _run('validate', '--config', config) == 1
    assert 'fonte->leitor: 196/196' in capsys.readouterr().out


@pytest.mark.parametrize('data, key', [
    ({'schema_version': 2}, 'schema_version'),
    ({'ris': {'colour': 'blue'}}, 'ris.colour'),
    ({'telemetry': {}}, 'telemetry'),
    ({'ber_sweep': {'method': 'guess'}}, 'ber_sweep.method'),
    ({'link': {'gamma_backscatter': [2.0, 0.0]}}, 'link'),
    ({'link': {'gamma_backscatter': ['a', 0.0]}}, 'link.gamma_backscatter'),
    ({'codebook': {'targets': {'layout': 'arc', 'first_index': 'x'}}},
     'codebook.targets.first_index'),
    ({'ris': {'rows': 1, 'cols': 1}, 'fieldmap': {'voltages': ['a']}}, 'fieldmap.voltages'),
    ({'ber_sweep': {'top_maps': -1}}, 'ber_sweep.top_maps'),
])
def test_invalid_config_exits_with_one(tmp_path, capsys, data, key):
    config = write_config(tmp_path / 'bad.json', data)
    assert _run('validate', '--config', config) == 1
    err = capsys.readouterr().err
    assert key in _diagnostic(err)


def test_missing_config_file(tmp_path, capsys):
    assert _run('validate', '--config', tmp_path / 'nope.json') == 1
    assert 'nope.json' in capsys.readouterr().err


def test_malformed_json(tmp_path, capsys):
    path = tmp_path / 'broken.json'
    path.write_text('{"ris": ', encoding='utf-8')
    assert _run('validate', '--config', path) == 1
    assert 'JSON inválido' in capsys.readouterr().err


def test_unknown_command_is_usage_error():
    with pytest.raises(SystemExit) as excinfo:
        main(['frobnicate'])
    assert excinfo.value.code == 2


def test_ber_sweep_rejects_codebook_without_psi_column(tmp_path, capsys):
    (tmp_path / 'codebook.txt').write_text("# ris-codebook\nindex_p,psi,v_1\n1,0.0,1.000\n",
                                           encoding='utf-8')
    config = write_config(tmp_path / 'c.json', {
        'ris': {'rows': 1, 'cols': 1}, 'ber_sweep': {'codebook': 'codebook.txt'},
    })
    assert _run('ber-sweep', '--config', config, '--out', tmp_path / 'out') == 1
    assert 'psi_deg' in _diagnostic(capsys.readouterr().err)


def test_fieldmap_from_codebook_with_non_terminating_psi(tmp_path):
    config = write_config(tmp_path / 'c.json', {
        'ris': {'rows': 2, 'cols': 2},
        'codebook': {'psi_step_deg': 360.0 / 7.0, 'targets': {'layout': 'tag'}},
    })
    assert _run('codebook', '--config', config, '--out', tmp_path) == 0
    psi = load_codebook(tmp_path / 'codebook.txt').keys()[1][1]
    assert psi == pytest.approx(360.0 / 7.0, abs=1e-9)

    mapping = write_config(tmp_path / 'map.json', {
        'ris': {'rows': 2, 'cols': 2},
        'fieldmap': {'nu': 2, 'nv': 2, 'index_p': 1, 'psi_deg': psi},
        'ber_sweep': {'codebook': 'codebook.txt'},
    })
    assert _run('fieldmap', '--config', mapping, '--out', tmp_path / 'map') == 0


def test_ber_sweep_writes_top_field_maps(tmp_path, capsys):
    config = write_config(tmp_path / 'c.json', {
        **SMALL,
        'fieldmap': {'nu': 3, 'nv': 3, 'width_u': 0.2, 'width_v': 0.2},
        'ber_sweep': {'top_maps': 2},
    })
    assert _run('ber-sweep', '--config', config, '--out', tmp_path) == 0
    for rank in (1, 2):
        assert len(pd.read_csv(tmp_path / f"fieldmap_top{rank}.csv")) == 9
        with Image.open(tmp_path / f"fieldmap_top{rank}.pgm") as image:
            assert image.size == (3, 3)
    assert not (tmp_path / 'fieldmap_top3.csv').exists()
    out = capsys.readouterr().out
    assert 'mapa top1: index_p=' in out and 'mapa top2: index_p=' in out
