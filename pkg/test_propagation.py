import cmath
import math

import numpy as np
import pytest

from batch_processor import BatchProcessor
from cell_model import load_table
from codebook import BeamTarget, synthesize_entry
from errors import GeometryError, SingularityError, VoltageOutOfRangeError
from geometry import RisArray, ScenarioGeometry, Vec3
from propagation import (
    GridSpec, RisConfiguration, direct_gain, field_map, free_space_gain, scattered_field,
    total_field,
)
from conftest import WAVELENGTH, random_cone_point, small_scenario

UNIT_CELL = load_table([(0.0, 0.0, 0.0), (1.0, 0.0, 10.0)])


def _distance(a, b):
    dx, dy, dz = a[0] - b[0], a[1] - b[1], a[2] - b[2]
    return math.sqrt(dx * dx + dy * dy + dz * dz)


def brute_force_scattered(e_source, scenario, model, voltages, observation):
    """Soma célula a célula escrita sem numpy vetorizado."""
    lam = scenario.wavelength
    src = scenario.source.to_list()
    obs = Vec3.of(observation).to_list()
    total = 0j
    for m, center in enumerate(scenario.ris.centers.tolist()):
        d1 = _distance(center, src)
        d2 = _distance(center, obs)
        g1 = lam * cmath.exp(1j * 2 * math.pi * d1 / lam) / (4 * math.pi * d1)
        g2 = lam * cmath.exp(1j * 2 * math.pi * d2 / lam) / (4 * math.pi * d2)
        total += g1 * complex(model.reflection_coefficient(float(voltages[m]))) * g2
    return e_source * total


def test_free_space_gain_full_wavelength():
    g = free_space_gain(WAVELENGTH, WAVELENGTH)
    assert abs(g) == pytest.approx(1 / (4 * np.pi), rel=1e-12)
    assert abs(np.angle(g)) <= 1e-12


def test_free_space_gain_half_wavelength():
    g = free_space_gain(WAVELENGTH / 2, WAVELENGTH)
    assert g.real == pytest.approx(-1 / (2 * np.pi), rel=1e-12)
    assert abs(g.imag) <= 1e-12


def test_free_space_gain_two_meters():
    g = free_space_gain(2.0, 0.055)
    assert abs(g) == pytest.approx(0.055 / (8 * np.pi), rel=1e-12)
    assert abs(g) == pytest.approx(2.1884e-3, rel=1e-4)
    expected = math.fmod(2 * math.pi * 2.0 / 0.055 + math.pi, 2 * math.pi) - math.pi
    assert np.angle(g) == pytest.approx(expected, abs=1e-9)


def test_free_space_gain_vectorized():
    d = np.array([0.5, 1.0, 2.0])
    np.testing.assert_allclose(free_space_gain(d, WAVELENGTH),
                               [free_space_gain(x, WAVELENGTH) for x in d], rtol=1e-15)


@pytest.mark.parametrize('d', [0.0, -1.0])
def test_free_space_gain_singular(d):
    with pytest.raises(SingularityError):
        free_space_gain(d, WAVELENGTH)


def test_free_space_gain_bad_wavelength():
    with pytest.raises(GeometryError):
        free_space_gain(1.0, 0.0)


def test_single_cell_trivial_cascade():
    scenario = small_scenario(rows=1, cols=1, source=(0, 0, WAVELENGTH),
                              tag=(0, 0, 1.0), reader=(0, 0, 2.0))
    config = RisConfiguration([0.0])
    e = scattered_field(1.0, scenario, UNIT_CELL, config, Vec3(0, 0, WAVELENGTH))
    assert abs(e) == pytest.approx(6.3326e-3, rel=1e-4)
    assert e.real == pytest.approx((1 / (4 * np.pi)) ** 2, rel=1e-12)
    assert abs(np.angle(e)) <= 1e-12


def test_superposition_oracle_random_scenarios(table_model):
    rng = np.random.default_rng(2024)
    ris = RisArray()
    for _ in range(100):
        source = random_cone_point(rng, ris, max_deflection=39.0)
        tag = random_cone_point(rng, ris, max_deflection=39.0)
        scenario = ScenarioGeometry(ris, source, tag, random_cone_point(rng, ris))
        voltages = rng.uniform(0.0, 5.0, ris.cell_count)
        fast = scattered_field(1.0, scenario, table_model, RisConfiguration(voltages), tag)
        slow = brute_force_scattered(1.0, scenario, table_model, voltages, tag)
        assert abs(fast - slow) <= 1e-12 * abs(slow)


def test_two_by_two_reference_state(table_model):
    scenario = small_scenario(source=(0, 0, 1.0), tag=(0, 0, 1.0), reader=(0.2, 0, 1.0))
    config = RisConfiguration.constant(scenario.ris, 5.0)
    fast = scattered_field(1.0, scenario, table_model, config, scenario.tag)
    slow = brute_force_scattered(1.0, scenario, table_model, [5.0] * 4, scenario.tag)
    assert abs(fast - slow) <= 1e-12 * abs(slow)


def test_linearity_and_additivity(table_model, scenario):
    rng = np.random.default_rng(5)
    config = RisConfiguration(rng.uniform(0.0, 5.0, scenario.ris.cell_count))
    obs = scenario.tag
    e1 = scattered_field(1.0, scenario, table_model, config, obs)
    e2 = scattered_field(2.5 - 1j, scenario, table_model, config, obs)
    assert abs(e2 - (2.5 - 1j) * e1) <= 1e-12 * abs(e2)

    cells = np.arange(scenario.ris.cell_count)
    part_a = scattered_field(1.0, scenario, table_model, config, obs, cells=cells[::2])
    part_b = scattered_field(1.0, scenario, table_model, config, obs, cells=cells[1::2])
    assert abs(part_a + part_b - e1) <= 1e-12 * abs(e1)


def test_reciprocity(table_model, scenario):
    rng = np.random.default_rng(9)
    config = RisConfiguration(rng.uniform(0.0, 5.0, scenario.ris.cell_count))
    forward = scattered_field(1.0, scenario, table_model, config, scenario.tag)
    swapped = ScenarioGeometry(scenario.ris, scenario.tag, scenario.source, scenario.reader,
                               scenario.wavelength)
    backward = scattered_field(1.0, swapped, table_model, config, scenario.source)
    assert abs(forward - backward) <= 1e-12 * abs(forward)


def test_magnitude_bound(table_model, scenario):
    rng = np.random.default_rng(11)
    ris = scenario.ris
    d1 = np.linalg.norm(ris.centers - scenario.source.as_array(), axis=1)
    d2 = np.linalg.norm(ris.centers - scenario.tag.as_array(), axis=1)
    bound = np.sum((WAVELENGTH / (4 * np.pi * d1)) * (WAVELENGTH / (4 * np.pi * d2)))
    for _ in range(10):
        config = RisConfiguration(rng.uniform(0.0, 5.0, ris.cell_count))
        assert abs(scattered_field(1.0, scenario, table_model, config, scenario.tag)) <= bound


def test_total_field_without_direct_is_scattered(table_model, scenario):
    config = RisConfiguration.constant(scenario.ris, 3.0)
    assert total_field(1.0, scenario, table_model, config, scenario.tag, include_direct=False) \
        == scattered_field(1.0, scenario, table_model, config, scenario.tag)


def test_absorbing_ris_leaves_direct_path(table_model, scenario):
    config = RisConfiguration.constant(scenario.ris, 3.0)
    e = total_field(1.0, scenario, table_model.with_gain(0.0), config, scenario.tag)
    assert e == pytest.approx(direct_gain(scenario.source, scenario.tag, WAVELENGTH), rel=1e-15)


def test_destructive_sum_in_antiphase(full_coverage_model):
    scenario = small_scenario(rows=1, cols=1, source=(0, 0, 1.0), tag=(0.3, 0.0, 0.8),
                              reader=(0, 0, 2.0))
    obs = scenario.tag
    direct = direct_gain(scenario.source, obs, WAVELENGTH)
    probe = scattered_field(1.0, scenario, full_coverage_model,
                            RisConfiguration([0.0]), obs)
    # a célula em 0 V tem fase 0: o resto da fase vem só da propagação
    needed = np.angle(direct, deg=True) + 180.0 - np.angle(probe, deg=True)
    inversion = full_coverage_model.voltage_for_phase(needed)
    config = RisConfiguration([inversion.voltage])
    scattered = scattered_field(1.0, scenario, full_coverage_model, config, obs)
    total = total_field(1.0, scenario, full_coverage_model, config, obs)
    assert abs(total) == pytest.approx(abs(abs(direct) - abs(scattered)), rel=1e-9)


def test_configuration_validation(table_model):
    ris = RisArray(rows=2, cols=2)
    with pytest.raises(GeometryError):
        RisConfiguration([1.0, 2.0]).validate(ris, table_model)
    with pytest.raises(VoltageOutOfRangeError):
        RisConfiguration([1.0, 2.0, 3.0, 6.0]).validate(ris, table_model)


# ============================================
# MAPAS DE CAMPO
# ============================================

def test_grid_spec_validation():
    with pytest.raises(GeometryError):
        GridSpec(Vec3(0, 0, 1), Vec3(1, 0, 0), Vec3(1, 0, 0), 2, 2, 0.1, 0.1)
    with pytest.raises(GeometryError):
        GridSpec(Vec3(0, 0, 1), Vec3(1, 0, 0), Vec3(0, 1, 0), 0, 2, 0.1, 0.1)


def test_facing_grid_is_centered_and_perpendicular(scenario):
    ris = scenario.ris
    grid = GridSpec.facing(scenario.tag, scenario.tag - ris.center, 1.0, 1.0, 11, 11,
                           reference=ris.normal)
    np.testing.assert_allclose(grid.node_position(5, 5).as_array(), scenario.tag.as_array(),
                               atol=1e-12)
    direction = (scenario.tag - ris.center).unit().as_array()
    assert abs(grid.axis_u.as_array() @ direction) <= 1e-12
    assert abs(grid.axis_v.as_array() @ direction) <= 1e-12
    assert abs(grid.axis_u.as_array() @ ris.normal.as_array()) <= 1e-12


def test_single_node_map_equals_total_field(table_model, scenario):
    config = RisConfiguration.constant(scenario.ris, 5.0)
    grid = GridSpec(scenario.tag, Vec3(1, 0, 0), Vec3(0, 1, 0), 1, 1, 0.0, 0.0)
    fmap = field_map(1.0, scenario, table_model, config, grid)
    assert fmap.values.shape == (1, 1)
    expected = total_field(1.0, scenario, table_model, config, scenario.tag)
    assert fmap.values[0, 0] == pytest.approx(expected, rel=1e-12)


def test_map_is_linear_and_parallel_matches_sequential(table_model, scenario):
    config = RisConfiguration.constant(scenario.ris, 2.0)
    grid = GridSpec.facing(scenario.tag, scenario.tag - scenario.ris.center, 0.4, 0.4, 9, 7,
                           reference=scenario.ris.normal)
    sequential = field_map(1.0, scenario, table_model, config, grid,
                           processor=BatchProcessor(max_workers=1))
    parallel = field_map(1.0, scenario, table_model, config, grid,
                         processor=BatchProcessor(max_workers=4))
    np.testing.assert_array_equal(sequential.values, parallel.values)

    doubled = field_map(2.0, scenario, table_model, config, grid)
    np.testing.assert_allclose(np.abs(doubled.values), 2 * np.abs(sequential.values),
                               rtol=1e-12)


def test_map_node_on_cell_center_reports_indices(table_model):
    scenario = small_scenario()
    config = RisConfiguration.constant(scenario.ris, 5.0)
    origin = Vec3.of(scenario.ris.centers[0]) - Vec3(0.0, 0.1, 0.0)
    grid = GridSpec(origin, Vec3(1, 0, 0), Vec3(0, 1, 0), 1, 3, 0.0, 0.1)
    with pytest.raises(SingularityError) as excinfo:
        field_map(1.0, scenario, table_model, config, grid)
    assert excinfo.value.indices == ((0, 1),)


def test_absorbing_map_is_spherical_wave_from_source(table_model, scenario):
    config = RisConfiguration.constant(scenario.ris, 5.0)
    grid = GridSpec.facing(scenario.tag, scenario.tag - scenario.ris.center, 0.2, 0.2, 5, 5,
                           reference=scenario.ris.normal)
    fmap = field_map(1.0, scenario, table_model.with_gain(0.0), config, grid)
    for i in range(grid.nu):
        for j in range(grid.nv):
            p = grid.node_position(i, j)
            assert fmap.values[i, j] == pytest.approx(
                direct_gain(scenario.source, p, WAVELENGTH), rel=1e-12)


def test_hot_spot_at_beamforming_target(table_model, scenario):
    entry = synthesize_entry(scenario, table_model, BeamTarget(scenario.tag, 1), 0.0)
    ris = scenario.ris
    grid = GridSpec.facing(scenario.tag, scenario.tag - ris.center, 1.0, 1.0, 101, 101,
                           reference=ris.normal)
    fmap = field_map(1.0, scenario, table_model, entry.configuration(), grid,
                     include_direct=False)
    peak = fmap.argmax()
    assert (peak.position - scenario.tag).norm() <= 2 * WAVELENGTH
    assert fmap.magnitude_db().max() == pytest.approx(20 * np.log10(peak.magnitude))
