"""
Tests de spectral.py: Laplaciano de Neumann, gap, Hoffmann-Ostenhof,
incertidumbre local y ley de escala del gap.

Mallas centradas: con un número impar de celdas y extensión simétrica el
origen es el centro exacto de la celda central.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import centered_grid
from ensemble_factory import create_ensemble
from errors import DisconnectedMask, GapUndefined, ZeroField, ZeroOnBall
from fields import (
    Ball,
    Field,
    field_from_function,
    gradient_energy,
    make_ball,
    make_grid,
    normalize,
    projector,
    zero_field,
)
from spectral import (
    gap_radius_sweep,
    gap_reports_to_frame,
    hoffmann_ostenhof_check,
    local_uncertainty_measure,
    neumann_gap,
    neumann_laplacian,
    neumann_modes,
    sobolev_quotient,
    sqrt_density,
)

UNIT_GRID = make_grid(1, [0.0, 8.0], 8)


# ═══════════════════════════════════════════════════════════════════════════
# 1. LAPLACIANO DE NEUMANN
# ═══════════════════════════════════════════════════════════════════════════

def test_laplacian_of_a_path():
    ball = make_ball(UNIT_GRID, (3.5,), 2.5)
    assert ball.n_cells == 5
    expected = np.array([
        [1, -1, 0, 0, 0],
        [-1, 2, -1, 0, 0],
        [0, -1, 2, -1, 0],
        [0, 0, -1, 2, -1],
        [0, 0, 0, -1, 1],
    ], dtype=float)
    assert np.array_equal(neumann_laplacian(ball, UNIT_GRID).toarray(), expected)


def test_laplacian_is_symmetric_with_zero_row_sums():
    grid = make_grid(2, [-2.0, 2.0], 20)
    ball = make_ball(grid, (0.1, 0.1), 1.3)
    lap = neumann_laplacian(ball, grid)
    dense = lap.toarray()
    assert np.array_equal(dense, dense.T)
    assert np.max(np.abs(dense.sum(axis=1))) <= 1e-9 * np.max(np.diag(dense))


def test_two_cell_ball():
    ball = make_ball(UNIT_GRID, (3.5,), 1.0)
    assert ball.n_cells == 2
    report = neumann_gap(ball, UNIT_GRID)
    assert report.gap == pytest.approx(2.0, rel=1e-12)
    assert report.solver == "dense"


def test_one_cell_ball_has_no_gap():
    ball = make_ball(UNIT_GRID, (3.5,), 0.5)
    assert ball.n_cells == 1
    with pytest.raises(GapUndefined):
        neumann_gap(ball, UNIT_GRID)


def test_disconnected_mask():
    mask = np.zeros(UNIT_GRID.n_cells, dtype=bool)
    mask[[1, 2, 5]] = True
    ball = Ball(grid=UNIT_GRID, center=(3.5,), radius=2.5, mask=mask)
    with pytest.raises(DisconnectedMask):
        neumann_gap(ball, UNIT_GRID)


# ═══════════════════════════════════════════════════════════════════════════
# 2. GAP DE INTERVALOS Y DEL DISCO
# ═══════════════════════════════════════════════════════════════════════════

def test_unit_interval_gap():
    grid = make_grid(1, [-1.0, 1.0], 1024)
    ball = make_ball(grid, (1.0 / 1024,), 0.5)
    assert ball.volume == pytest.approx(1.0)
    assert neumann_gap(ball, grid).gap == pytest.approx(math.pi ** 2, rel=1e-2)


def test_interval_of_length_two():
    grid = make_grid(1, [-2.0, 2.0], 2048)
    ball = make_ball(grid, (1.0 / 1024,), 1.0)
    assert ball.volume == pytest.approx(2.0)
    assert neumann_gap(ball, grid).gap == pytest.approx(math.pi ** 2 / 4, rel=1e-2)


def test_lanczos_agrees_with_dense():
    grid = make_grid(1, [-1.0, 1.0], 1024)
    ball = make_ball(grid, (1.0 / 1024,), 0.5)
    dense = neumann_gap(ball, grid)
    sparse = neumann_gap(ball, grid, dense_limit=100)
    assert sparse.solver == "lanczos"
    assert sparse.gap == pytest.approx(dense.gap, rel=1e-4)


def test_unit_disk_gap():
    # primer cero de J1' al cuadrado
    grid = centered_grid(2, 1.0 / 64, 96)
    ball = make_ball(grid, (0.0, 0.0), 1.0)
    report = neumann_gap(ball, grid)
    assert report.solver == "lanczos"
    assert report.gap == pytest.approx(3.3900, rel=3e-2)


def test_ground_state_is_constant():
    grid = centered_grid(2, 1.0 / 8, 16)
    ball = make_ball(grid, (0.0, 0.0), 1.0)
    report = neumann_gap(ball, grid)
    assert report.ground_residual <= 1e-12
    ground = neumann_modes(ball, grid, 1)[0]
    inside = ground.values[ball.mask]
    assert np.ptp(inside) <= 1e-8 * np.max(np.abs(inside))
    assert ground.norm() == pytest.approx(1.0, abs=1e-12)
    assert np.all(ground.values[~ball.mask] == 0.0)


def test_second_mode_energy_equals_gap():
    grid = centered_grid(1, 1.0 / 64, 128)
    ball = make_ball(grid, (0.0,), 1.0)
    gap = neumann_gap(ball, grid).gap
    mode = neumann_modes(ball, grid, 2)[1]
    energy = gradient_energy(mode, ball.mask, interior=True)
    assert energy == pytest.approx(gap, rel=1e-10)


# ═══════════════════════════════════════════════════════════════════════════
# 3. LEY DE ESCALA
# ═══════════════════════════════════════════════════════════════════════════

@pytest.mark.parametrize("dim", [1, 2])
def test_refined_sweep_is_scale_invariant(dim):
    reports = gap_radius_sweep((0.0,) * dim, [0.5, 1.0, 2.0, 4.0], dim, cells_per_radius=8)
    values = [r.gap_times_volume_pow for r in reports]
    assert max(values) == pytest.approx(min(values), rel=1e-9)


def test_fixed_grid_sweep_tracks_interval_law():
    grid = centered_grid(1, 1.0 / 64, 256)
    reports = gap_radius_sweep((0.0,), [0.5, 1.0, 1.5, 2.0], 1, grid=grid, workers=2)
    for r in reports:
        assert r.gap_times_volume_pow == pytest.approx(math.pi ** 2, rel=5e-2)
    assert [r.ball.radius for r in reports] == [0.5, 1.0, 1.5, 2.0]


def test_sweep_frame_columns():
    reports = gap_radius_sweep((0.0,), [1.0, 2.0], 1, cells_per_radius=8)
    frame = gap_reports_to_frame(reports)
    assert len(frame) == 2
    for column in ("radius", "gap", "gap_times_volume_pow"):
        assert column in frame.columns


# ═══════════════════════════════════════════════════════════════════════════
# 4. HOFFMANN-OSTENHOF
# ═══════════════════════════════════════════════════════════════════════════

HO_GRID = {"dim": 1, "extent": [-6.0, 6.0], "points": 160}


@settings(max_examples=25, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=10_000),
    n_fields=st.integers(min_value=1, max_value=5),
    use_complex=st.booleans(),
    cut=st.floats(min_value=-4.0, max_value=4.0),
)
def test_hoffmann_ostenhof_holds(seed, n_fields, use_complex, cut):
    """Property: ∫|∇√ρ|² ≤ Tr(-Δγ), global y sobre cualquier máscara."""
    e = create_ensemble({
        "generator": "random_bumps", "seed": seed, "grid": HO_GRID,
        "params": {"n_fields": n_fields, "width": 1.0, "complex": use_complex,
                   "random_weights": True},
    })
    assert hoffmann_ostenhof_check(e).holds
    mask = e.grid.coordinates[:, 0] < cut
    assert hoffmann_ostenhof_check(e, mask).holds
    assert hoffmann_ostenhof_check(e, mask, interior=True).holds


def test_hoffmann_ostenhof_in_2d():
    e = create_ensemble({
        "generator": "random_bumps", "seed": 9,
        "grid": {"dim": 2, "extent": [-5.0, 5.0], "points": 24},
        "params": {"n_fields": 4, "complex": True},
    })
    report = hoffmann_ostenhof_check(e)
    assert report.holds
    assert report.slack >= -1e-9


def test_hoffmann_ostenhof_is_tight_for_one_positive_field(gaussian_1d):
    report = hoffmann_ostenhof_check(gaussian_1d)
    assert report.lhs == pytest.approx(report.rhs, rel=1e-12)


@pytest.mark.parametrize("seed", range(100))
def test_hoffmann_ostenhof_seeded_corpus(seed):
    """100 ensembles sembrados en d = 1, 2 con N ≤ 6; igualdad para un solo campo real positivo."""
    dim = 1 + seed % 2
    n_fields = 1 + seed % 6
    use_complex = seed % 5 == 0
    grid = HO_GRID if dim == 1 else {"dim": 2, "extent": [-5.0, 5.0], "points": 20}
    e = create_ensemble({
        "generator": "random_bumps", "seed": seed, "grid": grid,
        "params": {"n_fields": n_fields, "width": 1.0, "complex": use_complex,
                   "random_weights": seed % 4 == 0},
    })
    report = hoffmann_ostenhof_check(e)
    assert report.holds
    assert report.lhs <= report.rhs + 1e-9 * max(1.0, report.rhs)
    if n_fields == 1 and not use_complex:
        assert report.lhs == pytest.approx(report.rhs, rel=1e-12)


def test_sign_change_makes_the_inequality_strict():
    """u = x·e^{-x²/2}: la única arista que cruza el cero separa ambos lados."""
    grid = make_grid(1, [-5.0, 5.0], 100)
    u = normalize(field_from_function(grid, lambda x: x * np.exp(-0.5 * x ** 2)))
    e = projector([u])
    x = grid.coordinates[:, 0]
    h = grid.spacing[0]
    k = int(np.flatnonzero(x < 0)[-1])
    a, b = u.values[k], u.values[k + 1]
    assert a < 0 < b

    full = hoffmann_ostenhof_check(e)
    assert full.holds
    edge_gap = ((b - a) ** 2 - (abs(b) - abs(a)) ** 2) / h ** 2 * h
    assert edge_gap > 0.0
    assert full.rhs - full.lhs == pytest.approx(edge_gap, rel=1e-9)

    at_zero = np.zeros(grid.n_cells, dtype=bool)
    at_zero[k] = True
    local = hoffmann_ostenhof_check(e, at_zero)
    assert local.lhs < 1e-12 * local.rhs
    assert local.rhs > 0.0

    positive = hoffmann_ostenhof_check(e, x > 1.0)
    assert positive.lhs == pytest.approx(positive.rhs, rel=1e-12)


# ═══════════════════════════════════════════════════════════════════════════
# 5. INCERTIDUMBRE LOCAL Y SOBOLEV
# ═══════════════════════════════════════════════════════════════════════════

def test_constant_field_needs_no_correction():
    grid = centered_grid(2, 1.0 / 8, 12)
    ball = make_ball(grid, (0.0, 0.0), 1.0)
    report = local_uncertainty_measure(Field(grid, np.full(grid.n_cells, 0.7)), ball)
    assert report.kinetic == 0.0
    assert report.fitted_constant == pytest.approx(1.0, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10_000),
       radius=st.floats(min_value=0.5, max_value=3.0))
def test_fitted_constant_satisfies_the_inequality(seed, radius):
    """Property: K ≥ I/C - C·V con C ≥ 1."""
    e = create_ensemble({
        "generator": "random_bumps", "seed": seed, "grid": HO_GRID,
        "params": {"n_fields": 3, "width": 0.8},
    })
    ball = make_ball(e.grid, (0.0,), radius)
    report = local_uncertainty_measure(sqrt_density(e), ball)
    c = report.fitted_constant
    assert c >= 1.0
    bound = report.interaction / c - c * report.volume_term
    assert report.kinetic >= bound - 1e-9 * max(1.0, abs(report.kinetic))


def test_uncertainty_on_a_zero_region():
    grid = make_grid(1, [0.0, 10.0], 100)
    values = np.zeros(grid.n_cells)
    values[80:] = 1.0
    ball = make_ball(grid, (2.05,), 1.0)
    with pytest.raises(ZeroOnBall):
        local_uncertainty_measure(Field(grid, values), ball)


def test_sobolev_quotient_of_gaussian(gaussian_1d):
    expected = math.pi * math.sqrt(3.0) / 2.0
    assert sobolev_quotient(gaussian_1d.fields[0]) == pytest.approx(expected, rel=5e-3)


def test_sech_beats_gaussian(grid_1d, gaussian_1d):
    sech = create_ensemble({"generator": "sech"}, grid=grid_1d).fields[0]
    assert sobolev_quotient(sech) == pytest.approx(2.5, rel=1e-2)
    assert sobolev_quotient(sech) < sobolev_quotient(gaussian_1d.fields[0])


def test_sobolev_quotient_ignores_amplitude(gaussian_1d):
    u = gaussian_1d.fields[0]
    assert sobolev_quotient(u * 3.0) == pytest.approx(sobolev_quotient(u), rel=1e-12)


def test_sobolev_quotient_of_zero():
    with pytest.raises(ZeroField):
        sobolev_quotient(zero_field(UNIT_GRID))
