"""
Fixtures compartidas de la batería de tests.

Pone la raíz del repositorio en sys.path (los módulos son planos, como en el
resto del proyecto) y construye una sola vez las mallas y ensembles que usan
varios archivos.
"""

import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from ensemble_factory import create_ensemble  # noqa: E402
from fields import make_grid  # noqa: E402


def centered_grid(dim: int, h: float, half_cells: int):
    """Malla con 2·half_cells + 1 celdas por eje cuyo centro de celda central es el origen."""
    n = 2 * half_cells + 1
    return make_grid(dim, [-0.5 * n * h, 0.5 * n * h], n)


@pytest.fixture(scope="session")
def grid_1d():
    return make_grid(1, [-10.0, 10.0], 2000)


@pytest.fixture(scope="session")
def coarse_grid_1d():
    return make_grid(1, [-10.0, 10.0], 1000)


@pytest.fixture(scope="session")
def gaussian_1d(grid_1d):
    return create_ensemble({"generator": "gaussian"}, grid=grid_1d)


@pytest.fixture(scope="session")
def hermite4_1d(coarse_grid_1d):
    return create_ensemble(
        {"generator": "hermite", "params": {"n_fields": 4}}, grid=coarse_grid_1d
    )


@pytest.fixture(scope="session")
def grid_2d():
    return make_grid(2, [-6.0, 6.0], 32)
