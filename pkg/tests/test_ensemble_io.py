"""
Tests de ensemble_factory.py y ensemble_loader.py.
"""

import json
import math

import numpy as np
import pytest

from errors import BudgetExceeded, InvalidInput, NotOrthonormal
from ensemble_factory import (
    create_ensemble,
    create_family,
    get_available_generators,
    hermite_functions,
    hermite_multi_indices,
    list_generators,
)
from ensemble_loader import ensemble_from_dict, ensemble_to_dict, load_ensemble, save_ensemble
from fields import make_grid

GRID_1D = {"dim": 1, "extent": [-8.0, 8.0], "points": 256}


# ═══════════════════════════════════════════════════════════════════════════
# 1. GENERADORES
# ═══════════════════════════════════════════════════════════════════════════

def test_registry_lists_every_generator():
    names = get_available_generators()
    for name in ("gaussian", "sech", "hermite", "random_bumps", "clusters",
                 "neumann_modes", "copies"):
        assert name in names
    assert set(list_generators()) == set(names)


def test_unknown_generator():
    with pytest.raises(InvalidInput, match="Opciones disponibles"):
        create_ensemble({"generator": "lorentz", "grid": GRID_1D})


def test_generator_needs_grid():
    with pytest.raises(InvalidInput):
        create_ensemble({"generator": "gaussian"})


def test_hermite_functions_are_orthonormal():
    x = np.linspace(-12.0, 12.0, 4001)
    dx = x[1] - x[0]
    psi = hermite_functions(x, 6)
    gram = np.array([[np.sum(a * b) * dx for b in psi] for a in psi])
    assert np.max(np.abs(gram - np.eye(6))) < 1e-10


def test_hermite_multi_index_order():
    assert hermite_multi_indices(2, 4) == [(0, 0), (0, 1), (1, 0), (0, 2)]
    assert hermite_multi_indices(1, 3) == [(0,), (1,), (2,)]


@pytest.mark.parametrize(
    "spec",
    [
        {"generator": "gaussian", "params": {"sigma": 0.7, "center": 1.0}},
        {"generator": "sech"},
        {"generator": "hermite", "params": {"n_fields": 5}},
        {"generator": "random_bumps", "seed": 4, "params": {"n_fields": 3}},
        {"generator": "clusters", "params": {"n_per_cluster": 2, "separation": 8.0}},
        {"generator": "neumann_modes", "params": {"k": 3, "radius": 2.0}},
    ],
)
def test_generators_produce_orthonormal_ensembles(spec):
    e = create_ensemble({**spec, "grid": GRID_1D})
    assert e.orthonormality_defect() <= 1e-10


def test_random_bumps_are_reproducible():
    spec = {"generator": "random_bumps", "seed": 11, "grid": GRID_1D,
            "params": {"n_fields": 3, "complex": True}}
    a, b = create_ensemble(spec), create_ensemble(spec)
    assert all(u.is_complex for u in a.fields)
    for u, v in zip(a.fields, b.fields):
        assert np.array_equal(u.values, v.values)


def test_random_weights_lie_in_unit_interval():
    e = create_ensemble({"generator": "random_bumps", "seed": 2, "grid": GRID_1D,
                         "params": {"n_fields": 4, "random_weights": True}})
    assert all(0.0 < w <= 1.0 for w in e.weights)


def test_hermite_2d_product_structure():
    e = create_ensemble({"generator": "hermite", "params": {"n_fields": 3},
                         "grid": {"dim": 2, "extent": [-6.0, 6.0], "points": 48}})
    assert e.size == 3
    assert e.orthonormality_defect() <= 1e-10


def test_neumann_modes_vanish_outside_the_ball():
    e = create_ensemble({"generator": "neumann_modes", "grid": GRID_1D,
                         "params": {"k": 2, "radius": 1.5}})
    x = e.grid.coordinates[:, 0]
    for u in e.fields:
        assert np.all(u.values[np.abs(x) > 1.5 + e.grid.spacing[0]] == 0.0)


def test_copies_is_a_family_not_an_ensemble():
    spec = {"generator": "copies", "grid": GRID_1D, "params": {"n_fields": 3}}
    family = create_family(spec)
    assert len(family) == 3
    assert all(np.array_equal(family[0].values, u.values) for u in family)
    with pytest.raises(InvalidInput):
        create_ensemble(spec)


def test_malformed_params():
    with pytest.raises(InvalidInput):
        create_ensemble({"generator": "gaussian", "grid": GRID_1D, "params": [1, 2]})
    with pytest.raises(InvalidInput):
        create_ensemble({"generator": "gaussian", "grid": GRID_1D,
                         "params": {"center": [0.0, 1.0]}})


# ═══════════════════════════════════════════════════════════════════════════
# 2. PERSISTENCIA
# ═══════════════════════════════════════════════════════════════════════════

def test_save_and_load_complex_ensemble(tmp_path):
    e = create_ensemble({"generator": "random_bumps", "seed": 5, "grid": GRID_1D,
                         "params": {"n_fields": 2, "complex": True},
                         "weights": [1.0, 0.5]})
    path = save_ensemble(e, tmp_path / "ens.json", config={"seed": 5})
    loaded = load_ensemble(path)
    assert loaded.weights == e.weights
    assert loaded.grid == e.grid
    for u, v in zip(e.fields, loaded.fields):
        assert np.array_equal(u.values, v.values)


def test_saved_document_keeps_config_and_sorted_keys(tmp_path):
    e = create_ensemble({"generator": "gaussian", "grid": GRID_1D})
    path = save_ensemble(e, tmp_path / "ens.json", config={"b": 1, "a": 2})
    text = path.read_text(encoding="utf-8")
    doc = json.loads(text)
    assert doc["config"] == {"a": 2, "b": 1}
    assert list(doc) == sorted(doc)


def test_ensemble_from_dict_ignores_config():
    e = create_ensemble({"generator": "sech", "grid": GRID_1D})
    doc = ensemble_to_dict(e, config={"anything": [1, 2, 3]})
    assert ensemble_from_dict(doc).size == 1


@pytest.mark.parametrize("missing", ["grid", "weights", "fields"])
def test_document_missing_key(missing):
    e = create_ensemble({"generator": "gaussian", "grid": GRID_1D})
    doc = ensemble_to_dict(e)
    del doc[missing]
    with pytest.raises(InvalidInput):
        ensemble_from_dict(doc)


def test_document_with_non_numeric_values():
    doc = {"grid": {"dim": 1, "extent": [0.0, 1.0], "points": 2},
           "weights": [1.0], "fields": [["a", "b"]]}
    with pytest.raises(InvalidInput):
        ensemble_from_dict(doc)


def test_document_with_non_orthonormal_fields():
    value = 1.0 / math.sqrt(0.5)
    doc = {"grid": {"dim": 1, "extent": [0.0, 1.0], "points": 2},
           "weights": [1.0, 1.0], "fields": [[value, 0.0], [value, 0.0]]}
    with pytest.raises(NotOrthonormal):
        ensemble_from_dict(doc)


def test_load_missing_and_corrupt_files(tmp_path):
    with pytest.raises(InvalidInput):
        load_ensemble(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(InvalidInput):
        load_ensemble(bad)


def test_loaded_grid_respects_budget():
    doc = {"grid": {"dim": 1, "extent": [0.0, 1.0], "points": 64},
           "weights": [1.0], "fields": [[1.0] * 64]}
    with pytest.raises(BudgetExceeded):
        ensemble_from_dict(doc, cell_budget=32)


def test_grid_from_generator_spec_matches_make_grid():
    e = create_ensemble({"generator": "gaussian", "grid": GRID_1D})
    assert e.grid == make_grid(1, [-8.0, 8.0], 256)
