"""
Tests de certificate.py: exclusión local, lema por bola, cadena global y
cota de familias normalizadas.
"""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import centered_grid
from covering import cover_density
from ensemble_factory import create_ensemble, create_family
from errors import InvalidInput, MassOutOfWindow, NotOrthonormal
from fields import Ensemble, density, dilate_ensemble, lt_quotient, make_ball, make_grid
from certificate import (
    MODE_COVERING,
    MODE_SMALL_MASS,
    build_certificate,
    certificate_to_dict,
    normalized_family_bound,
    render_certificate_table,
    save_certificate,
    verify_ball_lemma,
    verify_exclusion,
)


@pytest.fixture(scope="module")
def hermite_certificate(hermite4_1d):
    return build_certificate(hermite4_1d, 2.0)


@pytest.fixture(scope="module")
def hermite_covering(hermite4_1d):
    return cover_density(density(hermite4_1d), 2.0)


# ═══════════════════════════════════════════════════════════════════════════
# 1. EXCLUSIÓN LOCAL
# ═══════════════════════════════════════════════════════════════════════════

@pytest.mark.parametrize("dim, h, half_cells", [(1, 1.0 / 64, 128), (2, 1.0 / 8, 16)])
def test_exclusion_is_saturated_by_neumann_modes(dim, h, half_cells):
    grid = centered_grid(dim, h, half_cells)
    e = create_ensemble({"generator": "neumann_modes", "params": {"k": 2, "radius": 1.0}},
                        grid=grid)
    ball = make_ball(grid, (0.0,) * dim, 1.0)
    report = verify_exclusion(e, ball)
    assert report.mass == pytest.approx(2.0, rel=1e-12)
    assert report.holds
    assert report.lhs == pytest.approx(report.rhs, rel=1e-8)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10_000),
       n_fields=st.integers(min_value=1, max_value=6),
       radius=st.floats(min_value=0.3, max_value=3.0))
def test_exclusion_holds_for_random_ensembles(seed, n_fields, radius):
    """Property: Tr_B(-Δγ) ≥ gap·(∫_Bρ - 1) para cualquier proyector o pesos ≤ 1."""
    e = create_ensemble({
        "generator": "random_bumps", "seed": seed,
        "grid": {"dim": 1, "extent": [-6.0, 6.0], "points": 120},
        "params": {"n_fields": n_fields, "width": 0.8, "complex": seed % 2 == 1,
                   "random_weights": seed % 3 == 0},
    })
    ball = make_ball(e.grid, (0.05,), radius)
    if ball.n_cells < 2:
        return
    assert verify_exclusion(e, ball).holds


# ═══════════════════════════════════════════════════════════════════════════
# 2. LEMA POR BOLA
# ═══════════════════════════════════════════════════════════════════════════

def test_ball_lemma_on_covering_balls(hermite4_1d, hermite_covering):
    for ball, step in zip(hermite_covering.balls, hermite_covering.step_masses):
        report = verify_ball_lemma(hermite4_1d, ball, 2.0, 2.0 + step)
        assert report.holds
        assert report.uncertainty.fitted_constant >= 1.0
        assert report.epsilon > 0.0
        assert report.ratio >= report.a_priori_constant * (1 - 1e-9)


def test_ball_lemma_bracket_vanishes(hermite4_1d, hermite_covering):
    ball = hermite_covering.balls[0]
    report = verify_ball_lemma(hermite4_1d, ball, 2.0)
    c_u = report.uncertainty.fitted_constant
    expected = report.epsilon / (c_u * report.mass ** 2) * report.local_lhs_lemma
    assert report.combination_rhs == pytest.approx(expected, rel=1e-9)


def test_ball_lemma_mass_window(hermite4_1d, hermite_covering):
    ball = hermite_covering.balls[0]
    with pytest.raises(MassOutOfWindow):
        verify_ball_lemma(hermite4_1d, ball, 1.0)
    with pytest.raises(MassOutOfWindow):
        verify_ball_lemma(hermite4_1d, ball, 2.0, mass_upper=1.5)
    small = make_ball(hermite4_1d.grid, (0.01,), 0.05)
    with pytest.raises(MassOutOfWindow):
        verify_ball_lemma(hermite4_1d, small, 2.0)


# ═══════════════════════════════════════════════════════════════════════════
# 3. CERTIFICADO GLOBAL
# ═══════════════════════════════════════════════════════════════════════════

def test_small_mass_branch(gaussian_1d):
    cert = build_certificate(gaussian_1d, 2.0)
    assert cert.mode == MODE_SMALL_MASS
    assert cert.verdict
    assert len(cert.chain) == 3
    assert cert.ball_reports == ()
    assert cert.min_ratio is None
    assert cert.sobolev_constant == pytest.approx(math.pi * math.sqrt(3.0) / 2.0, rel=5e-3)
    assert cert.effective_constant == pytest.approx(cert.sobolev_constant, rel=1e-12)


def test_covering_branch(hermite_certificate):
    cert = hermite_certificate
    assert cert.mode == MODE_COVERING
    assert cert.verdict
    assert cert.covered
    assert len(cert.chain) == 4
    assert all(link.holds for link in cert.chain)
    assert cert.multiplicity <= 2
    assert cert.sobolev_constant is None
    assert cert.effective_constant > 0.0
    assert cert.effective_constant <= cert.direct_quotient * (1 + 1e-9)


def test_effective_constant_is_dilation_invariant(hermite4_1d, hermite_certificate):
    # ℓ = 4 en d = 1: amplitud 2 y espaciado h/4, ambos exactos en binario
    dilated = build_certificate(dilate_ensemble(hermite4_1d, 4.0), 2.0)
    assert dilated.effective_constant == pytest.approx(
        hermite_certificate.effective_constant, rel=1e-9
    )
    assert dilated.direct_quotient == pytest.approx(
        hermite_certificate.direct_quotient, rel=1e-9
    )


def test_clusters_are_certified():
    e = create_ensemble({
        "generator": "clusters",
        "grid": {"dim": 1, "extent": [-15.0, 15.0], "points": 600},
        "params": {"n_per_cluster": 3, "separation": 14.0},
    })
    cert = build_certificate(e, 2.0, workers=4)
    assert cert.mode == MODE_COVERING
    assert cert.verdict


@pytest.mark.parametrize("seed", [3, 7])
def test_random_bumps_2d_are_certified(seed):
    e = create_ensemble({
        "generator": "random_bumps", "seed": seed,
        "grid": {"dim": 2, "extent": [-6.0, 6.0], "points": 28},
        "params": {"n_fields": 4, "width": 1.5},
    })
    cert = build_certificate(e, 2.0, workers=4)
    assert cert.verdict
    assert cert.multiplicity <= 19


def corpus_ensemble(seed, dim, points):
    """Corpus sembrado: d = 1 con N ≤ 8, d = 2 con N ≤ 4; N = 1 fuerza la rama de masa pequeña."""
    n_fields = 1 + seed % (8 if dim == 1 else 4)
    extent = [-10.0, 10.0] if dim == 1 else [-6.0, 6.0]
    return create_ensemble({
        "generator": "random_bumps", "seed": seed,
        "grid": {"dim": dim, "extent": extent, "points": points},
        "params": {"n_fields": n_fields, "width": 1.0 if dim == 1 else 1.2,
                   "complex": seed % 2 == 1, "random_weights": seed % 3 == 0},
    })


def assert_certified(e):
    cert = build_certificate(e, 2.0, workers=4)
    assert cert.verdict
    mass = sum(e.weights)
    if mass < 2.0 - 1e-9:
        assert cert.mode == MODE_SMALL_MASS
        assert len(cert.chain) == 3
    elif mass > 2.0 + 1e-9:
        assert cert.mode == MODE_COVERING
        assert len(cert.chain) == 4
    return cert


@pytest.mark.parametrize("seed", range(8))
def test_one_dimensional_corpus(seed):
    assert_certified(corpus_ensemble(seed, 1, 2048))


@pytest.mark.parametrize("seed", range(4))
def test_two_dimensional_corpus(seed):
    cert = assert_certified(corpus_ensemble(seed, 2, 48))
    assert cert.mode == MODE_SMALL_MASS or cert.multiplicity <= 19


def test_corpus_reaches_both_branches():
    masses = [sum(corpus_ensemble(seed, 1, 256).weights) for seed in range(8)]
    assert min(masses) < 2.0 - 1e-9
    assert max(masses) > 2.0 + 1e-9


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(100))
def test_one_dimensional_corpus_full(seed):
    assert_certified(corpus_ensemble(seed, 1, 2048))


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(100))
def test_two_dimensional_corpus_full(seed):
    assert_certified(corpus_ensemble(seed, 2, 128))


def test_certificate_rejects_bad_input(hermite4_1d):
    with pytest.raises(MassOutOfWindow):
        build_certificate(hermite4_1d, 1.0)


def test_certificate_reverifies_orthonormality(hermite4_1d):
    fake = object.__new__(Ensemble)
    u = hermite4_1d.fields[0]
    object.__setattr__(fake, "weights", (1.0, 1.0))
    object.__setattr__(fake, "fields", (u, u))
    with pytest.raises(NotOrthonormal):
        build_certificate(fake, 2.0)


# ═══════════════════════════════════════════════════════════════════════════
# 4. FAMILIAS NORMALIZADAS
# ═══════════════════════════════════════════════════════════════════════════

@pytest.mark.parametrize("dim", [1, 2])
@pytest.mark.parametrize("n", [2, 4, 8])
def test_copies_scale_as_inverse_power(dim, n):
    grid = make_grid(dim, [-8.0, 8.0], 400 if dim == 1 else 48)
    spec = {"generator": "copies", "params": {"n_fields": n}}
    family = create_family(spec, grid=grid)
    single = lt_quotient(create_ensemble({"generator": "gaussian"}, grid=grid))
    bound = normalized_family_bound(family)
    assert bound.copies_quotient == pytest.approx(single * n ** (-2.0 / dim), rel=1e-10)
    assert bound.ratio == pytest.approx(1.0, rel=1e-12)


def test_orthogonal_family_against_copies(hermite4_1d):
    bound = normalized_family_bound(list(hermite4_1d.fields))
    assert bound.n == 4
    assert bound.orthogonal_quotient == pytest.approx(lt_quotient(hermite4_1d), rel=1e-12)
    assert bound.ratio == pytest.approx(bound.orthogonal_quotient / bound.copies_quotient)


def test_family_must_be_normalized(gaussian_1d):
    u = gaussian_1d.fields[0]
    with pytest.raises(InvalidInput):
        normalized_family_bound([u, u * 1.1])
    with pytest.raises(InvalidInput):
        normalized_family_bound([])


# ═══════════════════════════════════════════════════════════════════════════
# 5. EXPORTACIÓN
# ═══════════════════════════════════════════════════════════════════════════

def test_certificate_document(hermite_certificate):
    doc = certificate_to_dict(hermite_certificate, config={"seed": 0})
    text = json.dumps(doc, sort_keys=True)
    assert json.loads(text)["verdict"] is True
    assert doc["config"] == {"seed": 0}
    assert len(doc["ball_reports"]) == len(hermite_certificate.ball_reports)


def test_certificate_table(hermite_certificate):
    table = render_certificate_table(hermite_certificate)
    assert "VEREDICTO" in table
    assert table.count("≥") >= len(hermite_certificate.chain)


def test_save_certificate(tmp_path, gaussian_1d):
    cert = build_certificate(gaussian_1d, 2.0)
    json_path, text_path = save_certificate(cert, tmp_path, config={"command": "verify"})
    assert json.loads(json_path.read_text(encoding="utf-8"))["config"]["command"] == "verify"
    assert "VEREDICTO" in text_path.read_text(encoding="utf-8")


def test_direct_quotient_matches_lt_quotient(gaussian_1d):
    cert = build_certificate(gaussian_1d, 2.0)
    assert cert.direct_quotient == pytest.approx(lt_quotient(gaussian_1d), rel=1e-12)
    assert np.isfinite(cert.global_rhs)
