"""
================================================================================
ENSEMBLE FACTORY — ensemble_factory.py
================================================================================
Proyecto: Laboratorio numérico de la desigualdad cinética de Lieb–Thirring.

Propósito: Crear ensembles de prueba de forma controlada y reproducible,
           validando la especificación (generador, malla, parámetros) antes
           de construir nada.

Uso:
    from ensemble_factory import create_ensemble

    ensemble = create_ensemble({
        "generator": "hermite",
        "grid": {"dim": 1, "extent": [-10, 10], "points": 2000},
        "params": {"n_fields": 4, "sigma": 1.0},
    })

Especificación:
    generator : str       nombre registrado en GENERATOR_REGISTRY
    grid      : dict      {dim, extent, points}; se puede pasar la malla aparte
    params    : dict      parámetros propios del generador
    seed      : int       semilla (generadores aleatorios)
    weights   : float | list[float]   pesos λ_n (por defecto todos 1)

Cómo añadir un generador:
    1. Escribir una función _build_<nombre>(grid, params, rng) -> list[Field]
       que devuelva campos ortonormales (o una familia, si kind="family").
    2. Añadir la entrada en GENERATOR_REGISTRY con builder, kind y description.

Autor: [Proyecto académico]
Fecha: 2026-02
================================================================================
"""

import itertools
import logging
import math
from typing import Any, Optional

import numpy as np

from errors import InvalidInput, LaboratoryError
from fields import (
    Ensemble,
    Field,
    Grid,
    field_from_function,
    grid_from_dict,
    make_ball,
    normalize,
    orthonormalize,
)

logger = logging.getLogger(__name__)


# ══════════════════════════════════════════════════════════════════════════════
# 1. FUNCIONES BASE
# ══════════════════════════════════════════════════════════════════════════════

def _center(params: dict, dim: int, key: str = "center") -> np.ndarray:
    c = np.asarray(params.get(key, 0.0), dtype=float)
    if c.ndim == 0:
        c = np.full(dim, float(c))
    if c.shape != (dim,):
        raise InvalidInput(f"'{key}' debe ser un escalar o una lista de {dim} valores.")
    return c


def hermite_functions(x: np.ndarray, n: int) -> list[np.ndarray]:
    """
    Primeras n funciones de Hermite ψ_k(x) = (2^k k! √π)^{-1/2} H_k(x) e^{-x²/2}.

    Recurrencia estable de tres términos (sin evaluar H_k directamente).
    """
    out = []
    psi_prev = np.zeros_like(x)
    psi = math.pi ** -0.25 * np.exp(-0.5 * x * x)
    for k in range(n):
        out.append(psi)
        psi_next = math.sqrt(2.0 / (k + 1)) * x * psi - math.sqrt(k / (k + 1)) * psi_prev
        psi_prev, psi = psi, psi_next
    return out


def hermite_multi_indices(dim: int, n: int) -> list[tuple[int, ...]]:
    """Primeros n multiíndices ordenados por grado total y luego lexicográficamente."""
    degree = 0
    indices: list[tuple[int, ...]] = []
    while len(indices) < n:
        shell = [
            idx for idx in itertools.product(range(degree + 1), repeat=dim)
            if sum(idx) == degree
        ]
        indices.extend(sorted(shell))
        degree += 1
    return indices[:n]


def _hermite_family(grid: Grid, n: int, sigma: float, center: np.ndarray) -> list[Field]:
    coords = grid.coordinates
    per_axis = [
        hermite_functions((coords[:, a] - center[a]) / sigma, n) for a in range(grid.dim)
    ]
    fields = []
    for idx in hermite_multi_indices(grid.dim, n):
        values = np.ones(grid.n_cells)
        for a, k in enumerate(idx):
            values = values * per_axis[a][k]
        fields.append(Field(grid, values))
    return fields


# ══════════════════════════════════════════════════════════════════════════════
# 2. GENERADORES
# ══════════════════════════════════════════════════════════════════════════════

def _build_gaussian(grid: Grid, params: dict, rng: np.random.Generator) -> list[Field]:
    sigma = float(params.get("sigma", 1.0))
    c = _center(params, grid.dim)

    def gaussian(*xs):
        r2 = sum((x - c[a]) ** 2 for a, x in enumerate(xs))
        return np.exp(-0.5 * r2 / sigma ** 2)

    return [normalize(field_from_function(grid, gaussian))]


def _build_sech(grid: Grid, params: dict, rng: np.random.Generator) -> list[Field]:
    sigma = float(params.get("sigma", 1.0))
    c = _center(params, grid.dim)

    def sech(*xs):
        values = np.ones_like(xs[0])
        for a, x in enumerate(xs):
            values = values / np.cosh((x - c[a]) / sigma)
        return values

    return [normalize(field_from_function(grid, sech))]


def _build_hermite(grid: Grid, params: dict, rng: np.random.Generator) -> list[Field]:
    n = int(params.get("n_fields", 1))
    sigma = float(params.get("sigma", 1.0))
    return orthonormalize(_hermite_family(grid, n, sigma, _center(params, grid.dim)))


def _build_random_bumps(grid: Grid, params: dict, rng: np.random.Generator) -> list[Field]:
    """
    N bultos gaussianos en posiciones aleatorias del 60% central de la caja,
    ortonormalizados. Con complex=True cada bulto lleva una fase plana e^{ik·x}.
    """
    n = int(params.get("n_fields", 3))
    width = float(params.get("width", 1.0))
    use_complex = bool(params.get("complex", False))
    coords = grid.coordinates
    lo = np.array([e[0] for e in grid.extent])
    hi = np.array([e[1] for e in grid.extent])
    mid, half = 0.5 * (lo + hi), 0.3 * (hi - lo)

    raw = []
    for _ in range(n):
        center = rng.uniform(mid - half, mid + half)
        sigma = width * rng.uniform(0.5, 1.5)
        r2 = np.sum((coords - center) ** 2, axis=1)
        values = np.exp(-0.5 * r2 / sigma ** 2)
        if use_complex:
            k = rng.normal(0.0, 1.0 / sigma, size=grid.dim)
            values = values * np.exp(1j * (coords @ k))
        raw.append(Field(grid, values))
    return orthonormalize(raw)


def _build_clusters(grid: Grid, params: dict, rng: np.random.Generator) -> list[Field]:
    """Dos grupos de funciones de Hermite separados a lo largo del primer eje."""
    n_per = int(params.get("n_per_cluster", 2))
    sigma = float(params.get("sigma", 1.0))
    separation = float(params.get("separation", 10.0))
    shift = np.zeros(grid.dim)
    shift[0] = 0.5 * separation
    left = _hermite_family(grid, n_per, sigma, -shift)
    right = _hermite_family(grid, n_per, sigma, shift)
    return orthonormalize(left + right)


def _build_neumann_modes(grid: Grid, params: dict, rng: np.random.Generator) -> list[Field]:
    from spectral import neumann_modes

    k = int(params.get("k", 2))
    radius = float(params.get("radius", 1.0))
    ball = make_ball(grid, _center(params, grid.dim), radius)
    return orthonormalize(neumann_modes(ball, grid, k))


def _build_copies(grid: Grid, params: dict, rng: np.random.Generator) -> list[Field]:
    """N copias idénticas de un campo normalizado (familia, no ensemble)."""
    n = int(params.get("n_fields", 2))
    base = params.get("base", {"generator": "gaussian"})
    single = create_family({**base, "grid": grid.to_dict()}, grid=grid)[0]
    return [single] * n


# ──────────────────────────────────────────────────────────────────────────────
# REGISTRO DE GENERADORES
#
# kind = "ensemble": el builder devuelve campos ortonormales.
# kind = "family":   familia arbitraria, solo para normalized_family_bound.
# ──────────────────────────────────────────────────────────────────────────────
GENERATOR_REGISTRY: dict[str, dict[str, Any]] = {
    "gaussian": {
        "builder": _build_gaussian,
        "kind": "ensemble",
        "description": "Una gaussiana normalizada (params: sigma, center).",
    },
    "sech": {
        "builder": _build_sech,
        "kind": "ensemble",
        "description": "Secante hiperbólica normalizada (params: sigma, center).",
    },
    "hermite": {
        "builder": _build_hermite,
        "kind": "ensemble",
        "description": (
            "Primeras N funciones de Hermite; productos tensoriales por grado "
            "total en d ≥ 2 (params: n_fields, sigma, center)."
        ),
    },
    "random_bumps": {
        "builder": _build_random_bumps,
        "kind": "ensemble",
        "description": (
            "N bultos gaussianos aleatorios ortonormalizados "
            "(params: n_fields, width, complex, random_weights)."
        ),
    },
    "clusters": {
        "builder": _build_clusters,
        "kind": "ensemble",
        "description": (
            "Dos grupos de Hermite muy separados "
            "(params: n_per_cluster, sigma, separation)."
        ),
    },
    "neumann_modes": {
        "builder": _build_neumann_modes,
        "kind": "ensemble",
        "description": (
            "k autofunciones de Neumann más bajas de una bola, nulas fuera "
            "(params: k, center, radius)."
        ),
    },
    "copies": {
        "builder": _build_copies,
        "kind": "family",
        "description": "N copias de un campo normalizado (params: n_fields, base).",
    },
}


def get_available_generators() -> list[str]:
    return list(GENERATOR_REGISTRY.keys())


def list_generators() -> dict[str, str]:
    """{nombre: descripción} de cada generador registrado."""
    return {name: info["description"] for name, info in GENERATOR_REGISTRY.items()}


# ══════════════════════════════════════════════════════════════════════════════
# 3. FUNCIÓN PRINCIPAL: create_ensemble
# ══════════════════════════════════════════════════════════════════════════════

def _resolve(spec: dict, grid: Optional[Grid]) -> tuple[str, Grid, dict, np.random.Generator]:
    if not isinstance(spec, dict):
        raise InvalidInput("La especificación del generador debe ser un objeto.")
    name = str(spec.get("generator", "")).lower().strip()
    if name not in GENERATOR_REGISTRY:
        raise InvalidInput(
            f"Generador '{name}' no reconocido. "
            f"Opciones disponibles: {get_available_generators()}"
        )
    if grid is None:
        if "grid" not in spec:
            raise InvalidInput(f"El generador '{name}' necesita una malla ('grid').")
        grid = grid_from_dict(spec["grid"])
    params = spec.get("params", {})
    if not isinstance(params, dict):
        raise InvalidInput("'params' debe ser un objeto.")
    rng = np.random.default_rng(int(spec.get("seed", 0)))
    return name, grid, params, rng


def create_family(spec: dict, grid: Optional[Grid] = None) -> list[Field]:
    """
    Construye la familia de campos de cualquier generador (incluido "copies").

    Retorna
    -------
    list[Field] : campos normalizados (ortonormales salvo kind="family").
    """
    name, grid, params, rng = _resolve(spec, grid)
    try:
        return GENERATOR_REGISTRY[name]["builder"](grid, params, rng)
    except LaboratoryError:
        raise
    except (TypeError, ValueError) as e:
        raise InvalidInput(f"Parámetros inválidos para '{name}': {e}") from None


def _resolve_weights(spec: dict, n: int, params: dict, rng: np.random.Generator) -> tuple:
    if params.get("random_weights", False):
        return tuple(float(w) for w in rng.uniform(0.2, 1.0, size=n))
    raw = spec.get("weights", 1.0)
    if np.ndim(raw) == 0:
        return tuple(float(raw) for _ in range(n))
    return tuple(float(w) for w in raw)


def create_ensemble(spec: dict, grid: Optional[Grid] = None) -> Ensemble:
    """
    Crea un ensemble validado a partir de una especificación de generador.

    Parámetros
    ----------
    spec : dict
        {generator, grid, params, seed, weights}; ver cabecera del módulo.
    grid : Grid, opcional
        Si se pasa, sustituye a spec["grid"].

    Retorna
    -------
    Ensemble

    Raises
    ------
    InvalidInput : generador desconocido, parámetros mal formados o
                   generador de tipo "family".
    """
    name, resolved_grid, params, _ = _resolve(spec, grid)
    if GENERATOR_REGISTRY[name]["kind"] != "ensemble":
        raise InvalidInput(
            f"El generador '{name}' produce una familia no ortonormal; "
            f"úsese create_family."
        )

    logger.info("=" * 70)
    logger.info(f"ENSEMBLE FACTORY — Generador '{name}'")
    logger.info("=" * 70)

    fields = create_family(spec, grid=resolved_grid)
    rng = np.random.default_rng(int(spec.get("seed", 0)) + 1)
    weights = _resolve_weights(spec, len(fields), params, rng)
    ensemble = Ensemble(weights=weights, fields=tuple(fields))

    logger.info(f"  ✓ {ensemble}")
    return ensemble
