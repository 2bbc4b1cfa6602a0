"""
================================================================================
SPECTRAL — spectral.py
================================================================================
Proyecto: Laboratorio numérico de la desigualdad cinética de Lieb–Thirring.

Propósito: Análisis espectral local. Construye el Laplaciano de Neumann
           discreto de una bola, calcula su gap (segundo autovalor), comprueba
           la desigualdad de Hoffmann-Ostenhof y mide las constantes de
           incertidumbre local y de Sobolev.

Relación con fields.py:

    Para u soportado en la bola B,

        gradient_energy(u, B.mask, interior=True) = vol · uᵀ L u,

    con L = neumann_laplacian(B). Como la norma L² discreta es vol · uᵀu, los
    autovalores de L son directamente los del problema de Neumann en la
    métrica de la cuadratura: no hace falta matriz de masa.

Autosolver:

    - Máscaras con ≤ DENSE_EIGEN_LIMIT celdas: scipy.linalg.eigh denso,
      solo los dos autovalores más bajos.
    - Máscaras mayores: Lanczos (ARPACK, eigsh) sobre el operador
      shift-invert Π (L + σI)^{-1} Π, con Π el proyector que elimina el
      vector constante. El mayor autovalor μ da gap = 1/μ - σ. La
      factorización es splu y el vector inicial es fijo (semilla).

Autor: [Proyecto académico]
Fecha: 2026-02
================================================================================
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd
import scipy.linalg
import scipy.ndimage
import scipy.sparse
import scipy.sparse.linalg

from errors import (
    DisconnectedMask,
    GapUndefined,
    GridMismatch,
    SolverNoConvergence,
    ZeroField,
    ZeroOnBall,
)
from fields import (
    Ball,
    Ensemble,
    Field,
    Grid,
    density,
    gradient_energy,
    integrate,
    kinetic_energy,
    lt_exponent,
    make_ball,
    make_grid,
    map_in_order,
)

logger = logging.getLogger(__name__)


# ══════════════════════════════════════════════════════════════════════════════
# 1. CONFIGURACIÓN
# ══════════════════════════════════════════════════════════════════════════════

DENSE_EIGEN_LIMIT = 4000
LANCZOS_TOL = 1e-6
HO_SLACK = 1e-9

# Celdas por radio en el barrido de radios con refinamiento proporcional
DEFAULT_CELLS_PER_RADIUS = 32


# ══════════════════════════════════════════════════════════════════════════════
# 2. INFORMES
# ══════════════════════════════════════════════════════════════════════════════

@dataclass(frozen=True)
class GapReport:
    """
    Gap de Neumann de una bola.

    Atributos
    ---------
    ball : Ball
    gap : float
        Segundo autovalor más pequeño del Laplaciano de Neumann (≥ 0).
    gap_times_volume_pow : float
        gap · |B|^{2/d}, invariante de escala.
    ground_residual : float
        max |L·1| relativo a la diagonal máxima (0 salvo redondeo).
    solver : str
        "dense" o "lanczos".
    cells : int
    """

    ball: Ball
    gap: float
    gap_times_volume_pow: float
    ground_residual: float
    solver: str
    cells: int

    def to_dict(self) -> dict:
        return {
            **self.ball.to_dict(),
            "gap": self.gap,
            "gap_times_volume_pow": self.gap_times_volume_pow,
            "ground_residual": self.ground_residual,
            "solver": self.solver,
        }


@dataclass(frozen=True)
class HOReport:
    """∫|∇√ρ|² (lhs) frente a Tr(-Δγ) (rhs), opcionalmente en una máscara."""

    lhs: float
    rhs: float
    holds: bool

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


@dataclass(frozen=True)
class UncertaintyReport:
    """
    Funcionales de incertidumbre local de g sobre una región.

    kinetic ≥ interaction / C - C · volume_term con C = fitted_constant.
    """

    region: Ball
    kinetic: float
    interaction: float
    volume_term: float
    fitted_constant: float
    mass: float

    def to_dict(self) -> dict:
        return {
            "kinetic": self.kinetic,
            "interaction": self.interaction,
            "volume_term": self.volume_term,
            "fitted_constant": self.fitted_constant,
            "mass": self.mass,
        }


# ══════════════════════════════════════════════════════════════════════════════
# 3. LAPLACIANO DE NEUMANN
# ══════════════════════════════════════════════════════════════════════════════

def _check_ball_grid(ball: Ball, grid: Grid) -> None:
    if ball.grid != grid:
        raise GridMismatch(f"La bola vive en {ball.grid}, no en {grid}.")


def check_connected(mask: np.ndarray, grid: Grid) -> int:
    """
    Número de componentes conexas (adyacencia por ejes) de la máscara.

    Raises
    ------
    DisconnectedMask : si hay más de una componente.
    """
    structure = scipy.ndimage.generate_binary_structure(grid.dim, 1)
    _, n_components = scipy.ndimage.label(mask.reshape(grid.shape), structure=structure)
    if n_components > 1:
        raise DisconnectedMask(
            f"La máscara tiene {n_components} componentes conexas; el gap "
            f"de Neumann sería 0."
        )
    return n_components


def neumann_laplacian(ball: Ball, grid: Grid) -> scipy.sparse.csr_matrix:
    """
    Laplaciano de grafo de Neumann sobre las celdas de la bola.

    Cada par de celdas adyacentes a lo largo del eje a, ambas dentro de la
    máscara, aporta un peso 1/h_a². Filas y columnas siguen el orden
    ascendente de índice plano de las celdas de la bola.

    Retorna
    -------
    csr_matrix : simétrica, semidefinida positiva, filas de suma cero.

    Raises
    ------
    GridMismatch, DisconnectedMask
    """
    _check_ball_grid(ball, grid)
    check_connected(ball.mask, grid)

    cells = ball.cells
    n = cells.size
    local = np.full(grid.n_cells, -1, dtype=np.int64)
    local[cells] = np.arange(n)
    mask = ball.mask.reshape(grid.shape)
    flat = np.arange(grid.n_cells).reshape(grid.shape)

    rows, cols, data = [], [], []
    degree = np.zeros(n)
    for axis in range(grid.dim):
        n_axis = grid.points[axis]
        if n_axis < 2:
            continue
        lower = np.take(mask, np.arange(n_axis - 1), axis=axis)
        upper = np.take(mask, np.arange(1, n_axis), axis=axis)
        pair = lower & upper
        a = local[np.take(flat, np.arange(n_axis - 1), axis=axis)[pair]]
        b = local[np.take(flat, np.arange(1, n_axis), axis=axis)[pair]]
        w = 1.0 / grid.spacing[axis] ** 2
        rows.extend([a, b])
        cols.extend([b, a])
        data.extend([np.full(a.size, -w), np.full(b.size, -w)])
        np.add.at(degree, a, w)
        np.add.at(degree, b, w)

    rows.append(np.arange(n))
    cols.append(np.arange(n))
    data.append(degree)
    laplacian = scipy.sparse.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    ).tocsr()
    return laplacian


def _ground_residual(laplacian: scipy.sparse.csr_matrix) -> float:
    scale = float(laplacian.diagonal().max()) if laplacian.shape[0] else 0.0
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(laplacian @ np.ones(laplacian.shape[0])))) / scale


# ══════════════════════════════════════════════════════════════════════════════
# 4. GAP Y MODOS
# ══════════════════════════════════════════════════════════════════════════════

def _lanczos_gap(
    laplacian: scipy.sparse.csr_matrix, shift: float, tol: float, seed: int,
) -> float:
    n = laplacian.shape[0]
    lu = scipy.sparse.linalg.splu(
        (laplacian + shift * scipy.sparse.identity(n, format="csr")).tocsc()
    )

    def project(x: np.ndarray) -> np.ndarray:
        return x - x.mean()

    operator = scipy.sparse.linalg.LinearOperator(
        (n, n), matvec=lambda x: project(lu.solve(project(np.ravel(x)))), dtype=float,
    )
    v0 = project(np.random.default_rng(seed).standard_normal(n))
    try:
        mu = scipy.sparse.linalg.eigsh(
            operator, k=1, which="LA", v0=v0, tol=tol, return_eigenvectors=False,
        )[0]
    except scipy.sparse.linalg.ArpackNoConvergence as e:
        raise SolverNoConvergence(f"Lanczos no convergió en el gap de Neumann: {e}") from None
    return 1.0 / float(mu) - shift


def neumann_gap(
    ball: Ball,
    grid: Grid,
    dense_limit: int = DENSE_EIGEN_LIMIT,
    tol: float = LANCZOS_TOL,
    seed: int = 0,
) -> GapReport:
    """
    Gap de Neumann de la bola (segundo autovalor más pequeño).

    Parámetros
    ----------
    ball, grid : bola y malla (deben coincidir).
    dense_limit : int
        Máximo de celdas para el solver denso.
    tol : float
        Tolerancia de ARPACK (solo Lanczos).
    seed : int
        Semilla del vector inicial de Lanczos.

    Raises
    ------
    GapUndefined : bola de una sola celda.
    DisconnectedMask, GridMismatch, SolverNoConvergence
    """
    if ball.n_cells < 2:
        raise GapUndefined(f"{ball} tiene una sola celda: no hay segundo autovalor.")
    laplacian = neumann_laplacian(ball, grid)
    n = laplacian.shape[0]

    if n <= dense_limit:
        values = scipy.linalg.eigh(
            laplacian.toarray(), eigvals_only=True, subset_by_index=[0, 1],
        )
        gap, solver = float(values[1]), "dense"
    else:
        shift = 1.0 / ball.radius ** 2
        gap, solver = _lanczos_gap(laplacian, shift, tol, seed), "lanczos"

    gap = max(gap, 0.0)
    report = GapReport(
        ball=ball,
        gap=gap,
        gap_times_volume_pow=gap * ball.volume ** (2.0 / grid.dim),
        ground_residual=_ground_residual(laplacian),
        solver=solver,
        cells=n,
    )
    logger.debug(
        f"[spectral] {ball} | gap={gap:.6g} | gap·|B|^(2/d)="
        f"{report.gap_times_volume_pow:.6g} | {solver}"
    )
    return report


def neumann_modes(
    ball: Ball,
    grid: Grid,
    k: int,
    dense_limit: int = DENSE_EIGEN_LIMIT,
) -> list[Field]:
    """
    Las k autofunciones de Neumann más bajas, normalizadas en L² y nulas
    fuera de la bola.

    El signo de cada modo se fija haciendo positiva su entrada de mayor
    módulo (la primera, en caso de empate).
    """
    laplacian = neumann_laplacian(ball, grid)
    n = laplacian.shape[0]
    if not 1 <= k <= n:
        raise GapUndefined(f"Se piden {k} modos de una bola con {n} celdas.")

    if n <= dense_limit:
        _, vectors = scipy.linalg.eigh(laplacian.toarray(), subset_by_index=[0, k - 1])
    else:
        shift = 1.0 / ball.radius ** 2
        values, vectors = scipy.sparse.linalg.eigsh(
            laplacian, k=k, sigma=-shift, which="LM",
            v0=np.random.default_rng(0).standard_normal(n),
        )
        vectors = vectors[:, np.argsort(values)]

    cells = ball.cells
    scale = 1.0 / math.sqrt(grid.cell_volume)
    modes = []
    for j in range(k):
        v = vectors[:, j]
        pivot = int(np.argmax(np.abs(v)))
        if v[pivot] < 0:
            v = -v
        values_full = np.zeros(grid.n_cells)
        values_full[cells] = v * scale
        modes.append(Field(grid, values_full))
    return modes


# ══════════════════════════════════════════════════════════════════════════════
# 5. HOFFMANN-OSTENHOF E INCERTIDUMBRE
# ══════════════════════════════════════════════════════════════════════════════

def sqrt_density(e: Ensemble) -> Field:
    """√ρ como campo real no negativo."""
    rho = density(e)
    return Field(e.grid, np.sqrt(np.maximum(rho.values, 0.0)))


def hoffmann_ostenhof_check(
    e: Ensemble,
    mask: Optional[np.ndarray] = None,
    interior: bool = False,
    slack: float = HO_SLACK,
) -> HOReport:
    """
    Compara ∫|∇√ρ|² con Tr(-Δγ) sobre la misma máscara.

    Para diferencias finitas la desigualdad es exacta (desigualdad
    triangular inversa en ℓ² sobre cada arista), así que holds debe ser
    siempre True salvo redondeo; la holgura es relativa a max(1, rhs).
    """
    lhs = gradient_energy(sqrt_density(e), mask, interior)
    rhs = kinetic_energy(e, mask, interior)
    return HOReport(lhs=lhs, rhs=rhs, holds=lhs <= rhs + slack * max(1.0, abs(rhs)))


def local_uncertainty_measure(g: Field, ball: Ball) -> UncertaintyReport:
    """
    Mide la incertidumbre local de g en la bola y ajusta la constante C.

    K = ∫_B|∇g|² (forma interior), I = ∫_B|g|^{2p} / (∫_B|g|²)^{2/d},
    V = |B|^{-2/d} ∫_B|g|². C es el menor C ≥ 1 con K ≥ I/C - C·V:
    C = 1 si K ≥ I - V, y si no la raíz positiva de V C² + K C - I = 0.

    Raises
    ------
    ZeroOnBall : si g se anula en toda la bola.
    """
    if g.grid != ball.grid:
        raise GridMismatch("El campo y la bola viven en mallas distintas.")
    dim = g.grid.dim
    p = lt_exponent(dim)
    abs2 = g.abs2()
    mass = integrate(abs2, g.grid, ball.mask)
    if mass <= 0.0:
        raise ZeroOnBall(f"El campo es nulo sobre {ball}.")

    kinetic = gradient_energy(g, ball.mask, interior=True)
    interaction = integrate(abs2 ** p, g.grid, ball.mask) / mass ** (2.0 / dim)
    volume_term = ball.volume ** (-2.0 / dim) * mass

    if kinetic >= interaction - volume_term:
        constant = 1.0
    else:
        constant = (
            -kinetic + math.sqrt(kinetic ** 2 + 4.0 * volume_term * interaction)
        ) / (2.0 * volume_term)
        constant = max(constant, 1.0)

    return UncertaintyReport(
        region=ball,
        kinetic=kinetic,
        interaction=interaction,
        volume_term=volume_term,
        fitted_constant=constant,
        mass=mass,
    )


def sobolev_quotient(g: Field) -> float:
    """
    Cociente de Sobolev ∫|∇g|² (∫|g|²)^{2/d} / ∫|g|^{2p}.

    Invariante por dilatación y por escalado de amplitud.

    Raises
    ------
    ZeroField
    """
    dim = g.grid.dim
    abs2 = g.abs2()
    mass = integrate(abs2, g.grid)
    if mass <= 0.0:
        raise ZeroField("El cociente de Sobolev no está definido para g = 0.")
    power = integrate(abs2 ** lt_exponent(dim), g.grid)
    return gradient_energy(g) * mass ** (2.0 / dim) / power


# ══════════════════════════════════════════════════════════════════════════════
# 6. LEY DE ESCALA DEL GAP
# ══════════════════════════════════════════════════════════════════════════════

def scaled_ball_grid(
    center: Sequence[float], radius: float, dim: int, cells_per_radius: int,
) -> Grid:
    """
    Malla cuadrada centrada en `center` con h = radius / cells_per_radius.

    El número de celdas por eje es impar, de modo que `center` es el centro
    de la celda central y la máscara de la bola es la misma para cualquier
    radio.
    """
    h = radius / cells_per_radius
    n = 2 * cells_per_radius + 3
    extent = [[c - 0.5 * n * h, c + 0.5 * n * h] for c in center]
    return make_grid(dim, extent, n)


def gap_radius_sweep(
    center: Sequence[float],
    radii: Sequence[float],
    dim: int,
    cells_per_radius: Optional[int] = None,
    grid: Optional[Grid] = None,
    dense_limit: int = DENSE_EIGEN_LIMIT,
    workers: int = 1,
) -> list[GapReport]:
    """
    Gap de Neumann para una serie de radios en torno a un centro.

    Con `grid` dado, todas las bolas se discretizan en la misma malla (el
    número de celdas crece con el radio). Sin `grid`, cada radio usa su
    propia malla con `cells_per_radius` celdas por radio, y gap·|B|^{2/d}
    queda constante salvo redondeo.
    """
    center = tuple(float(c) for c in center)
    if len(center) != dim:
        raise GridMismatch(f"Centro {center} no tiene dimensión {dim}.")
    if grid is None and cells_per_radius is None:
        cells_per_radius = DEFAULT_CELLS_PER_RADIUS

    def one(radius: float) -> GapReport:
        g = grid if grid is not None else scaled_ball_grid(
            center, radius, dim, cells_per_radius
        )
        return neumann_gap(make_ball(g, center, radius), g, dense_limit=dense_limit)

    reports = map_in_order(one, [float(r) for r in radii], workers)
    for r in reports:
        logger.info(
            f"[spectral] r={r.ball.radius:.4g} | celdas={r.cells} | "
            f"gap={r.gap:.6g} | gap·|B|^(2/d)={r.gap_times_volume_pow:.6g}"
        )
    return reports


def gap_reports_to_frame(reports: Sequence[GapReport]) -> pd.DataFrame:
    """Tabla de informes de gap (una fila por bola)."""
    return pd.DataFrame(
        [
            {
                "ball_center": " ".join(f"{c:.12g}" for c in r.ball.center),
                "radius": r.ball.radius,
                "volume": r.ball.volume,
                "cells": r.cells,
                "gap": r.gap,
                "gap_times_volume_pow": r.gap_times_volume_pow,
                "solver": r.solver,
            }
            for r in reports
        ]
    )
