"""
================================================================================
FIELDS — fields.py
================================================================================
Proyecto: Laboratorio numérico de la desigualdad cinética de Lieb–Thirring.

Propósito: Sustrato de datos de todo el laboratorio. Define la malla uniforme
           (Grid), los campos escalares muestreados sobre ella (Field), las
           familias ortonormales ponderadas (Ensemble) y las bolas discretas
           (Ball), junto con la aritmética básica: producto interno, energía
           de gradiente, densidad, energía cinética y cociente de
           Lieb–Thirring.

Filosofía de diseño:

    Todo objeto es INMUTABLE tras su construcción (dataclasses congeladas y
    arrays de solo lectura). Así las mallas y los campos pueden compartirse
    entre hilos sin copias y los resultados son reproducibles.

    1. MALLA: caja [lo_i, hi_i] con N_i celdas por eje, espaciado
       h_i = (hi_i - lo_i) / N_i, centros de celda en lo_i + (k + 1/2) h_i y
       orden de celdas row-major (orden C de numpy).
    2. CUADRATURA: regla del punto medio, peso uniforme = volumen de celda.
    3. GRADIENTE: diferencias hacia delante por eje. Las diferencias que
       cruzan el borde exterior de la caja se omiten (convención Neumann).

Convenciones de máscara:

    gradient_energy(f, mask) cuenta la diferencia situada en la celda i
    cuando i pertenece a la máscara. Con interior=True solo cuenta las
    diferencias cuyos dos extremos están en la máscara: es exactamente la
    forma cuadrática del Laplaciano de Neumann de la bola (spectral.py), es
    decir, la versión discreta de ∫_B |∇u|² para u ∈ H¹(B).

Determinismo:
    Todas las sumas recorren las celdas en orden de índice ascendente con la
    suma por pares de numpy sobre el array completo; la suma ponderada de un
    ensemble se hace siempre en un único hilo y en orden de índice.

Autor: [Proyecto académico]
Fecha: 2026-02
================================================================================
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Callable, Iterable, Optional, Sequence, TypeVar

import numpy as np

from errors import (
    BadExtent,
    BadWeights,
    BudgetExceeded,
    GridMismatch,
    InvalidInput,
    LaboratoryError,
    NotOrthonormal,
    RankDeficient,
    ZeroDensity,
    ZeroField,
)

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


# ══════════════════════════════════════════════════════════════════════════════
# 1. CONFIGURACIÓN
# ══════════════════════════════════════════════════════════════════════════════

SUPPORTED_DIMS = (1, 2, 3)

# Presupuesto de celdas: mantiene las operaciones densas a escala de escritorio
DEFAULT_CELL_BUDGET = 2 ** 22

# Tolerancia de ortonormalidad |<u_m, u_n> - δ_mn|
ORTHONORMALITY_TOL = 1e-10

# Norma relativa mínima admitida durante la eliminación de Gram–Schmidt
RANK_TOL = 1e-8

# Tolerancia relativa para detectar empates |x - c| = r en las bolas
TIE_REL_TOL = 1e-12


def lt_exponent(dim: int) -> float:
    """Exponente 1 + 2/d de la densidad en la desigualdad."""
    return 1.0 + 2.0 / dim


# ══════════════════════════════════════════════════════════════════════════════
# 2. MALLA
# ══════════════════════════════════════════════════════════════════════════════

@dataclass(frozen=True)
class Grid:
    """
    Malla tensorial uniforme sobre una caja de R^d.

    Atributos
    ---------
    dim : int
        Dimensión (1, 2 o 3).
    extent : tuple[tuple[float, float], ...]
        Intervalo [lo, hi] de cada eje (unidades de longitud).
    points : tuple[int, ...]
        Número de celdas por eje.
    """

    dim: int
    extent: tuple[tuple[float, float], ...]
    points: tuple[int, ...]

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((hi - lo) / n for (lo, hi), n in zip(self.extent, self.points))

    @property
    def min_spacing(self) -> float:
        return min(self.spacing)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.points))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axis_centers(self, axis: int) -> np.ndarray:
        """Coordenadas de los centros de celda a lo largo de un eje."""
        lo, _ = self.extent[axis]
        h = self.spacing[axis]
        return lo + (np.arange(self.points[axis]) + 0.5) * h

    @cached_property
    def coordinates(self) -> np.ndarray:
        """Centros de todas las celdas, array (n_cells, dim) en orden row-major."""
        axes = np.meshgrid(
            *[self.axis_centers(a) for a in range(self.dim)], indexing="ij"
        )
        coords = np.stack([ax.reshape(-1) for ax in axes], axis=1)
        coords.setflags(write=False)
        return coords

    def unravel(self, flat_index: int) -> tuple[int, ...]:
        """Índice plano → índice multidimensional."""
        return tuple(int(k) for k in np.unravel_index(int(flat_index), self.points))

    def ravel(self, index: Sequence[int]) -> int:
        """Índice multidimensional → índice plano."""
        return int(np.ravel_multi_index(tuple(int(k) for k in index), self.points))

    def center_of(self, index: Sequence[int]) -> tuple[float, ...]:
        """Coordenadas del centro de la celda con índice multidimensional dado."""
        return tuple(
            float(self.extent[a][0] + (index[a] + 0.5) * self.spacing[a])
            for a in range(self.dim)
        )

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "extent": [list(pair) for pair in self.extent],
            "points": list(self.points),
        }

    def __repr__(self) -> str:
        return (
            f"Grid(dim={self.dim}, extent={self.extent}, points={self.points}, "
            f"h={tuple(round(h, 6) for h in self.spacing)})"
        )


def make_grid(
    dim: int,
    extent: Any,
    points_per_axis: Any,
    cell_budget: int = DEFAULT_CELL_BUDGET,
) -> Grid:
    """
    Construye una malla validada.

    Parámetros
    ----------
    dim : int
        Dimensión, en {1, 2, 3}.
    extent : par [lo, hi] o lista de pares
        Un único par se replica en todos los ejes.
    points_per_axis : int o lista de int
        Un único entero se replica en todos los ejes.
    cell_budget : int
        Máximo número de celdas admitido.

    Retorna
    -------
    Grid

    Raises
    ------
    BadExtent : dimensión no soportada, extensión mal formada o hi ≤ lo.
    BudgetExceeded : número de celdas por encima del presupuesto.
    """
    if dim not in SUPPORTED_DIMS:
        raise BadExtent(f"Dimensión {dim} no soportada. Opciones: {SUPPORTED_DIMS}")

    ext = np.asarray(extent, dtype=float)
    if ext.shape == (2,):
        ext = np.tile(ext, (dim, 1))
    if ext.shape != (dim, 2):
        raise BadExtent(
            f"Extensión con forma {ext.shape}; se esperaba (2,) o ({dim}, 2)."
        )
    if not np.all(np.isfinite(ext)):
        raise BadExtent(f"Extensión con valores no finitos: {ext.tolist()}")
    for axis, (lo, hi) in enumerate(ext):
        if hi <= lo:
            raise BadExtent(f"Eje {axis}: hi={hi} ≤ lo={lo}.")

    pts = np.atleast_1d(np.asarray(points_per_axis))
    if pts.size == 1:
        pts = np.repeat(pts, dim)
    if pts.shape != (dim,) or np.any(pts < 1) or np.any(pts != np.round(pts)):
        raise BadExtent(f"Puntos por eje inválidos: {np.asarray(points_per_axis).tolist()}")

    n_cells = int(np.prod([int(p) for p in pts]))
    if n_cells > cell_budget:
        raise BudgetExceeded(
            f"La malla pide {n_cells} celdas; el presupuesto es {cell_budget}."
        )

    grid = Grid(
        dim=int(dim),
        extent=tuple((float(lo), float(hi)) for lo, hi in ext),
        points=tuple(int(p) for p in pts),
    )
    logger.debug(f"[fields] {grid} | {n_cells} celdas")
    return grid


def cell_center(grid: Grid, flat_index: int) -> tuple[float, ...]:
    """Centro de la celda con índice plano dado."""
    return grid.center_of(grid.unravel(flat_index))


def grid_from_dict(spec: dict, cell_budget: int = DEFAULT_CELL_BUDGET) -> Grid:
    """Construye una malla a partir de {dim, extent, points}."""
    try:
        return make_grid(int(spec["dim"]), spec["extent"], spec["points"], cell_budget)
    except KeyError as e:
        raise InvalidInput(f"Especificación de malla incompleta: falta {e}") from None
    except LaboratoryError:
        raise
    except (TypeError, ValueError) as e:
        raise InvalidInput(f"Especificación de malla inválida: {e}") from None


# ══════════════════════════════════════════════════════════════════════════════
# 3. CAMPOS
# ══════════════════════════════════════════════════════════════════════════════

@dataclass(frozen=True, eq=False)
class Field:
    """
    Función escalar (real o compleja) muestreada en los centros de celda.

    Los valores se guardan como array plano de solo lectura en orden
    row-major. Se acepta también un array con la forma de la malla.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.shape == self.grid.shape:
            values = values.reshape(-1)
        if values.ndim != 1 or values.size != self.grid.n_cells:
            raise GridMismatch(
                f"El campo tiene {values.size} valores; la malla tiene "
                f"{self.grid.n_cells} celdas."
            )
        if np.iscomplexobj(values):
            values = np.array(values, dtype=np.complex128)
        else:
            values = np.array(values, dtype=np.float64)
        if not np.all(np.isfinite(values)):
            raise InvalidInput("El campo contiene valores no finitos.")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.values)

    def as_array(self) -> np.ndarray:
        """Valores con la forma de la malla."""
        return self.values.reshape(self.grid.shape)

    def abs2(self) -> np.ndarray:
        """|f|² celda a celda."""
        if self.is_complex:
            return self.values.real ** 2 + self.values.imag ** 2
        return self.values ** 2

    def norm(self) -> float:
        return math.sqrt(float(np.sum(self.abs2())) * self.grid.cell_volume)

    def _check_same_grid(self, other: "Field") -> None:
        if other.grid != self.grid:
            raise GridMismatch(f"Mallas distintas: {self.grid} vs {other.grid}")

    def __add__(self, other: "Field") -> "Field":
        self._check_same_grid(other)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        self._check_same_grid(other)
        return Field(self.grid, self.values - other.values)

    def __mul__(self, scalar: complex) -> "Field":
        return Field(self.grid, self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return Field(self.grid, -self.values)

    def __repr__(self) -> str:
        kind = "complejo" if self.is_complex else "real"
        return f"Field({kind}, n={self.values.size}, ‖f‖={self.norm():.6g})"


def field_from_function(grid: Grid, fn: Callable[..., np.ndarray]) -> Field:
    """
    Muestrea fn en los centros de celda.

    fn recibe una coordenada por eje (arrays planos de longitud n_cells).
    """
    coords = grid.coordinates
    values = fn(*[coords[:, a] for a in range(grid.dim)])
    return Field(grid, np.broadcast_to(values, (grid.n_cells,)))


def zero_field(grid: Grid) -> Field:
    return Field(grid, np.zeros(grid.n_cells))


def normalize(f: Field) -> Field:
    """Devuelve f / ‖f‖."""
    n = f.norm()
    if n == 0.0:
        raise ZeroField("No se puede normalizar un campo nulo.")
    return f * (1.0 / n)


def _as_mask(grid: Grid, mask: Optional[np.ndarray]) -> Optional[np.ndarray]:
    """Valida una máscara booleana (plana o con la forma de la malla)."""
    if mask is None:
        return None
    m = np.asarray(mask, dtype=bool)
    if m.shape == grid.shape:
        m = m.reshape(-1)
    if m.shape != (grid.n_cells,):
        raise GridMismatch(
            f"Máscara con forma {m.shape}; la malla tiene {grid.n_cells} celdas."
        )
    return m


def integrate(values: np.ndarray, grid: Grid, mask: Optional[np.ndarray] = None) -> float:
    """Integral por punto medio de valores por celda, opcionalmente en una máscara."""
    m = _as_mask(grid, mask)
    vals = np.asarray(values)
    if m is not None:
        vals = np.where(m, vals, 0.0)
    return float(np.sum(vals)) * grid.cell_volume


# ══════════════════════════════════════════════════════════════════════════════
# 4. ENSEMBLES
# ══════════════════════════════════════════════════════════════════════════════

@dataclass(frozen=True, eq=False)
class Ensemble:
    """
    Familia ortonormal ponderada (λ_n, u_n): γ = Σ λ_n |u_n><u_n|.

    La ortonormalidad y los pesos se validan en la construcción.
    """

    weights: tuple[float, ...]
    fields: tuple[Field, ...]

    def __post_init__(self):
        fields = tuple(self.fields)
        weights = tuple(float(w) for w in self.weights)
        if not fields:
            raise InvalidInput("Un ensemble necesita al menos un campo.")
        if len(weights) != len(fields):
            raise BadWeights(
                f"{len(weights)} pesos para {len(fields)} campos."
            )
        for n, w in enumerate(weights):
            if not (0.0 <= w <= 1.0) or not math.isfinite(w):
                raise BadWeights(f"Peso λ_{n} = {w} fuera de [0, 1].")
        grid = fields[0].grid
        for n, f in enumerate(fields):
            if f.grid != grid:
                raise GridMismatch(f"El campo {n} vive en otra malla: {f.grid}")
        object.__setattr__(self, "fields", fields)
        object.__setattr__(self, "weights", weights)
        self.verify()

    @property
    def grid(self) -> Grid:
        return self.fields[0].grid

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def size(self) -> int:
        return len(self.fields)

    @property
    def is_projector(self) -> bool:
        return all(w == 1.0 for w in self.weights)

    def gram(self) -> np.ndarray:
        """Matriz de Gram <u_m, u_n>, calculada en orden de índice."""
        n = self.size
        gram = np.zeros((n, n), dtype=np.complex128)
        for m in range(n):
            for k in range(n):
                gram[m, k] = inner_product(self.fields[m], self.fields[k])
        return gram

    def orthonormality_defect(self) -> float:
        """max |<u_m, u_n> - δ_mn|."""
        return float(np.max(np.abs(self.gram() - np.eye(self.size))))

    def verify(self, tol: float = ORTHONORMALITY_TOL) -> float:
        """Re-verifica la ortonormalidad; lanza NotOrthonormal si falla."""
        defect = self.orthonormality_defect()
        if defect > tol:
            raise NotOrthonormal(
                f"Defecto de ortonormalidad {defect:.3e} > tolerancia {tol:.1e}."
            )
        return defect

    def __repr__(self) -> str:
        return (
            f"Ensemble(N={self.size}, dim={self.dim}, "
            f"Σλ={sum(self.weights):.6g}, grid={self.grid.points})"
        )


def projector(fields: Sequence[Field]) -> Ensemble:
    """Ensemble con todos los pesos iguales a 1."""
    return Ensemble(weights=tuple(1.0 for _ in fields), fields=tuple(fields))


# ══════════════════════════════════════════════════════════════════════════════
# 5. BOLAS DISCRETAS
# ══════════════════════════════════════════════════════════════════════════════

@dataclass(frozen=True, eq=False)
class Ball:
    """
    Bola discreta: celdas cuyo centro cumple |x - c| < r.

    Regla de empate: una celda con |x - c| = r (tolerancia relativa 1e-12
    sobre distancias al cuadrado) pertenece a la bola si y solo si su
    desplazamiento en el último eje es ≤ 0.
    """

    grid: Grid
    center: tuple[float, ...]
    radius: float
    mask: np.ndarray

    @property
    def n_cells(self) -> int:
        return int(np.count_nonzero(self.mask))

    @property
    def volume(self) -> float:
        return self.n_cells * self.grid.cell_volume

    @property
    def cells(self) -> np.ndarray:
        """Índices planos de las celdas de la bola, ascendentes."""
        return np.flatnonzero(self.mask)

    def contains_point(self, point: Sequence[float]) -> bool:
        return _ball_membership(
            self.grid, self.center, self.radius,
            [np.asarray([p]) for p in point],
        ).item()

    def to_dict(self) -> dict:
        return {
            "center": [float(c) for c in self.center],
            "radius": float(self.radius),
            "volume": float(self.volume),
            "cells": self.n_cells,
        }

    def __repr__(self) -> str:
        c = ", ".join(f"{x:.4g}" for x in self.center)
        return f"Ball(c=({c}), r={self.radius:.6g}, celdas={self.n_cells})"


def _membership_from_offsets(
    grid: Grid, offsets: Sequence[np.ndarray], radius,
) -> np.ndarray:
    """
    Predicado de pertenencia a partir de los desplazamientos por eje.

    radius puede ser un escalar o un array con la forma de los offsets.
    """
    d2 = np.zeros(np.shape(offsets[0]))
    for g in offsets:
        d2 = d2 + g * g
    r2 = np.asarray(radius) * np.asarray(radius)
    tol = TIE_REL_TOL * r2
    inside = d2 < r2 - tol
    tie = np.abs(d2 - r2) <= tol
    last_ok = offsets[-1] <= TIE_REL_TOL * grid.spacing[-1]
    return inside | (tie & last_ok)


def _ball_membership(
    grid: Grid,
    center: Sequence[float],
    radius: float,
    axis_coords: Sequence[np.ndarray],
) -> np.ndarray:
    """
    Pertenencia a la bola sobre el producto tensorial de coordenadas por eje.

    Devuelve un array booleano con forma (len(axis_coords[0]), ..., ) en
    orden 'ij'.
    """
    offsets = [np.asarray(axis_coords[a]) - center[a] for a in range(grid.dim)]
    return _membership_from_offsets(grid, np.meshgrid(*offsets, indexing="ij"), radius)


def entry_steps(grid: Grid, center: Sequence[float], quantum: float) -> np.ndarray:
    """
    Para cada celda, el menor k ≥ 1 tal que la celda pertenece a la bola de
    radio k·quantum centrada en `center` (array plano de enteros).

    Usa el mismo predicado que make_ball, de modo que
    {i : entry[i] ≤ k} es exactamente la máscara de make_ball(grid, center, k·quantum).
    """
    coords = grid.coordinates
    offsets = [coords[:, a] - center[a] for a in range(grid.dim)]
    d2 = np.zeros(grid.n_cells)
    for g in offsets:
        d2 = d2 + g * g
    # arranque por debajo de la entrada real; la pertenencia es monótona en k
    k = np.maximum(np.floor(np.sqrt(d2) / quantum).astype(np.int64) - 1, 1)
    while True:
        member = _membership_from_offsets(grid, offsets, k * quantum)
        if member.all():
            return k
        k = np.where(member, k, k + 1)


def ball_window(
    grid: Grid, center: Sequence[float], radius: float,
) -> tuple[tuple[slice, ...], np.ndarray]:
    """
    Pertenencia restringida a la caja envolvente de la bola.

    Retorna
    -------
    (slices, local_mask) : slices por eje dentro de la malla y la máscara
    booleana local con la forma de esa ventana.
    """
    slices = []
    coords = []
    for a in range(grid.dim):
        lo, _ = grid.extent[a]
        h = grid.spacing[a]
        k_lo = math.floor((center[a] - radius - lo) / h - 0.5) - 1
        k_hi = math.ceil((center[a] + radius - lo) / h - 0.5) + 1
        k_lo = max(k_lo, 0)
        k_hi = min(k_hi, grid.points[a] - 1)
        if k_hi < k_lo:
            k_lo, k_hi = 0, -1
        slices.append(slice(k_lo, k_hi + 1))
        coords.append(grid.axis_centers(a)[k_lo:k_hi + 1])
    local = _ball_membership(grid, center, radius, coords)
    return tuple(slices), local


def make_ball(grid: Grid, center: Sequence[float], radius: float) -> Ball:
    """
    Construye una bola discreta con su máscara de celdas.

    Raises
    ------
    InvalidInput : radio no positivo, centro de dimensión errónea o máscara vacía.
    """
    center = tuple(float(c) for c in center)
    if len(center) != grid.dim:
        raise InvalidInput(f"Centro {center} no tiene dimensión {grid.dim}.")
    if not (radius > 0) or not math.isfinite(radius):
        raise InvalidInput(f"Radio inválido: {radius}")
    slices, local = ball_window(grid, center, radius)
    mask = np.zeros(grid.shape, dtype=bool)
    if local.size:
        mask[slices] = local
    mask = mask.reshape(-1)
    if not mask.any():
        raise InvalidInput(f"La bola c={center}, r={radius} no contiene celdas.")
    mask.setflags(write=False)
    return Ball(grid=grid, center=center, radius=float(radius), mask=mask)


def ball_from_index(grid: Grid, index: Sequence[int], radius: float) -> Ball:
    """Bola centrada en el centro de la celda de índice multidimensional dado."""
    return make_ball(grid, grid.center_of(index), radius)


# ══════════════════════════════════════════════════════════════════════════════
# 6. OPERACIONES
# ══════════════════════════════════════════════════════════════════════════════

def map_in_order(fn: Callable[[T], R], items: Iterable[T], workers: int = 1) -> list[R]:
    """
    Aplica fn a cada elemento, opcionalmente en paralelo con hilos.

    El resultado conserva el orden de entrada (ThreadPoolExecutor.map), de
    modo que las reducciones posteriores son deterministas.
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(fn, items))


def inner_product(f: Field, g: Field) -> complex:
    """
    Producto interno discreto <f, g> = Σ conj(f)·g · vol.

    Raises
    ------
    GridMismatch : si los campos viven en mallas distintas.
    """
    if f.grid != g.grid:
        raise GridMismatch(f"Mallas distintas: {f.grid} vs {g.grid}")
    return complex(np.sum(np.conj(f.values) * g.values)) * f.grid.cell_volume


def gradient_energy(
    f: Field,
    mask: Optional[np.ndarray] = None,
    interior: bool = False,
) -> float:
    """
    Energía de gradiente por diferencias hacia delante, ∫|∇f|².

    Parámetros
    ----------
    f : Field
    mask : array booleano, opcional
        Celdas donde se cuentan las diferencias (por defecto todas).
    interior : bool
        Si True, una diferencia solo cuenta cuando sus dos celdas están en
        la máscara (forma de Neumann sobre la máscara).

    Retorna
    -------
    float : energía no negativa.
    """
    grid = f.grid
    m = _as_mask(grid, mask)
    arr = f.as_array()
    m_arr = None if m is None else m.reshape(grid.shape)
    total = 0.0
    for axis in range(grid.dim):
        n_axis = grid.points[axis]
        if n_axis < 2:
            continue
        diff = np.diff(arr, axis=axis)
        sq = diff.real ** 2 + diff.imag ** 2 if np.iscomplexobj(diff) else diff ** 2
        if m_arr is not None:
            lower = np.take(m_arr, np.arange(n_axis - 1), axis=axis)
            if interior:
                upper = np.take(m_arr, np.arange(1, n_axis), axis=axis)
                lower = lower & upper
            sq = np.where(lower, sq, 0.0)
        total += float(np.sum(sq)) / grid.spacing[axis] ** 2
    return total * grid.cell_volume


def density(e: Ensemble) -> Field:
    """Densidad ρ = Σ λ_n |u_n|², acumulada en orden de índice."""
    rho = np.zeros(e.grid.n_cells)
    for w, u in zip(e.weights, e.fields):
        if w != 0.0:
            rho = rho + w * u.abs2()
    return Field(e.grid, rho)


def family_density(fields: Sequence[Field]) -> Field:
    """Σ |u_n|² para una familia arbitraria (sin exigir ortogonalidad)."""
    grid = fields[0].grid
    rho = np.zeros(grid.n_cells)
    for u in fields:
        if u.grid != grid:
            raise GridMismatch("La familia mezcla mallas distintas.")
        rho = rho + u.abs2()
    return Field(grid, rho)


def kinetic_energy(
    e: Ensemble,
    mask: Optional[np.ndarray] = None,
    interior: bool = False,
    workers: int = 1,
) -> float:
    """
    Energía cinética Tr(-Δγ) = Σ λ_n ∫|∇u_n|², opcionalmente local.

    Las energías por campo pueden calcularse en paralelo; la suma ponderada
    se hace después, en orden de índice.
    """
    energies = map_in_order(
        lambda u: gradient_energy(u, mask, interior), e.fields, workers
    )
    total = 0.0
    for w, energy in zip(e.weights, energies):
        total += w * energy
    return total


def density_power_integral(
    rho: Field, mask: Optional[np.ndarray] = None,
) -> float:
    """∫ ρ^{1+2/d}, opcionalmente sobre una máscara."""
    p = lt_exponent(rho.grid.dim)
    return integrate(np.power(np.maximum(rho.values.real, 0.0), p), rho.grid, mask)


def lt_quotient(e: Ensemble, workers: int = 1) -> float:
    """
    Cociente de Lieb–Thirring Tr(-Δγ) / ∫ρ^{1+2/d}.

    Raises
    ------
    ZeroDensity : si la densidad es idénticamente nula.
    """
    rho = density(e)
    denominator = density_power_integral(rho)
    if denominator <= 0.0:
        raise ZeroDensity("La densidad del ensemble es idénticamente nula.")
    return kinetic_energy(e, workers=workers) / denominator


def orthonormalize(fields: Sequence[Field], tol: float = RANK_TOL) -> list[Field]:
    """
    Gram–Schmidt modificado con reortogonalización (dos pasadas).

    Parámetros
    ----------
    fields : secuencia de Field sobre una misma malla.
    tol : float
        Norma residual mínima, relativa a la norma original del campo.

    Raises
    ------
    RankDeficient : si algún residuo cae por debajo de tol.
    """
    if not fields:
        return []
    grid = fields[0].grid
    use_complex = any(f.is_complex for f in fields)
    dtype = np.complex128 if use_complex else np.float64
    vol = grid.cell_volume
    basis: list[np.ndarray] = []

    for k, f in enumerate(fields):
        if f.grid != grid:
            raise GridMismatch(f"El campo {k} vive en otra malla.")
        v = np.array(f.values, dtype=dtype)
        original = math.sqrt(float(np.sum(np.abs(v) ** 2)) * vol)
        if original == 0.0:
            raise RankDeficient(f"El campo {k} es nulo.")
        for _ in range(2):
            for q in basis:
                coeff = np.sum(np.conj(q) * v) * vol
                v = v - coeff * q
        residual = math.sqrt(float(np.sum(np.abs(v) ** 2)) * vol)
        if residual < tol * original:
            raise RankDeficient(
                f"El campo {k} es linealmente dependiente de los anteriores "
                f"(residuo relativo {residual / original:.2e} < {tol:.0e})."
            )
        basis.append(v / residual)

    return [Field(grid, q) for q in basis]


# ══════════════════════════════════════════════════════════════════════════════
# 7. DILATACIÓN DISCRETA
# ══════════════════════════════════════════════════════════════════════════════
# u_ℓ(x) = ℓ^{d/2} u(ℓx): mismos valores muestreados, espaciado h/ℓ y
# amplitud ℓ^{d/2}. Energía cinética y ∫ρ^{1+2/d} escalan ambas como ℓ².

def dilate_grid(grid: Grid, ell: float) -> Grid:
    return Grid(
        dim=grid.dim,
        extent=tuple((lo / ell, hi / ell) for lo, hi in grid.extent),
        points=grid.points,
    )


def dilate_field(f: Field, ell: float) -> Field:
    return Field(dilate_grid(f.grid, ell), f.values * ell ** (f.grid.dim / 2.0))


def dilate_ensemble(e: Ensemble, ell: float) -> Ensemble:
    grid = dilate_grid(e.grid, ell)
    amp = ell ** (e.dim / 2.0)
    return Ensemble(
        weights=e.weights,
        fields=tuple(Field(grid, u.values * amp) for u in e.fields),
    )
