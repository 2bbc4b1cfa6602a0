"""
================================================================================
COVERING — covering.py
================================================================================
Proyecto: Laboratorio numérico de la desigualdad cinética de Lieb–Thirring.

Propósito: Recubrimiento del soporte de la densidad por bolas de masa fija.
           Para cada celda del soporte se elige el menor radio cuya bola
           contiene masa ≥ objetivo; después una selección voraz de tipo
           Besicovitch se queda con una subfamilia que cubre todo el soporte
           con multiplicidad acotada.

Reglas:

    1. SOPORTE: celdas con ρ > SUPPORT_THRESHOLD_REL · max ρ.
    2. RADIOS: cuantizados a k · h_min / 2 (k ≥ 1). Cada celda entra en la
       bola en un paso k fijo, así que la curva masa(k) se acumula de una vez
       y el menor k con masa ≥ objetivo se busca con searchsorted.
    3. SELECCIÓN: se recorren los candidatos por radio decreciente (empates:
       centro lexicográficamente menor) y se elige uno si su centro aún no
       está cubierto. Los radios elegidos quedan en orden no creciente.
    4. MULTIPLICIDAD: máximo, sobre las celdas del soporte, del número de
       bolas elegidas que las contienen. overlap_max es el mismo máximo sobre
       todas las celdas de la malla.

Autor: [Proyecto académico]
Fecha: 2026-02
================================================================================
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd

from errors import InsufficientMass, InvalidInput, MissingCenter
from fields import (
    Ball,
    Field,
    Grid,
    ball_window,
    cell_center,
    density,
    entry_steps,
    grid_from_dict,
    integrate,
    make_ball,
    map_in_order,
)

logger = logging.getLogger(__name__)


# ══════════════════════════════════════════════════════════════════════════════
# 1. CONFIGURACIÓN
# ══════════════════════════════════════════════════════════════════════════════

DEFAULT_TARGET_MASS = 2.0
SUPPORT_THRESHOLD_REL = 1e-12

# Techo de multiplicidad por dimensión (None = sin techo conocido)
MULTIPLICITY_CEILINGS: dict[int, Optional[int]] = {1: 2, 2: 19, 3: None}


# ══════════════════════════════════════════════════════════════════════════════
# 2. TIPOS
# ══════════════════════════════════════════════════════════════════════════════

@dataclass(frozen=True)
class RadiusSelection:
    """
    Resultado de radius_for_mass.

    mass ∈ [target, target + step_mass], donde step_mass es la masa añadida
    por el último paso de radio.
    """

    radius: float
    mass: float
    step_mass: float


@dataclass(frozen=True, eq=False)
class CandidateBall:
    """
    Bola candidata guardada solo sobre su caja envolvente.

    Hay un candidato por celda del soporte; con máscaras de malla completa
    la memoria crecería como n_soporte × n_celdas. La Ball completa se
    construye únicamente para los candidatos elegidos.
    """

    grid: Grid
    center: tuple[float, ...]
    radius: float
    slices: tuple[slice, ...]
    local: np.ndarray

    @classmethod
    def around(cls, grid: Grid, center: Sequence[float], radius: float) -> "CandidateBall":
        center = tuple(float(c) for c in center)
        slices, local = ball_window(grid, center, radius)
        return cls(grid=grid, center=center, radius=float(radius), slices=slices, local=local)

    def mark(self, target: np.ndarray) -> None:
        """Suma la pertenencia de la bola sobre `target` (array plano de la malla)."""
        if self.local.size:
            target.reshape(self.grid.shape)[self.slices] += self.local

    def to_ball(self) -> Ball:
        return make_ball(self.grid, self.center, self.radius)


@dataclass(frozen=True, eq=False)
class Covering:
    """
    Subfamilia de bolas seleccionada.

    Atributos
    ---------
    balls : tuple[Ball, ...]
        Bolas elegidas, en orden de selección.
    support : np.ndarray
        Máscara booleana del soporte.
    multiplicity : int
        Máximo de bolas que contienen una celda del soporte.
    covered : bool
        True si toda celda del soporte está en alguna bola.
    overlap_max : int
        Máximo de bolas que contienen una celda cualquiera de la malla.
    masses, step_masses : tuple[float, ...]
        ∫_B ρ de cada bola y masa de su último paso de radio (vacías si no se
        conoce la densidad).
    support_threshold : float
        Umbral absoluto de ρ usado para el soporte.
    selection_order : tuple[int, ...]
        Índice de cada bola elegida en la lista de candidatos.
    """

    balls: tuple[Ball, ...]
    support: np.ndarray
    multiplicity: int
    covered: bool
    overlap_max: int
    masses: tuple[float, ...] = ()
    step_masses: tuple[float, ...] = ()
    support_threshold: float = 0.0
    selection_order: tuple[int, ...] = field(default_factory=tuple)

    @property
    def n_balls(self) -> int:
        return len(self.balls)

    def __repr__(self) -> str:
        return (
            f"Covering(bolas={self.n_balls}, multiplicidad={self.multiplicity}, "
            f"overlap_max={self.overlap_max}, cubierto={self.covered})"
        )


# ══════════════════════════════════════════════════════════════════════════════
# 3. RADIOS
# ══════════════════════════════════════════════════════════════════════════════

def support_mask(rho: Field, threshold_rel: float = SUPPORT_THRESHOLD_REL) -> tuple[np.ndarray, float]:
    """Máscara del soporte y umbral absoluto usado."""
    values = rho.values.real
    peak = float(values.max()) if values.size else 0.0
    threshold = threshold_rel * peak
    if peak <= 0.0:
        return np.zeros(values.size, dtype=bool), threshold
    return values > threshold, threshold


def ball_mass(rho: Field, center: Sequence[float], radius: float) -> float:
    """∫_B ρ sobre la ventana envolvente de la bola."""
    grid = rho.grid
    slices, local = ball_window(grid, center, radius)
    if local.size == 0:
        return 0.0
    window = rho.values.real.reshape(grid.shape)[slices]
    return float(np.sum(np.where(local, window, 0.0))) * grid.cell_volume


def radius_for_mass(
    rho: Field,
    center: Sequence[float],
    target_mass: float = DEFAULT_TARGET_MASS,
) -> RadiusSelection:
    """
    Menor radio cuantizado cuya bola contiene masa ≥ target_mass.

    Cada celda entra en la bola en un paso de radio concreto (entry_steps);
    acumulando la masa por paso de entrada se obtiene la curva masa(k)
    completa en una sola pasada, y el paso buscado sale de searchsorted.
    El resultado se confirma con ball_mass, que es la masa que se reporta.

    Raises
    ------
    InsufficientMass : si ni la bola que contiene toda la caja alcanza la masa.
    """
    grid = rho.grid
    quantum = 0.5 * grid.min_spacing
    steps = entry_steps(grid, center, quantum)
    masses = np.cumsum(np.bincount(steps, weights=rho.values.real)) * grid.cell_volume
    if masses[-1] < target_mass:
        raise InsufficientMass(
            f"Masa total {masses[-1]:.6g} < masa objetivo {target_mass:.6g}."
        )

    k = max(int(np.searchsorted(masses, target_mass)), 1)
    # la suma acumulada y la suma por ventana pueden diferir en el último ulp
    k_max = masses.size - 1
    mass = ball_mass(rho, center, k * quantum)
    while mass < target_mass:
        if k >= k_max:
            raise InsufficientMass(
                f"Masa total {mass:.6g} < masa objetivo {target_mass:.6g}."
            )
        k += 1
        mass = ball_mass(rho, center, k * quantum)
    below = ball_mass(rho, center, (k - 1) * quantum) if k > 1 else 0.0
    while k > 1 and below >= target_mass:
        k, mass = k - 1, below
        below = ball_mass(rho, center, (k - 1) * quantum) if k > 1 else 0.0
    return RadiusSelection(radius=k * quantum, mass=mass, step_mass=mass - below)


def candidate_selections(
    rho: Field,
    target_mass: float = DEFAULT_TARGET_MASS,
    workers: int = 1,
    threshold_rel: float = SUPPORT_THRESHOLD_REL,
) -> tuple[list[CandidateBall], list[RadiusSelection]]:
    """Bolas candidatas y sus selecciones de radio, en orden de índice de celda."""
    support, _ = support_mask(rho, threshold_rel)
    cells = np.flatnonzero(support)
    if cells.size == 0:
        return [], []
    grid = rho.grid
    total = integrate(rho.values.real, grid)
    if total < target_mass:
        raise InsufficientMass(
            f"Masa total {total:.6g} < masa objetivo {target_mass:.6g}."
        )

    centers = [cell_center(grid, int(i)) for i in cells]
    selections = map_in_order(
        lambda c: radius_for_mass(rho, c, target_mass), centers, workers
    )
    candidates = [
        CandidateBall.around(grid, c, s.radius) for c, s in zip(centers, selections)
    ]
    return candidates, selections


def candidate_balls(
    rho: Field,
    target_mass: float = DEFAULT_TARGET_MASS,
    workers: int = 1,
) -> list[Ball]:
    """Una bola de masa ≥ target_mass por celda del soporte (orden de índice)."""
    candidates, _ = candidate_selections(rho, target_mass, workers)
    return [c.to_ball() for c in candidates]


# ══════════════════════════════════════════════════════════════════════════════
# 4. SELECCIÓN DE BESICOVITCH
# ══════════════════════════════════════════════════════════════════════════════

def _center_cell(grid: Grid, center: Sequence[float]) -> Optional[int]:
    """Índice plano de la celda cuyo centro es `center`, o None."""
    index = []
    for a in range(grid.dim):
        lo, _ = grid.extent[a]
        h = grid.spacing[a]
        k = int(round((center[a] - lo) / h - 0.5))
        if not 0 <= k < grid.points[a]:
            return None
        if abs(lo + (k + 0.5) * h - center[a]) > 1e-9 * h:
            return None
        index.append(k)
    return grid.ravel(index)


def _as_support(grid: Grid, support) -> np.ndarray:
    s = np.asarray(support)
    if s.dtype == bool:
        mask = s.reshape(-1)
        if mask.size != grid.n_cells:
            raise InvalidInput("La máscara de soporte no coincide con la malla.")
        return mask
    mask = np.zeros(grid.n_cells, dtype=bool)
    mask[s.astype(np.int64)] = True
    return mask


def _mark(candidate: Union[Ball, CandidateBall], target: np.ndarray) -> None:
    if isinstance(candidate, CandidateBall):
        candidate.mark(target)
    else:
        target |= candidate.mask


def _as_ball(candidate: Union[Ball, CandidateBall]) -> Ball:
    return candidate.to_ball() if isinstance(candidate, CandidateBall) else candidate


def coverage_counts(balls: Sequence[Ball], n_cells: int) -> np.ndarray:
    """Número de bolas que contienen cada celda."""
    counts = np.zeros(n_cells, dtype=np.int64)
    for b in balls:
        counts += b.mask
    return counts


def besicovitch_select(
    candidates: Sequence[Union[Ball, CandidateBall]],
    support,
    rho: Optional[Field] = None,
    step_masses: Optional[Sequence[float]] = None,
    support_threshold: float = 0.0,
) -> Covering:
    """
    Selección voraz: bola de mayor radio cuyo centro aún no está cubierto.

    Parámetros
    ----------
    candidates : lista de Ball o CandidateBall
        Cada celda del soporte debe ser centro de exactamente un candidato.
        Los CandidateBall elegidos se devuelven como Ball completas.
    support : máscara booleana o índices planos del soporte.
    rho : Field, opcional
        Si se pasa, se registran las masas ∫_B ρ de las bolas elegidas.
    step_masses : alineadas con candidates, opcional.

    Raises
    ------
    MissingCenter : alguna celda del soporte sin candidato o con varios.
    """
    if not candidates:
        s = np.asarray(support)
        n_missing = int(s.sum()) if s.dtype == bool else s.size
        if n_missing:
            raise MissingCenter(f"{n_missing} celdas del soporte sin candidato.")
        if s.dtype == bool:
            mask = s.reshape(-1)
        else:
            mask = np.zeros(rho.grid.n_cells if rho is not None else 0, dtype=bool)
        return Covering(
            balls=(), support=mask, multiplicity=0, covered=True, overlap_max=0,
            support_threshold=support_threshold,
        )

    grid = candidates[0].grid
    mask = _as_support(grid, support)

    owner = np.full(grid.n_cells, -1, dtype=np.int64)
    for j, ball in enumerate(candidates):
        cell = _center_cell(grid, ball.center)
        if cell is None or not mask[cell]:
            continue
        if owner[cell] >= 0:
            raise MissingCenter(
                f"La celda {grid.unravel(cell)} es centro de varios candidatos."
            )
        owner[cell] = j
    missing = np.flatnonzero(mask & (owner < 0))
    if missing.size:
        raise MissingCenter(
            f"{missing.size} celdas del soporte no son centro de ningún candidato "
            f"(primera: {grid.unravel(int(missing[0]))})."
        )

    eligible = [int(j) for j in owner[mask]]
    order = sorted(eligible, key=lambda j: (-candidates[j].radius, candidates[j].center))

    covered_cells = np.zeros(grid.n_cells, dtype=bool)
    chosen: list[int] = []
    for j in order:
        cell = _center_cell(grid, candidates[j].center)
        if covered_cells[cell]:
            continue
        chosen.append(j)
        _mark(candidates[j], covered_cells)

    balls = tuple(_as_ball(candidates[j]) for j in chosen)
    counts = coverage_counts(balls, grid.n_cells)
    covering = Covering(
        balls=balls,
        support=mask,
        multiplicity=int(counts[mask].max()) if mask.any() else 0,
        covered=bool(np.all(counts[mask] >= 1)),
        overlap_max=int(counts.max()),
        masses=tuple(ball_mass(rho, b.center, b.radius) for b in balls)
        if rho is not None else (),
        step_masses=tuple(float(step_masses[j]) for j in chosen)
        if step_masses is not None else (),
        support_threshold=support_threshold,
        selection_order=tuple(chosen),
    )
    logger.info(f"[covering] {len(candidates)} candidatos → {covering}")
    return covering


def multiplicity(cov: Covering) -> int:
    """Multiplicidad recontada a partir de las máscaras de las bolas."""
    if not cov.balls:
        return 0
    counts = coverage_counts(cov.balls, cov.support.size)
    return int(counts[cov.support].max()) if cov.support.any() else 0


def cover_density(
    rho: Field,
    target_mass: float = DEFAULT_TARGET_MASS,
    workers: int = 1,
    threshold_rel: float = SUPPORT_THRESHOLD_REL,
) -> Covering:
    """Candidatos + selección de Besicovitch para una densidad."""
    support, threshold = support_mask(rho, threshold_rel)
    balls, selections = candidate_selections(rho, target_mass, workers, threshold_rel)
    return besicovitch_select(
        balls,
        support,
        rho=rho,
        step_masses=[s.step_mass for s in selections],
        support_threshold=threshold,
    )


# ══════════════════════════════════════════════════════════════════════════════
# 5. BARRIDO DE REFINAMIENTO
# ══════════════════════════════════════════════════════════════════════════════

def refinement_sweep(
    generator_spec: dict,
    levels: int,
    target_mass: float = DEFAULT_TARGET_MASS,
    workers: int = 1,
    ceilings: dict[int, Optional[int]] = MULTIPLICITY_CEILINGS,
) -> pd.DataFrame:
    """
    Multiplicidad del recubrimiento al duplicar la resolución de la malla.

    El nivel l usa 2^l veces los puntos por eje de generator_spec["grid"].

    Retorna
    -------
    pd.DataFrame : level, points, cells, balls, multiplicity, overlap_max,
                   ceiling, within_ceiling.
    """
    from ensemble_factory import create_ensemble

    if levels < 1:
        raise InvalidInput(f"levels debe ser ≥ 1 (recibido {levels}).")
    base = generator_spec.get("grid")
    if not isinstance(base, dict):
        raise InvalidInput("El barrido de refinamiento necesita spec['grid'].")
    base_grid = grid_from_dict(base)

    rows = []
    for level in range(levels):
        points = [p * 2 ** level for p in base_grid.points]
        spec = {**generator_spec, "grid": {**base_grid.to_dict(), "points": points}}
        rho = density(create_ensemble(spec))
        cov = cover_density(rho, target_mass, workers)
        ceiling = ceilings.get(base_grid.dim)
        rows.append({
            "level": level,
            "points": "x".join(str(p) for p in points),
            "cells": rho.grid.n_cells,
            "balls": cov.n_balls,
            "multiplicity": cov.multiplicity,
            "overlap_max": cov.overlap_max,
            "ceiling": ceiling if ceiling is not None else -1,
            "within_ceiling": ceiling is None or cov.multiplicity <= ceiling,
        })
        logger.info(
            f"[covering] nivel {level} | puntos={points} | "
            f"multiplicidad={cov.multiplicity} | techo={ceiling}"
        )
    return pd.DataFrame(rows)


# ══════════════════════════════════════════════════════════════════════════════
# 6. EXPORTACIÓN
# ══════════════════════════════════════════════════════════════════════════════

def covering_to_frame(cov: Covering) -> pd.DataFrame:
    """Una fila por bola elegida, en orden de selección."""
    rows = []
    for k, ball in enumerate(cov.balls):
        row = {
            "order": k,
            "center": " ".join(f"{c:.12g}" for c in ball.center),
            "radius": ball.radius,
            "volume": ball.volume,
            "cells": ball.n_cells,
        }
        if cov.masses:
            row["mass"] = cov.masses[k]
        if cov.step_masses:
            row["step_mass"] = cov.step_masses[k]
        rows.append(row)
    return pd.DataFrame(rows)


def covering_to_dict(cov: Covering) -> dict:
    balls = []
    for k, ball in enumerate(cov.balls):
        entry = ball.to_dict()
        if cov.masses:
            entry["mass"] = cov.masses[k]
        if cov.step_masses:
            entry["step_mass"] = cov.step_masses[k]
        balls.append(entry)
    return {
        "balls": balls,
        "multiplicity": cov.multiplicity,
        "overlap_max": cov.overlap_max,
        "covered": cov.covered,
        "support_cells": int(np.count_nonzero(cov.support)),
        "support_threshold": cov.support_threshold,
        "selection_order": list(cov.selection_order),
    }
