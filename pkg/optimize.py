"""
================================================================================
OPTIMIZE — optimize.py
================================================================================
Proyecto: Laboratorio numérico de la desigualdad cinética de Lieb–Thirring.

Propósito: Buscar empíricamente el ínfimo del cociente de Lieb–Thirring
           Q = Tr(-Δγ) / ∫ρ^{1+2/d} sobre proyectores de rango N
           (todos los pesos iguales a 1) mediante descenso de gradiente
           proyectado sobre la variedad de familias ortonormales.

Método:

    1. GRADIENTE: derivada exacta del Q discreto respecto a los valores de
       cada campo, combinando partes real e imaginaria como ∂/∂Re + i ∂/∂Im:

           G_n = 2·vol·L u_n / R  -  (T / R²) · 2·vol·p·ρ^{p-1} u_n

       con T = Tr(-Δγ), R = ∫ρ^p y L el Laplaciano discreto de la malla
       completa (mismas diferencias hacia delante que gradient_energy).
    2. MÉTRICA: el gradiente en la métrica de la cuadratura es G / vol; se
       proyecta sobre el espacio tangente de la restricción de
       ortonormalidad quitando U · herm(U* Γ).
    3. RETRACCIÓN: reortonormalización por Gram–Schmidt.
    4. BÚSQUEDA LINEAL: si Q sube, el paso se divide por 2 (como máximo
       max_halvings veces). Tras un paso aceptado, el siguiente empieza en
       min(2·paso, step_size).

Autor: [Proyecto académico]
Fecha: 2026-02
================================================================================
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
import pandas as pd

from errors import InvalidInput, LineSearchStalled, ZeroDensity
from fields import (
    Ensemble,
    Field,
    Grid,
    density,
    density_power_integral,
    kinetic_energy,
    lt_exponent,
    lt_quotient,
    map_in_order,
    orthonormalize,
    projector,
)

logger = logging.getLogger(__name__)


# ══════════════════════════════════════════════════════════════════════════════
# 1. CONFIGURACIÓN
# ══════════════════════════════════════════════════════════════════════════════

STATUS_MAX_STEPS = "max_steps"
STATUS_CONVERGED = "converged"

TRACE_COLUMNS = ["step", "quotient", "step_size", "grad_norm"]


@dataclass(frozen=True)
class OptimizerConfig:
    """
    Parámetros del descenso.

    Atributos
    ---------
    steps : int
        Número máximo de pasos (0 devuelve la entrada sin tocar).
    step_size : float
        Paso inicial (> 0).
    seed : int
        Semilla del ensemble inicial aleatorio.
    n_fields : int
        Rango del proyector inicial aleatorio.
    max_halvings : int
        Divisiones del paso antes de declarar estancamiento.
    tolerance : float
        Norma del gradiente tangente por debajo de la cual se converge.
    """

    steps: int = 100
    step_size: float = 1e-2
    seed: int = 0
    n_fields: int = 1
    max_halvings: int = 30
    tolerance: float = 1e-4

    def __post_init__(self):
        if int(self.steps) != self.steps or self.steps < 0:
            raise InvalidInput(f"steps debe ser un entero ≥ 0 (recibido {self.steps}).")
        if not (self.step_size > 0) or not math.isfinite(self.step_size):
            raise InvalidInput(f"step_size debe ser > 0 (recibido {self.step_size}).")
        if self.n_fields < 1:
            raise InvalidInput(f"n_fields debe ser ≥ 1 (recibido {self.n_fields}).")
        if self.max_halvings < 0:
            raise InvalidInput(f"max_halvings debe ser ≥ 0 (recibido {self.max_halvings}).")
        if self.tolerance < 0:
            raise InvalidInput(f"tolerance debe ser ≥ 0 (recibido {self.tolerance}).")


@dataclass(frozen=True)
class OptimizationResult:
    ensemble: Ensemble
    trace: pd.DataFrame
    status: str

    @property
    def final_quotient(self) -> float:
        return float(self.trace["quotient"].iloc[-1])


# ══════════════════════════════════════════════════════════════════════════════
# 2. GRADIENTE
# ══════════════════════════════════════════════════════════════════════════════

def apply_laplacian(f: Field) -> np.ndarray:
    """
    L f con L el Laplaciano de la malla completa (omisión Neumann en el borde).

    Cumple gradient_energy(f) = vol · Re <f, L f> (producto sin peso).
    """
    grid = f.grid
    arr = f.as_array()
    out = np.zeros_like(arr)
    for axis in range(grid.dim):
        if grid.points[axis] < 2:
            continue
        d = np.diff(arr, axis=axis) / grid.spacing[axis] ** 2
        n = grid.points[axis]
        lower = [slice(None)] * grid.dim
        upper = [slice(None)] * grid.dim
        lower[axis] = slice(0, n - 1)
        upper[axis] = slice(1, n)
        out[tuple(lower)] -= d
        out[tuple(upper)] += d
    return out.reshape(-1)


def _require_projector(e: Ensemble) -> None:
    if not e.is_projector:
        raise InvalidInput(
            f"El gradiente solo está definido para proyectores (todos los λ = 1); "
            f"pesos recibidos: {list(e.weights)}"
        )


def quotient_gradient(e: Ensemble) -> list[Field]:
    """
    Gradiente euclídeo exacto de Q respecto a los valores de cada campo.

    Raises
    ------
    InvalidInput : si algún peso es distinto de 1.
    ZeroDensity
    """
    _require_projector(e)
    grid = e.grid
    vol = grid.cell_volume
    p = lt_exponent(grid.dim)
    rho = density(e)
    power = density_power_integral(rho)
    if power <= 0.0:
        raise ZeroDensity("La densidad del ensemble es idénticamente nula.")
    kinetic = kinetic_energy(e)
    weight = np.power(np.maximum(rho.values, 0.0), p - 1.0)

    grads = []
    for u in e.fields:
        g = 2.0 * vol * apply_laplacian(u) / power
        g = g - (kinetic / power ** 2) * 2.0 * vol * p * weight * u.values
        grads.append(Field(grid, g))
    return grads


def tangent_gradient(e: Ensemble, grads: Sequence[Field]) -> tuple[list[Field], float]:
    """
    Proyección del gradiente (métrica de la cuadratura) sobre el espacio
    tangente de la restricción de ortonormalidad.

    Retorna
    -------
    (campos tangentes, norma L² conjunta)
    """
    grid = e.grid
    vol = grid.cell_volume
    use_complex = any(u.is_complex for u in e.fields) or any(g.is_complex for g in grads)
    dtype = np.complex128 if use_complex else np.float64
    U = np.stack([np.asarray(u.values, dtype=dtype) for u in e.fields], axis=1)
    Gamma = np.stack([np.asarray(g.values, dtype=dtype) for g in grads], axis=1) / vol
    A = vol * (U.conj().T @ Gamma)
    herm = 0.5 * (A + A.conj().T)
    tangent = Gamma - U @ herm
    norm = math.sqrt(float(np.sum(np.abs(tangent) ** 2)) * vol)
    return [Field(grid, tangent[:, n]) for n in range(tangent.shape[1])], norm


# ══════════════════════════════════════════════════════════════════════════════
# 3. DESCENSO
# ══════════════════════════════════════════════════════════════════════════════

def _trace_frame(rows: list[dict]) -> pd.DataFrame:
    return pd.DataFrame(rows, columns=TRACE_COLUMNS)


def minimize_quotient(init: Ensemble, cfg: OptimizerConfig) -> OptimizationResult:
    """
    Descenso de gradiente proyectado con retracción por reortonormalización.

    La traza registra Q tras cada paso aceptado y es no creciente.

    Raises
    ------
    InvalidInput : ensemble que no es proyector.
    LineSearchStalled : max_halvings divisiones sin descenso y gradiente
                        tangente aún por encima de la tolerancia.
    """
    _require_projector(init)
    e = init
    quotient = lt_quotient(e)
    rows = []

    if cfg.steps == 0:
        rows.append({"step": 0, "quotient": quotient, "step_size": 0.0, "grad_norm": float("nan")})
        return OptimizationResult(ensemble=init, trace=_trace_frame(rows), status=STATUS_MAX_STEPS)

    logger.info("=" * 70)
    logger.info(
        f"OPTIMIZADOR — N={e.size} | d={e.dim} | pasos={cfg.steps} | "
        f"paso inicial={cfg.step_size:g}"
    )
    logger.info("=" * 70)

    tangent, grad_norm = tangent_gradient(e, quotient_gradient(e))
    rows.append({"step": 0, "quotient": quotient, "step_size": 0.0, "grad_norm": grad_norm})
    status = STATUS_MAX_STEPS
    eta = cfg.step_size

    for step in range(1, cfg.steps + 1):
        if grad_norm <= cfg.tolerance:
            status = STATUS_CONVERGED
            break

        accepted = None
        for _ in range(cfg.max_halvings + 1):
            trial = projector(orthonormalize(
                [u - eta * t for u, t in zip(e.fields, tangent)]
            ))
            trial_quotient = lt_quotient(trial)
            if trial_quotient <= quotient:
                accepted = trial
                break
            eta *= 0.5

        if accepted is None:
            raise LineSearchStalled(
                f"Paso {step}: {cfg.max_halvings} divisiones sin descenso "
                f"(Q={quotient:.10g}, ‖grad‖={grad_norm:.3e} > {cfg.tolerance:g})."
            )

        e, quotient = accepted, trial_quotient
        tangent, grad_norm = tangent_gradient(e, quotient_gradient(e))
        rows.append({"step": step, "quotient": quotient, "step_size": eta, "grad_norm": grad_norm})
        logger.debug(f"[optimize] paso {step} | Q={quotient:.10g} | η={eta:.3e} | ‖g‖={grad_norm:.3e}")
        eta = min(2.0 * eta, cfg.step_size)

    if status == STATUS_MAX_STEPS and grad_norm <= cfg.tolerance:
        status = STATUS_CONVERGED

    logger.info(
        f"[optimize] ✓ Q inicial={rows[0]['quotient']:.10g} → final={quotient:.10g} | "
        f"pasos={len(rows) - 1} | estado={status}"
    )
    return OptimizationResult(ensemble=e, trace=_trace_frame(rows), status=status)


def random_start(grid: Grid, n_fields: int, seed: int) -> Ensemble:
    """Proyector inicial aleatorio: n_fields bultos gaussianos ortonormalizados."""
    from ensemble_factory import create_ensemble

    width = 0.1 * min(hi - lo for lo, hi in grid.extent)
    return create_ensemble(
        {"generator": "random_bumps", "seed": seed,
         "params": {"n_fields": n_fields, "width": width}},
        grid=grid,
    )


def run_seeds(
    init_factory: Callable[[int], Ensemble],
    cfg: OptimizerConfig,
    seeds: Sequence[int],
    workers: int = 1,
) -> list[OptimizationResult]:
    """Ejecuciones independientes, una por semilla, en el orden de `seeds`."""
    return map_in_order(
        lambda s: minimize_quotient(init_factory(s), replace(cfg, seed=s)),
        list(seeds),
        workers,
    )
