"""
================================================================================
ENSEMBLE LOADER — ensemble_loader.py
================================================================================
Proyecto: Laboratorio numérico de la desigualdad cinética de Lieb–Thirring.

Propósito: Formato de intercambio JSON de los ensembles. Guardar y cargar
           familias ortonormales ponderadas para poder reejecutar cualquier
           certificado a partir de un archivo.

Formato del documento:

    {
      "grid":    {"dim": d, "extent": [[lo, hi], ...], "points": [N_1, ...]},
      "weights": [λ_1, ..., λ_N],
      "fields":  [[v_0, v_1, ...], ...],     # orden row-major de celdas
      "config":  {...}                        # opcional, se ignora al cargar
    }

    Los valores complejos se escriben como pares [re, im]. Un campo real es
    una lista plana de floats.

Uso:
    from ensemble_loader import save_ensemble, load_ensemble

    save_ensemble(ensemble, "out/optimized.json", config={"seed": 0})
    ensemble = load_ensemble("out/optimized.json")

Autor: [Proyecto académico]
Fecha: 2026-02
================================================================================
"""

import json
import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np

from errors import InvalidInput, LaboratoryError
from fields import DEFAULT_CELL_BUDGET, Ensemble, Field, grid_from_dict

logger = logging.getLogger(__name__)


REQUIRED_KEYS = ("grid", "weights", "fields")


# ══════════════════════════════════════════════════════════════════════════════
# 1. SERIALIZACIÓN
# ══════════════════════════════════════════════════════════════════════════════

def _field_to_list(f: Field) -> list:
    if f.is_complex:
        return [[float(z.real), float(z.imag)] for z in f.values]
    return [float(v) for v in f.values]


def ensemble_to_dict(e: Ensemble, config: Optional[dict] = None) -> dict:
    """Convierte un ensemble al documento JSON de intercambio."""
    doc = {
        "grid": e.grid.to_dict(),
        "weights": [float(w) for w in e.weights],
        "fields": [_field_to_list(u) for u in e.fields],
    }
    if config is not None:
        doc["config"] = config
    return doc


def save_ensemble(
    e: Ensemble,
    path: Union[str, Path],
    config: Optional[dict] = None,
) -> Path:
    """
    Guarda el ensemble como JSON (claves ordenadas, sin marcas de tiempo).

    Retorna
    -------
    Path : ruta del archivo escrito.
    """
    filepath = Path(path)
    filepath.parent.mkdir(parents=True, exist_ok=True)
    with open(filepath, "w", encoding="utf-8") as f:
        json.dump(ensemble_to_dict(e, config), f, sort_keys=True)
        f.write("\n")
    logger.info(f"[loader] ✓ Ensemble guardado: {filepath} (N={e.size})")
    return filepath


# ══════════════════════════════════════════════════════════════════════════════
# 2. CARGA
# ══════════════════════════════════════════════════════════════════════════════

def _values_from_list(raw, n_cells: int, index: int) -> np.ndarray:
    try:
        arr = np.asarray(raw, dtype=float)
    except (TypeError, ValueError):
        raise InvalidInput(f"Campo {index}: valores no numéricos.") from None
    if arr.ndim == 2 and arr.shape[1] == 2:
        return arr[:, 0] + 1j * arr[:, 1]
    if arr.ndim == 1:
        return arr
    raise InvalidInput(
        f"Campo {index}: forma {arr.shape}; se esperaba ({n_cells},) o ({n_cells}, 2)."
    )


def ensemble_from_dict(doc: dict, cell_budget: int = DEFAULT_CELL_BUDGET) -> Ensemble:
    """
    Reconstruye un ensemble desde su documento.

    Raises
    ------
    InvalidInput : documento mal formado (claves ausentes, tipos erróneos).
    NotOrthonormal, BadWeights, GridMismatch : invariantes del ensemble.
    """
    if not isinstance(doc, dict):
        raise InvalidInput("El documento de ensemble debe ser un objeto JSON.")
    for key in REQUIRED_KEYS:
        if key not in doc:
            raise InvalidInput(
                f"Documento de ensemble corrupto: falta la clave '{key}'. "
                f"Requeridas: {list(REQUIRED_KEYS)}"
            )
    if not isinstance(doc["grid"], dict):
        raise InvalidInput("La clave 'grid' debe ser un objeto {dim, extent, points}.")
    grid = grid_from_dict(doc["grid"], cell_budget)

    raw_fields = doc["fields"]
    raw_weights = doc["weights"]
    if not isinstance(raw_fields, list) or not isinstance(raw_weights, list):
        raise InvalidInput("'weights' y 'fields' deben ser listas.")

    try:
        fields = tuple(
            Field(grid, _values_from_list(raw, grid.n_cells, k))
            for k, raw in enumerate(raw_fields)
        )
        weights = tuple(float(w) for w in raw_weights)
    except LaboratoryError:
        raise
    except (TypeError, ValueError) as e:
        raise InvalidInput(f"Documento de ensemble inválido: {e}") from None

    return Ensemble(weights=weights, fields=fields)


def load_ensemble(
    path: Union[str, Path],
    cell_budget: int = DEFAULT_CELL_BUDGET,
) -> Ensemble:
    """
    Carga un ensemble guardado con save_ensemble.

    Raises
    ------
    InvalidInput : archivo inexistente, JSON inválido o documento mal formado.
    """
    filepath = Path(path)
    if not filepath.exists():
        raise InvalidInput(f"Ensemble no encontrado: {filepath}")

    try:
        with open(filepath, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise InvalidInput(f"JSON inválido en {filepath}: {e}") from None

    ensemble = ensemble_from_dict(doc, cell_budget)
    logger.info(
        f"[loader] ✓ Ensemble cargado desde {filepath} | "
        f"N={ensemble.size} | malla={ensemble.grid.points}"
    )
    return ensemble
