"""
================================================================================
LAB CLI — lab_cli.py
================================================================================
Proyecto: Laboratorio numérico de la desigualdad cinética de Lieb–Thirring.

Propósito: Línea de comandos del laboratorio. Cuatro subcomandos que leen una
           configuración JSON (más sobrescrituras por flags), ejecutan el
           cálculo y escriben resultados deterministas en el directorio de
           salida.

Uso:
    python main.py verify   --config configs/hermite4_verify.json --out out/
    python main.py cover    --config configs/two_clusters_cover.json --refinement-levels 3
    python main.py gap      --config configs/unit_interval_gap.json
    python main.py optimize --config configs/optimize_n1.json --steps 50

Salidas:
    verify   → certificate.json, certificate.txt
    cover    → covering.json, covering_balls.csv [, refinement.csv]
    gap      → gaps.csv
    optimize → trace.csv, optimized_ensemble.json

    Todo JSON lleva la clave "config" con la configuración resuelta; todo CSV
    empieza con la línea "# config: {...}". Sin marcas de tiempo y con claves
    ordenadas: dos ejecuciones iguales producen archivos idénticos.

Códigos de salida:
    0 = éxito, 2 = entrada inválida, 3 = veredicto falso (verify).

Cómo añadir un subcomando:
    1. Escribir cmd_<nombre>(config: RunConfig) -> int.
    2. Registrarlo en COMMANDS y, si tiene flags propios, en _build_parser().

Autor: [Proyecto académico]
Fecha: 2026-02
================================================================================
"""

import argparse
import dataclasses
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import pandas as pd

from certificate import build_certificate, save_certificate
from covering import cover_density, covering_to_dict, covering_to_frame, refinement_sweep
from ensemble_factory import create_ensemble
from ensemble_loader import load_ensemble, save_ensemble
from errors import (
    DisconnectedMask,
    GapUndefined,
    InvalidInput,
    LaboratoryError,
)
from fields import Ensemble, Grid, density, grid_from_dict, make_ball
from optimize import OptimizerConfig, minimize_quotient, random_start
from spectral import gap_radius_sweep, local_uncertainty_measure, neumann_gap, sqrt_density

logger = logging.getLogger(__name__)


# ══════════════════════════════════════════════════════════════════════════════
# 1. CONFIGURACIÓN
# ══════════════════════════════════════════════════════════════════════════════

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_VERDICT_FALSE = 3

FILE_FORMATS = ("csv", "parquet")

# Malla por defecto cuando la configuración solo fija la dimensión
DEFAULT_GRIDS: dict[int, dict] = {
    1: {"dim": 1, "extent": [-10.0, 10.0], "points": 2000},
    2: {"dim": 2, "extent": [-6.0, 6.0], "points": 96},
    3: {"dim": 3, "extent": [-4.0, 4.0], "points": 24},
}

LOG_FORMAT = "%(asctime)s | %(levelname)-8s | %(message)s"
LOG_DATEFMT = "%Y-%m-%d %H:%M:%S"


@dataclass
class RunConfig:
    """
    Configuración de una ejecución (archivo JSON + flags).

    Las claves del JSON deben coincidir con los atributos; cualquier otra
    se rechaza.
    """

    command: str = ""
    seed: int = 0
    target_mass: float = 2.0
    dim: Optional[int] = None
    out_dir: str = "out"
    ensemble: Optional[str] = None
    generator: Optional[dict] = None
    grid: Optional[dict] = None
    workers: int = 1
    file_format: str = "csv"
    log_level: str = "INFO"
    # gap
    balls: list = field(default_factory=list)
    radius_sweep: Optional[dict] = None
    # cover
    refinement_levels: int = 0
    # optimize
    steps: int = 100
    step_size: float = 1e-2
    n_fields: int = 1
    max_halvings: int = 30
    tolerance: float = 1e-4

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


CONFIG_KEYS = tuple(f.name for f in dataclasses.fields(RunConfig))


def load_run_config(path: Optional[str], overrides: dict) -> RunConfig:
    """
    Lee el JSON de configuración (si se da) y aplica las sobrescrituras.

    Raises
    ------
    InvalidInput : archivo ilegible, JSON inválido o claves desconocidas.
    """
    values: dict = {}
    if path is not None:
        filepath = Path(path)
        if not filepath.is_file():
            raise InvalidInput(f"Configuración no encontrada: {filepath}")
        try:
            with open(filepath, "r", encoding="utf-8") as f:
                values = json.load(f)
        except json.JSONDecodeError as e:
            raise InvalidInput(f"JSON inválido en {filepath}: {e}") from None
        if not isinstance(values, dict):
            raise InvalidInput(f"{filepath} debe contener un objeto JSON.")

    unknown = sorted(set(values) - set(CONFIG_KEYS))
    if unknown:
        raise InvalidInput(
            f"Claves de configuración desconocidas: {unknown}. "
            f"Admitidas: {list(CONFIG_KEYS)}"
        )
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        config = RunConfig(**values)
    except TypeError as e:
        raise InvalidInput(f"Configuración inválida: {e}") from None
    validate_run_config(config)
    return config


def validate_run_config(config: RunConfig) -> None:
    """Comprueba tipos, rangos y rutas antes de empezar a calcular."""
    if config.command not in COMMANDS:
        raise InvalidInput(
            f"Comando '{config.command}' no reconocido. Disponibles: {list(COMMANDS)}"
        )
    if config.file_format not in FILE_FORMATS:
        raise InvalidInput(
            f"Formato '{config.file_format}' no soportado. Opciones: {list(FILE_FORMATS)}"
        )
    if config.dim is not None and config.dim not in DEFAULT_GRIDS:
        raise InvalidInput(f"Dimensión {config.dim} no soportada. Opciones: {list(DEFAULT_GRIDS)}")
    if config.workers < 1:
        raise InvalidInput(f"workers debe ser ≥ 1 (recibido {config.workers}).")
    if not (config.target_mass > 1.0):
        raise InvalidInput(f"target_mass debe ser > 1 (recibido {config.target_mass}).")
    if config.refinement_levels < 0:
        raise InvalidInput("refinement_levels debe ser ≥ 0.")
    if config.ensemble is not None and not Path(config.ensemble).is_file():
        raise InvalidInput(f"Ensemble no encontrado: {config.ensemble}")
    if config.ensemble is not None and config.generator is not None:
        raise InvalidInput("Úsese 'ensemble' o 'generator', no ambos.")
    if config.generator is not None and not isinstance(config.generator, dict):
        raise InvalidInput("'generator' debe ser un objeto {generator, params, ...}.")
    out = Path(config.out_dir)
    if out.exists() and not out.is_dir():
        raise InvalidInput(f"La salida {out} existe y no es un directorio.")


# ══════════════════════════════════════════════════════════════════════════════
# 2. RESOLUCIÓN DE ENTRADAS
# ══════════════════════════════════════════════════════════════════════════════

def resolve_grid(config: RunConfig) -> Grid:
    """Malla de config.grid, de la del generador o la malla por defecto de config.dim."""
    if config.grid is not None:
        grid = grid_from_dict(config.grid)
    elif config.generator is not None and "grid" in config.generator:
        grid = grid_from_dict(config.generator["grid"])
    elif config.dim is not None:
        grid = grid_from_dict(DEFAULT_GRIDS[config.dim])
    else:
        raise InvalidInput("No hay malla: indíquese 'grid', generator.grid o 'dim'.")
    if config.dim is not None and grid.dim != config.dim:
        raise InvalidInput(f"La malla tiene dimensión {grid.dim} pero dim={config.dim}.")
    return grid


def generator_spec(config: RunConfig) -> Optional[dict]:
    """Especificación del generador con la semilla y la malla resueltas."""
    if config.generator is None:
        return None
    spec = dict(config.generator)
    spec.setdefault("seed", config.seed)
    spec["grid"] = resolve_grid(config).to_dict()
    return spec


def resolve_ensemble(config: RunConfig) -> Optional[Ensemble]:
    if config.ensemble is not None:
        return load_ensemble(config.ensemble)
    spec = generator_spec(config)
    if spec is not None:
        return create_ensemble(spec)
    return None


def require_ensemble(config: RunConfig) -> Ensemble:
    e = resolve_ensemble(config)
    if e is None:
        raise InvalidInput(f"El comando '{config.command}' necesita 'ensemble' o 'generator'.")
    return e


# ══════════════════════════════════════════════════════════════════════════════
# 3. ESCRITURA
# ══════════════════════════════════════════════════════════════════════════════

def _config_line(config_dict: dict) -> str:
    return "# config: " + json.dumps(config_dict, sort_keys=True)


def write_json(path: Path, payload: dict) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
    logger.info(f"[cli] ✓ {path}")
    return path


def write_table(df: pd.DataFrame, path: Path, config: RunConfig) -> Path:
    """
    Escribe una tabla en CSV (con línea de configuración) o Parquet.

    En Parquet la configuración va en los metadatos del esquema (clave
    b"config").
    """
    config_dict = config.to_dict()
    path.parent.mkdir(parents=True, exist_ok=True)
    if config.file_format == "parquet":
        import pyarrow as pa
        import pyarrow.parquet as pq

        path = path.with_suffix(".parquet")
        table = pa.Table.from_pandas(df, preserve_index=False)
        metadata = dict(table.schema.metadata or {})
        metadata[b"config"] = json.dumps(config_dict, sort_keys=True).encode("utf-8")
        pq.write_table(table.replace_schema_metadata(metadata), path)
    else:
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(_config_line(config_dict) + "\n")
            df.to_csv(f, index=False, float_format="%.12g", lineterminator="\n")
    logger.info(f"[cli] ✓ {path} ({len(df)} filas)")
    return path


def read_table(path: Path) -> pd.DataFrame:
    """Lee una tabla escrita por write_table (ignora la línea de configuración)."""
    if path.suffix == ".parquet":
        return pd.read_parquet(path)
    return pd.read_csv(path, comment="#")


# ══════════════════════════════════════════════════════════════════════════════
# 4. SUBCOMANDOS
# ══════════════════════════════════════════════════════════════════════════════

def _header(title: str) -> None:
    logger.info("=" * 70)
    logger.info(title)
    logger.info("=" * 70)


def cmd_verify(config: RunConfig) -> int:
    """Certificado completo de un ensemble; 0 si el veredicto es válido, 3 si no."""
    _header("LAB — verify")
    e = require_ensemble(config)
    cert = build_certificate(e, target_mass=config.target_mass, workers=config.workers)
    save_certificate(cert, config.out_dir, config.to_dict())
    return EXIT_OK if cert.verdict else EXIT_VERDICT_FALSE


def cmd_cover(config: RunConfig) -> int:
    """Recubrimiento de Besicovitch y, opcionalmente, barrido de refinamiento."""
    _header("LAB — cover")
    e = require_ensemble(config)
    out = Path(config.out_dir)
    cov = cover_density(density(e), config.target_mass, config.workers)
    write_json(out / "covering.json", {**covering_to_dict(cov), "config": config.to_dict()})
    write_table(covering_to_frame(cov), out / "covering_balls.csv", config)

    if config.refinement_levels > 0:
        spec = generator_spec(config)
        if spec is None:
            raise InvalidInput("El barrido de refinamiento necesita 'generator'.")
        sweep = refinement_sweep(spec, config.refinement_levels, config.target_mass, config.workers)
        write_table(sweep, out / "refinement.csv", config)
    return EXIT_OK


def _gap_row(ball, grid: Grid, root=None) -> dict:
    row = {
        "ball_center": " ".join(f"{c:.12g}" for c in ball.center),
        "radius": ball.radius,
        "volume": ball.volume,
        "gap": math.nan,
        "gap_times_volume_pow": math.nan,
        "fitted_constant": math.nan,
        "status": "ok",
    }
    try:
        report = neumann_gap(ball, grid)
        row["gap"] = report.gap
        row["gap_times_volume_pow"] = report.gap_times_volume_pow
    except GapUndefined:
        row["status"] = "gap_undefined"
    except DisconnectedMask:
        row["status"] = "disconnected"
    if root is not None:
        try:
            row["fitted_constant"] = local_uncertainty_measure(root, ball).fitted_constant
        except LaboratoryError:
            pass
    return row


def cmd_gap(config: RunConfig) -> int:
    """
    Gaps de Neumann de una lista de bolas y/o de un barrido de radios.

    Sin bolas ni barrido, y con un ensemble, se usan las bolas de su
    recubrimiento. fitted_constant es la constante de incertidumbre de √ρ
    (NaN si no hay ensemble).
    """
    _header("LAB — gap")
    e = resolve_ensemble(config)
    rows = []

    if config.balls or (e is not None and config.radius_sweep is None):
        grid = e.grid if e is not None else resolve_grid(config)
        root = sqrt_density(e) if e is not None else None
        if config.balls:
            balls = []
            for spec in config.balls:
                try:
                    balls.append(make_ball(grid, spec["center"], float(spec["radius"])))
                except (KeyError, TypeError):
                    raise InvalidInput(f"Bola mal especificada: {spec}") from None
        else:
            balls = list(cover_density(density(e), config.target_mass, config.workers).balls)
        rows.extend(_gap_row(b, grid, root) for b in balls)

    if config.radius_sweep is not None:
        sweep = config.radius_sweep
        try:
            center = sweep["center"]
            radii = sweep["radii"]
        except (KeyError, TypeError):
            raise InvalidInput("radius_sweep necesita 'center' y 'radii'.") from None
        dim = len(center)
        reports = gap_radius_sweep(
            center, radii, dim,
            cells_per_radius=sweep.get("cells_per_radius"),
            workers=config.workers,
        )
        for r in reports:
            rows.append({
                "ball_center": " ".join(f"{c:.12g}" for c in r.ball.center),
                "radius": r.ball.radius,
                "volume": r.ball.volume,
                "gap": r.gap,
                "gap_times_volume_pow": r.gap_times_volume_pow,
                "fitted_constant": math.nan,
                "status": "ok",
            })

    if not rows:
        raise InvalidInput("gap necesita 'balls', 'radius_sweep' o un ensemble.")
    df = pd.DataFrame(rows, columns=[
        "ball_center", "radius", "volume", "gap",
        "gap_times_volume_pow", "fitted_constant", "status",
    ])
    write_table(df, Path(config.out_dir) / "gaps.csv", config)
    return EXIT_OK


def cmd_optimize(config: RunConfig) -> int:
    """Descenso sobre proyectores; traza y ensemble final."""
    _header("LAB — optimize")
    cfg = OptimizerConfig(
        steps=config.steps,
        step_size=config.step_size,
        seed=config.seed,
        n_fields=config.n_fields,
        max_halvings=config.max_halvings,
        tolerance=config.tolerance,
    )
    init = resolve_ensemble(config)
    if init is None:
        init = random_start(resolve_grid(config), cfg.n_fields, cfg.seed)
    result = minimize_quotient(init, cfg)
    out = Path(config.out_dir)
    write_table(result.trace, out / "trace.csv", config)
    save_ensemble(result.ensemble, out / "optimized_ensemble.json", config.to_dict())
    logger.info(f"[cli] Q final={result.final_quotient:.10g} | estado={result.status}")
    return EXIT_OK


COMMANDS: dict[str, Callable[[RunConfig], int]] = {
    "verify": cmd_verify,
    "cover": cmd_cover,
    "gap": cmd_gap,
    "optimize": cmd_optimize,
}


# ══════════════════════════════════════════════════════════════════════════════
# 5. PARSER Y PUNTO DE ENTRADA
# ══════════════════════════════════════════════════════════════════════════════

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lt-lab",
        description="Laboratorio numérico de la desigualdad de Lieb–Thirring.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, metavar="JSON")
    common.add_argument("--out", dest="out_dir", default=None, metavar="DIR")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--target-mass", dest="target_mass", type=float, default=None)
    common.add_argument("--dim", type=int, default=None)
    common.add_argument("--workers", type=int, default=None)
    common.add_argument("--ensemble", default=None, metavar="JSON")
    common.add_argument("--format", dest="file_format", choices=FILE_FORMATS, default=None)
    common.add_argument(
        "--log-level", dest="log_level", default=None,
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
    )

    subparsers.add_parser("verify", parents=[common], help="Certificado de un ensemble.")
    cover = subparsers.add_parser("cover", parents=[common], help="Recubrimiento de Besicovitch.")
    cover.add_argument("--refinement-levels", dest="refinement_levels", type=int, default=None)
    subparsers.add_parser("gap", parents=[common], help="Gaps de Neumann de bolas.")
    opt = subparsers.add_parser("optimize", parents=[common], help="Minimizar el cociente.")
    opt.add_argument("--steps", type=int, default=None)
    opt.add_argument("--step-size", dest="step_size", type=float, default=None)
    opt.add_argument("--n-fields", dest="n_fields", type=int, default=None)
    return parser


def _configure_logging(level: str) -> None:
    logging.basicConfig(level=getattr(logging, level), format=LOG_FORMAT, datefmt=LOG_DATEFMT)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Punto de entrada; devuelve el código de salida."""
    args = _build_parser().parse_args(argv)
    overrides = {k: v for k, v in vars(args).items() if k != "config"}
    _configure_logging(overrides.get("log_level") or "INFO")

    try:
        config = load_run_config(args.config, overrides)
    except (LaboratoryError, KeyError, TypeError) as e:
        logger.error(f"[cli] ✗ Configuración inválida: {e}")
        return EXIT_INVALID
    except OSError as e:
        logger.error(f"[cli] ✗ Error de E/S: {e}")
        return EXIT_INVALID

    logging.getLogger().setLevel(getattr(logging, config.log_level, logging.INFO))
    try:
        return COMMANDS[config.command](config)
    except LaboratoryError as e:
        logger.error(f"[cli] ✗ Entrada inválida: {e}")
        return EXIT_INVALID
    except OSError as e:
        logger.error(f"[cli] ✗ Error de E/S: {e}")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
