"""
================================================================================
CERTIFICATE — certificate.py
================================================================================
Proyecto: Laboratorio numérico de la desigualdad cinética de Lieb–Thirring.

Propósito: Reproducir mecánicamente, para un ensemble concreto, la cadena de
           desigualdades que lleva de los lemas locales a la cota global
           Tr(-Δγ) ≥ K ∫ρ^{1+2/d}, y emitir un certificado verificable con
           cada eslabón, su valor numérico y su veredicto.

Dos ramas:

    small_mass (∫ρ ≤ M_obj):
        Tr(-Δγ) ≥ ∫|∇√ρ|²                                  (Hoffmann-Ostenhof)
                = K_S · ∫ρ^p / M^{2/d}                     (Sobolev empírico)
                ≥ K_S · M_obj^{-2/d} · ∫ρ^p                (M ≤ M_obj)

    covering (∫ρ > M_obj):
        b · Tr(-Δγ) ≥ Σ_B Tr_B(-Δγ)                        (solapamiento b)
                    ≥ min_ratio · Σ_B ∫_B ρ^p               (lema por bola)
                    ≥ min_ratio · ∫ρ^p                      (recubrimiento)
        ⇒ Tr(-Δγ) ≥ (min_ratio / b) · ∫ρ^p                  (K_eff)

Lema por bola (masa M ≥ M_obj > 1, gap g, constante C de incertidumbre):

    exclusión:     Tr_B ≥ g (M - 1)
    incertidumbre: Tr_B ≥ ∫_B|∇√ρ|² ≥ I/C - C V
    combinación:   (1 + ε) Tr_B ≥ ε/(C M^{2/d}) ∫_Bρ^p + [g(M-1) - ε C M |B|^{-2/d}]

    Con ε = (M - 1) g |B|^{2/d} / (C M) el corchete se anula y queda
    Tr_B ≥ ε / ((1 + ε) C M^{2/d}) · ∫_Bρ^p.

Las energías locales usan la forma interior (ambas celdas de cada
diferencia dentro de la bola).

Autor: [Proyecto académico]
Fecha: 2026-02
================================================================================
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import pandas as pd

from covering import DEFAULT_TARGET_MASS, Covering, ball_mass, cover_density
from errors import InvalidInput, MassOutOfWindow, ZeroDensity
from fields import (
    Ball,
    Ensemble,
    Field,
    density,
    density_power_integral,
    family_density,
    gradient_energy,
    integrate,
    kinetic_energy,
    map_in_order,
)
from spectral import (
    GapReport,
    UncertaintyReport,
    local_uncertainty_measure,
    neumann_gap,
    sobolev_quotient,
    sqrt_density,
)

logger = logging.getLogger(__name__)


# ══════════════════════════════════════════════════════════════════════════════
# 1. CONFIGURACIÓN
# ══════════════════════════════════════════════════════════════════════════════

CHAIN_SLACK_REL = 1e-9
EXCLUSION_SLACK = 1e-9

# Tolerancia relativa sobre la ventana de masas de una bola
MASS_WINDOW_REL = 1e-12

MODE_SMALL_MASS = "small_mass"
MODE_COVERING = "covering"


def _holds(lhs: float, rhs: float, slack: float) -> bool:
    """lhs ≥ rhs con holgura relativa a la mayor magnitud (mínimo 1)."""
    return lhs >= rhs - slack * max(1.0, abs(lhs), abs(rhs))


# ══════════════════════════════════════════════════════════════════════════════
# 2. TIPOS
# ══════════════════════════════════════════════════════════════════════════════

@dataclass(frozen=True)
class ExclusionReport:
    """Exclusión local: Tr_B(-Δγ) (lhs) ≥ gap · (∫_Bρ - 1) (rhs)."""

    lhs: float
    rhs: float
    holds: bool
    mass: float
    gap: float


@dataclass(frozen=True)
class BallReport:
    ball: Ball
    mass: float
    local_kinetic: float
    local_lhs_lemma: float
    gap: float
    uncertainty: UncertaintyReport
    epsilon: float
    ratio: float
    a_priori_constant: float
    combination_lhs: float
    combination_rhs: float
    exclusion: ExclusionReport
    holds: bool

    def to_dict(self) -> dict:
        return {
            **self.ball.to_dict(),
            "mass": self.mass,
            "local_kinetic": self.local_kinetic,
            "local_lhs_lemma": self.local_lhs_lemma,
            "gap": self.gap,
            "uncertainty": self.uncertainty.to_dict(),
            "epsilon": self.epsilon,
            "ratio": self.ratio,
            "a_priori_constant": self.a_priori_constant,
            "combination_lhs": self.combination_lhs,
            "combination_rhs": self.combination_rhs,
            "exclusion_lhs": self.exclusion.lhs,
            "exclusion_rhs": self.exclusion.rhs,
            "holds": self.holds,
        }


@dataclass(frozen=True)
class ChainLink:
    """Un eslabón lhs ≥ rhs de la cadena global."""

    label: str
    lhs: float
    rhs: float
    holds: bool

    def to_dict(self) -> dict:
        return {"label": self.label, "lhs": self.lhs, "rhs": self.rhs, "holds": self.holds}


@dataclass(frozen=True)
class Certificate:
    """
    Certificado de una instancia.

    Atributos
    ---------
    mode : str
        "small_mass" o "covering".
    total_mass : float
        ∫ρ.
    global_kinetic : float
        Tr(-Δγ).
    global_rhs : float
        effective_constant · ∫ρ^p.
    ball_reports : tuple[BallReport, ...]
        Vacío en la rama small_mass.
    multiplicity, overlap_max : int
        Multiplicidad en el soporte y solapamiento máximo en la malla.
    covered : bool
    chain : tuple[ChainLink, ...]
    min_ratio : float | None
        Mínimo de Tr_B / ∫_Bρ^p (solo rama covering).
    effective_constant : float
        Constante K certificada para esta instancia.
    direct_quotient : float
        Tr(-Δγ) / ∫ρ^p, para comparar con la ruta de recubrimiento.
    sobolev_constant : float | None
        Cociente de Sobolev de √ρ (solo rama small_mass).
    verdict : bool
    """

    mode: str
    dim: int
    n_fields: int
    target_mass: float
    total_mass: float
    global_kinetic: float
    global_rhs: float
    ball_reports: tuple[BallReport, ...]
    multiplicity: int
    overlap_max: int
    covered: bool
    chain: tuple[ChainLink, ...]
    min_ratio: Optional[float]
    effective_constant: float
    direct_quotient: float
    sobolev_constant: Optional[float]
    verdict: bool


@dataclass(frozen=True)
class FamilyBound:
    """Cociente de una familia normalizada frente al de N copias de su primer campo."""

    orthogonal_quotient: float
    copies_quotient: float
    ratio: float
    n: int


# ══════════════════════════════════════════════════════════════════════════════
# 3. LEMAS LOCALES
# ══════════════════════════════════════════════════════════════════════════════

def verify_exclusion(
    e: Ensemble,
    ball: Ball,
    gap_report: Optional[GapReport] = None,
    slack: float = EXCLUSION_SLACK,
) -> ExclusionReport:
    """
    Comprueba la exclusión local Tr_B(-Δγ) ≥ gap · (∫_Bρ - 1).

    Raises
    ------
    GapUndefined : bola de una sola celda.
    """
    gap = (gap_report or neumann_gap(ball, e.grid)).gap
    rho = density(e)
    mass = ball_mass(rho, ball.center, ball.radius)
    lhs = kinetic_energy(e, ball.mask, interior=True)
    rhs = gap * (mass - 1.0)
    return ExclusionReport(
        lhs=lhs, rhs=rhs, holds=_holds(lhs, rhs, slack), mass=mass, gap=gap,
    )


def verify_ball_lemma(
    e: Ensemble,
    ball: Ball,
    target_mass: float = DEFAULT_TARGET_MASS,
    mass_upper: Optional[float] = None,
    slack: float = CHAIN_SLACK_REL,
) -> BallReport:
    """
    Lema por bola: combina exclusión e incertidumbre con el ε óptimo.

    Parámetros
    ----------
    e : Ensemble
    ball : Ball
    target_mass : float
        Cota inferior de la ventana de masas (> 1).
    mass_upper : float, opcional
        Cota superior de la ventana de masas.

    Raises
    ------
    MassOutOfWindow : masa fuera de [target_mass, mass_upper] o target ≤ 1.
    GapUndefined, DisconnectedMask : propagados del cálculo del gap.
    """
    if target_mass <= 1.0:
        raise MassOutOfWindow(f"La masa objetivo debe ser > 1 (recibida {target_mass}).")

    dim = e.dim
    rho = density(e)
    mass = ball_mass(rho, ball.center, ball.radius)
    if mass < target_mass * (1.0 - MASS_WINDOW_REL):
        raise MassOutOfWindow(f"∫_Bρ = {mass:.12g} < {target_mass} en {ball}.")
    if mass_upper is not None and mass > mass_upper * (1.0 + MASS_WINDOW_REL):
        raise MassOutOfWindow(f"∫_Bρ = {mass:.12g} > {mass_upper:.12g} en {ball}.")

    gap_report = neumann_gap(ball, e.grid)
    gap = gap_report.gap
    exclusion = verify_exclusion(e, ball, gap_report=gap_report)
    uncertainty = local_uncertainty_measure(sqrt_density(e), ball)
    c_u = uncertainty.fitted_constant

    local_kinetic = exclusion.lhs
    local_power = density_power_integral(rho, ball.mask)
    volume_pow = ball.volume ** (2.0 / dim)
    mass_pow = mass ** (2.0 / dim)

    epsilon = (mass - 1.0) * gap * volume_pow / (c_u * mass)
    ratio = local_kinetic / local_power if local_power > 0 else 0.0
    a_priori = epsilon / ((1.0 + epsilon) * c_u * mass_pow)
    combination_lhs = (1.0 + epsilon) * local_kinetic
    combination_rhs = (
        epsilon / (c_u * mass_pow) * local_power
        + (gap * (mass - 1.0) - epsilon * c_u * mass / volume_pow)
    )
    holds = ratio > 0 and _holds(combination_lhs, combination_rhs, slack)

    return BallReport(
        ball=ball,
        mass=mass,
        local_kinetic=local_kinetic,
        local_lhs_lemma=local_power,
        gap=gap,
        uncertainty=uncertainty,
        epsilon=epsilon,
        ratio=ratio,
        a_priori_constant=a_priori,
        combination_lhs=combination_lhs,
        combination_rhs=combination_rhs,
        exclusion=exclusion,
        holds=holds,
    )


# ══════════════════════════════════════════════════════════════════════════════
# 4. CERTIFICADO GLOBAL
# ══════════════════════════════════════════════════════════════════════════════

def _link(label: str, lhs: float, rhs: float, slack: float) -> ChainLink:
    link = ChainLink(label=label, lhs=lhs, rhs=rhs, holds=_holds(lhs, rhs, slack))
    mark = "✓" if link.holds else "✗"
    logger.info(f"[certificate]  {mark} {label}: {lhs:.10g} ≥ {rhs:.10g}")
    return link


def _small_mass_chain(
    e: Ensemble, total: float, power: float, kinetic: float,
    target_mass: float, slack: float,
) -> tuple[tuple[ChainLink, ...], float, float]:
    dim = e.dim
    root = sqrt_density(e)
    root_energy = gradient_energy(root)
    sobolev = sobolev_quotient(root)
    mass_pow = total ** (2.0 / dim)
    chain = (
        _link("Tr(-Δγ) ≥ ∫|∇√ρ|²", kinetic, root_energy, slack),
        _link("∫|∇√ρ|² ≥ K_S·∫ρ^p/M^(2/d)", root_energy, sobolev * power / mass_pow, slack),
        _link(
            "K_S·∫ρ^p/M^(2/d) ≥ K_S·M_obj^(-2/d)·∫ρ^p",
            sobolev * power / mass_pow,
            sobolev * target_mass ** (-2.0 / dim) * power,
            slack,
        ),
    )
    return chain, sobolev, sobolev / mass_pow


def _covering_chain(
    cov: Covering, reports: Sequence[BallReport],
    power: float, kinetic: float, slack: float,
) -> tuple[tuple[ChainLink, ...], float, float]:
    b = cov.overlap_max
    local_sum = 0.0
    power_sum = 0.0
    for r in reports:
        local_sum += r.local_kinetic
        power_sum += r.local_lhs_lemma
    min_ratio = min(r.ratio for r in reports)
    effective = min_ratio / b
    chain = (
        _link("b·Tr(-Δγ) ≥ Σ_B Tr_B", b * kinetic, local_sum, slack),
        _link("Σ_B Tr_B ≥ min_ratio·Σ_B ∫_Bρ^p", local_sum, min_ratio * power_sum, slack),
        _link("min_ratio·Σ_B ∫_Bρ^p ≥ min_ratio·∫ρ^p", min_ratio * power_sum, min_ratio * power, slack),
        _link("Tr(-Δγ) ≥ (min_ratio/b)·∫ρ^p", kinetic, effective * power, slack),
    )
    return chain, min_ratio, effective


def build_certificate(
    e: Ensemble,
    target_mass: float = DEFAULT_TARGET_MASS,
    workers: int = 1,
    slack: float = CHAIN_SLACK_REL,
) -> Certificate:
    """
    Construye el certificado de la instancia.

    Parámetros
    ----------
    e : Ensemble
        Se re-verifica su ortonormalidad antes de empezar.
    target_mass : float
        Masa de las bolas del recubrimiento (> 1).
    workers : int
        Hilos para candidatos y lemas por bola.

    Retorna
    -------
    Certificate

    Raises
    ------
    ZeroDensity, NotOrthonormal, InsufficientMass, MassOutOfWindow...
    """
    e.verify()
    if target_mass <= 1.0:
        raise MassOutOfWindow(f"La masa objetivo debe ser > 1 (recibida {target_mass}).")

    rho = density(e)
    total = integrate(rho.values, e.grid)
    power = density_power_integral(rho)
    if power <= 0.0:
        raise ZeroDensity("La densidad del ensemble es idénticamente nula.")
    kinetic = kinetic_energy(e, workers=workers)
    direct = kinetic / power
    mode = MODE_SMALL_MASS if total <= target_mass else MODE_COVERING

    logger.info("=" * 70)
    logger.info(f"CERTIFICADO — d={e.dim} | N={e.size} | ∫ρ={total:.6g} | rama={mode}")
    logger.info("=" * 70)

    if mode == MODE_SMALL_MASS:
        chain, sobolev, effective = _small_mass_chain(
            e, total, power, kinetic, target_mass, slack
        )
        reports: tuple[BallReport, ...] = ()
        multiplicity, overlap_max, covered, min_ratio = 0, 0, True, None
    else:
        cov = cover_density(rho, target_mass, workers)
        uppers = [target_mass + s for s in cov.step_masses]
        reports = tuple(map_in_order(
            lambda k: verify_ball_lemma(e, cov.balls[k], target_mass, uppers[k]),
            range(cov.n_balls),
            workers,
        ))
        logger.info(
            f"[certificate] {cov.n_balls} bolas | multiplicidad={cov.multiplicity} | "
            f"b={cov.overlap_max} | lemas ✓ {sum(r.holds for r in reports)}/{len(reports)}"
        )
        chain, min_ratio, effective = _covering_chain(cov, reports, power, kinetic, slack)
        sobolev = None
        multiplicity, overlap_max, covered = cov.multiplicity, cov.overlap_max, cov.covered

    verdict = all(link.holds for link in chain) and covered and all(r.holds for r in reports)
    certificate = Certificate(
        mode=mode,
        dim=e.dim,
        n_fields=e.size,
        target_mass=float(target_mass),
        total_mass=total,
        global_kinetic=kinetic,
        global_rhs=effective * power,
        ball_reports=reports,
        multiplicity=multiplicity,
        overlap_max=overlap_max,
        covered=covered,
        chain=chain,
        min_ratio=min_ratio,
        effective_constant=effective,
        direct_quotient=direct,
        sobolev_constant=sobolev,
        verdict=verdict,
    )
    logger.info(
        f"[certificate] K efectiva={effective:.6g} | cociente directo={direct:.6g} | "
        f"veredicto={'✓' if verdict else '✗'}"
    )
    return certificate


def normalized_family_bound(fields: Sequence[Field], norm_tol: float = 1e-8) -> FamilyBound:
    """
    Cociente de una familia normalizada frente al de N copias de su primer miembro.

    Para N copias idénticas el cociente vale (cociente de una) · N^{-2/d}.

    Raises
    ------
    InvalidInput : familia vacía o no normalizada.
    ZeroDensity
    """
    if not fields:
        raise InvalidInput("La familia está vacía.")
    for k, f in enumerate(fields):
        if abs(f.norm() - 1.0) > norm_tol:
            raise InvalidInput(f"El campo {k} no está normalizado (‖u‖ = {f.norm():.12g}).")

    def quotient(family: Sequence[Field]) -> float:
        power = density_power_integral(family_density(family))
        if power <= 0.0:
            raise ZeroDensity("La familia tiene densidad nula.")
        energy = 0.0
        for u in family:
            energy += gradient_energy(u)
        return energy / power

    n = len(fields)
    orthogonal = quotient(fields)
    copies = quotient([fields[0]] * n)
    return FamilyBound(
        orthogonal_quotient=orthogonal, copies_quotient=copies,
        ratio=orthogonal / copies, n=n,
    )


# ══════════════════════════════════════════════════════════════════════════════
# 5. EXPORTACIÓN
# ══════════════════════════════════════════════════════════════════════════════

def certificate_to_dict(cert: Certificate, config: Optional[dict] = None) -> dict:
    doc = {
        "mode": cert.mode,
        "dim": cert.dim,
        "n_fields": cert.n_fields,
        "target_mass": cert.target_mass,
        "total_mass": cert.total_mass,
        "global_kinetic": cert.global_kinetic,
        "global_rhs": cert.global_rhs,
        "ball_reports": [r.to_dict() for r in cert.ball_reports],
        "multiplicity": cert.multiplicity,
        "overlap_max": cert.overlap_max,
        "covered": cert.covered,
        "chain": [link.to_dict() for link in cert.chain],
        "min_ratio": cert.min_ratio,
        "effective_constant": cert.effective_constant,
        "direct_quotient": cert.direct_quotient,
        "sobolev_constant": cert.sobolev_constant,
        "verdict": cert.verdict,
    }
    if config is not None:
        doc["config"] = config
    return doc


def ball_reports_to_frame(cert: Certificate) -> pd.DataFrame:
    """Tabla de lemas por bola."""
    return pd.DataFrame([
        {
            "center": " ".join(f"{c:.6g}" for c in r.ball.center),
            "radius": r.ball.radius,
            "mass": r.mass,
            "gap": r.gap,
            "C_u": r.uncertainty.fitted_constant,
            "epsilon": r.epsilon,
            "ratio": r.ratio,
            "a_priori": r.a_priori_constant,
            "holds": r.holds,
        }
        for r in cert.ball_reports
    ])


def render_certificate_table(cert: Certificate) -> str:
    """Tabla legible que reproduce la cadena eslabón a eslabón."""
    lines = [
        "=" * 70,
        f"CERTIFICADO LIEB–THIRRING — d={cert.dim} | N={cert.n_fields} | rama={cert.mode}",
        "=" * 70,
        f"  ∫ρ                 = {cert.total_mass:.10g}",
        f"  masa objetivo      = {cert.target_mass:.10g}",
        f"  Tr(-Δγ)            = {cert.global_kinetic:.10g}",
        f"  cociente directo   = {cert.direct_quotient:.10g}",
        f"  K efectiva         = {cert.effective_constant:.10g}",
    ]
    if cert.mode == MODE_COVERING:
        lines += [
            f"  bolas              = {len(cert.ball_reports)}",
            f"  multiplicidad      = {cert.multiplicity}",
            f"  solapamiento b     = {cert.overlap_max}",
            f"  cubierto           = {cert.covered}",
            f"  min_ratio          = {cert.min_ratio:.10g}",
        ]
    else:
        lines.append(f"  K_S (Sobolev √ρ)   = {cert.sobolev_constant:.10g}")

    lines += ["", "CADENA", "-" * 70]
    for link in cert.chain:
        mark = "✓" if link.holds else "✗"
        lines.append(f"  {mark} {link.label}")
        lines.append(f"      {link.lhs:.12g} ≥ {link.rhs:.12g}")

    if cert.ball_reports:
        lines += ["", "LEMAS POR BOLA", "-" * 70]
        lines.append(ball_reports_to_frame(cert).to_string(index=False, float_format="%.6g"))

    lines += ["", f"VEREDICTO: {'✓ VÁLIDO' if cert.verdict else '✗ FALLIDO'}", ""]
    return "\n".join(lines)


def save_certificate(
    cert: Certificate,
    out_dir: Union[str, Path],
    config: Optional[dict] = None,
) -> tuple[Path, Path]:
    """
    Guarda certificate.json (claves ordenadas) y certificate.txt.

    Retorna
    -------
    tuple[Path, Path] : rutas JSON y texto.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    json_path = out / "certificate.json"
    text_path = out / "certificate.txt"
    with open(json_path, "w", encoding="utf-8") as f:
        json.dump(certificate_to_dict(cert, config), f, indent=2, sort_keys=True)
        f.write("\n")
    with open(text_path, "w", encoding="utf-8") as f:
        f.write(render_certificate_table(cert))
    logger.info(f"[certificate] ✓ Guardado: {json_path} y {text_path}")
    return json_path, text_path
