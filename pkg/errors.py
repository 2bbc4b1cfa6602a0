"""
================================================================================
ERRORES — errors.py
================================================================================
Proyecto: Laboratorio numérico de la desigualdad cinética de Lieb–Thirring.

Propósito: Jerarquía única de excepciones del laboratorio. Todas heredan de
           LaboratoryError (a su vez ValueError), de modo que la CLI puede
           traducir cualquier fallo de entrada o de precondición a un código
           de salida 2 sin conocer cada caso concreto.

Autor: [Proyecto académico]
Fecha: 2026-02
================================================================================
"""


class LaboratoryError(ValueError):
    """Error base del laboratorio (entrada inválida o precondición violada)."""


# ── Malla, campos y ensembles ────────────────────────────────────────────────

class BudgetExceeded(LaboratoryError):
    """La malla supera el presupuesto de celdas configurado."""


class BadExtent(LaboratoryError):
    """Extensión de caja mal formada (hi ≤ lo, dimensión no soportada...)."""


class GridMismatch(LaboratoryError):
    """Operación entre objetos definidos sobre mallas distintas."""


class NotOrthonormal(LaboratoryError):
    """La familia de campos no es ortonormal dentro de la tolerancia."""


class BadWeights(LaboratoryError):
    """Pesos fuera de [0, 1] o en número distinto al de campos."""


class ZeroDensity(LaboratoryError):
    """La densidad es idénticamente nula."""


class RankDeficient(LaboratoryError):
    """Gram–Schmidt encontró una norma por debajo del umbral."""


class ZeroField(LaboratoryError):
    """Campo idénticamente nulo donde se requiere uno no nulo."""


# ── Espectral ────────────────────────────────────────────────────────────────

class DisconnectedMask(LaboratoryError):
    """La máscara de la bola no es conexa (el gap saldría 0 espuriamente)."""


class GapUndefined(LaboratoryError):
    """La bola tiene una sola celda: no existe segundo autovalor."""


class ZeroOnBall(LaboratoryError):
    """La función es nula sobre la bola."""


class SolverNoConvergence(LaboratoryError, RuntimeError):
    """El autosolver iterativo no convergió."""


# ── Recubrimiento y certificado ──────────────────────────────────────────────

class InsufficientMass(LaboratoryError):
    """La masa total es menor que la masa objetivo de las bolas."""


class MissingCenter(LaboratoryError):
    """Alguna celda del soporte no es centro de exactamente un candidato."""


class MassOutOfWindow(LaboratoryError):
    """La masa de la bola está fuera de la ventana [a, b] con a > 1."""


# ── Optimización y CLI ───────────────────────────────────────────────────────

class LineSearchStalled(LaboratoryError):
    """El backtracking agotó las reducciones de paso sin descenso."""


class InvalidInput(LaboratoryError):
    """Documento, configuración o especificación de entrada inválidos."""
